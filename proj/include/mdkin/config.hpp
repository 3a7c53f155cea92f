#pragma once

// Run configuration: a key = value text format with '#' comments.

#include "mdkin/energy_distance.hpp"
#include "mdkin/grid.hpp"
#include "mdkin/interactions.hpp"
#include "mdkin/params.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdkin {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named initial-mean presets.
inline PerPopulation<double> preset_means(const std::string& preset) {
  if (preset == "fig1") return make_per_population(9.0, 1.0, 0.1, 0.5);
  if (preset == "sec41") return make_per_population(9.0, 1.0, 0.6, 0.6);
  throw ConfigError("unknown preset '" + preset + "' (expected fig1 or sec41)");
}

struct RunConfig {
  ParameterSet params = table1_parameters();

  // Initial data. Unset means fall back to the preset; the experiment picks
  // the preset when none is given (fig1 for moments, sec41 otherwise).
  std::optional<std::string> preset;
  PerPopulation<std::optional<double>> m0{};
  PerPopulation<double> V0 = make_per_population(0.1, 0.1, 0.1, 0.1);

  // Mean-field grid
  double L = 12.0;
  std::size_t n_x = 801;
  double fp_dt_factor = 0.5;
  double fp_report_interval = 0.25;
  std::vector<double> snapshot_times{0.0, 1.0, 8.0, 75.0};

  // Particles
  std::size_t n_particles = 100000;
  std::uint64_t seed = 20240611;
  double dsmc_dt = 0.5;
  double dsmc_report_interval = 1.0;
  NoiseLaw noise_law = NoiseLaw::TwoPoint;
  int workers = 0;  ///< 0 keeps the OpenMP default
  std::size_t histogram_bins = 240;

  std::vector<double> epsilons{1e-3, 1e-2, 1e-1, 5e-1};
  std::vector<double> p_values{0.625, 0.75, 0.875};

  std::optional<double> horizon;  ///< per-experiment default when unset
  double ode_dt = 1e-2;
  double ode_report_interval = 0.1;

  std::string out_dir = "out";

  [[nodiscard]] CellGrid grid() const { return CellGrid(L, n_x); }

  [[nodiscard]] PerPopulation<double> initial_means(const std::string& default_preset) const {
    PerPopulation<double> m = preset_means(preset.value_or(default_preset));
    for (Population j : kPopulations)
      if (m0[j]) m[j] = *m0[j];
    return m;
  }

  [[nodiscard]] MomentState initial_moments(const std::string& default_preset) const {
    return {0.0, initial_means(default_preset), V0};
  }

  /// Widths of the uniform initial laws, so that population J has variance V0_J.
  [[nodiscard]] PerPopulation<double> initial_widths() const {
    PerPopulation<double> w;
    for (Population j : kPopulations) w[j] = std::sqrt(12.0 * V0[j]);
    return w;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("malformed value for '" + key + "': expected a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
    const unsigned long long u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("malformed value for '" + key + "': expected a nonnegative integer, got '" + v + "'");
  }
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError("malformed value for '" + key + "': empty list");
  return out;
}

inline NoiseLaw parse_noise_law(const std::string& key, const std::string& v) {
  if (v == "two_point") return NoiseLaw::TwoPoint;
  if (v == "uniform") return NoiseLaw::UniformSymmetric;
  throw ConfigError("malformed value for '" + key + "': expected two_point or uniform, got '" + v + "'");
}

}  // namespace detail

/// Every accepted key with its default, for --help output and the README.
inline std::string config_reference() {
  return R"(Configuration keys (key = value, '#' starts a comment; lists are comma separated):
  beta_N, beta_D, beta_M, beta_C      rates                     0.2, 0.1, 0.2, 0.1
  sigma2_N, sigma2_D, sigma2_M, sigma2_C  noise variances       0.01 each
  gamma_M, gamma_C                    recruitment rates         0.05, 0.05
  nu_control                          therapy efficacy          0
  epsilon                             base scaling in (0,1]     1
  preset                              fig1 | sec41              fig1 (moments), sec41 (others)
  m0_N, m0_D, m0_M, m0_C              initial means             from preset
  V0_N, V0_D, V0_M, V0_C              initial variances         0.1 each
  L, n_x                              mean-field grid           12, 801
  fp_dt_factor                        dt = factor * dx          0.5
  fp_report_interval                  metric spacing            0.25
  snapshot_times                      density snapshots         0, 1, 8, 75
  n_particles, seed                   particle ensemble         100000, 20240611
  dsmc_dt                             requested step (scaled)   0.5
  dsmc_report_interval                report spacing            1
  noise_law                           two_point | uniform       two_point
  workers                             OpenMP threads, 0 = auto  0
  histogram_bins                      bins on [0, L]            240
  epsilon_list                        consistency runs          0.001, 0.01, 0.1, 0.5
  p_list                              energy exponents          0.625, 0.75, 0.875
  horizon                             final time                100 (moments, consistency), 75 (meanfield)
  ode_dt, ode_report_interval         moment ODE                0.01, 0.1
  out_dir                             output directory          out
)";
}

/// Checks everything that is not a model parameter; model parameters go
/// through validate(). Throws ConfigError naming the offending key.
inline void check_config(const RunConfig& c) {
  const ValidationReport report = validate(c.params);
  if (!report.ok()) throw ConfigError("invalid parameters: " + report.summary());
  auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(key + " " + what); };
  for (Population j : kPopulations) {
    const std::string s{name(j)};
    if (c.m0[j] && !(*c.m0[j] > 0.0)) fail("m0_" + s, "must be positive");
    if (!(c.V0[j] > 0.0)) fail("V0_" + s, "must be positive");
  }
  if (!(c.L > 0.0)) fail("L", "must be positive");
  if (c.n_x < 2) fail("n_x", "must be at least 2");
  if (!(c.fp_dt_factor > 0.0)) fail("fp_dt_factor", "must be positive");
  if (!(c.fp_report_interval > 0.0)) fail("fp_report_interval", "must be positive");
  for (double t : c.snapshot_times)
    if (!(t >= 0.0)) fail("snapshot_times", "must be nonnegative");
  if (c.n_particles < 1) fail("n_particles", "must be at least 1");
  if (!(c.dsmc_dt > 0.0 && c.dsmc_dt <= 1.0)) fail("dsmc_dt", "must lie in (0,1]");
  if (!(c.dsmc_report_interval > 0.0)) fail("dsmc_report_interval", "must be positive");
  if (c.workers < 0) fail("workers", "must be nonnegative");
  if (c.histogram_bins < 1) fail("histogram_bins", "must be at least 1");
  for (double e : c.epsilons)
    if (!(e > 0.0 && e <= 1.0)) fail("epsilon_list", "entries must lie in (0,1]");
  for (double p : c.p_values)
    if (!(p > 0.5 && p < 1.0)) fail("p_list", "entries must lie in (1/2,1)");
  if (c.horizon && !(*c.horizon >= 0.0)) fail("horizon", "must be nonnegative");
  if (!(c.ode_dt > 0.0)) fail("ode_dt", "must be positive");
  if (!(c.ode_report_interval > 0.0)) fail("ode_report_interval", "must be positive");
  if (c.preset) (void)preset_means(*c.preset);
}

/// Parses configuration text. Unknown keys, malformed values and
/// constraint violations throw ConfigError.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (val.empty()) throw ConfigError("line " + std::to_string(lineno) + ": missing value for '" + key + "'");
    if (seen.count(key))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(seen[key]) + ")");
    seen[key] = lineno;

    auto num = [&] { return detail::parse_double(key, val); };
    bool handled = false;
    for (Population j : kPopulations) {
      const std::string s{name(j)};
      if (key == "beta_" + s) c.params.beta[j] = num();
      else if (key == "sigma2_" + s) c.params.sigma2[j] = num();
      else if (key == "m0_" + s) c.m0[j] = num();
      else if (key == "V0_" + s) c.V0[j] = num();
      else continue;
      handled = true;
      break;
    }
    if (handled) continue;
    if (key == "gamma_M") c.params.gamma_M = num();
    else if (key == "gamma_C") c.params.gamma_C = num();
    else if (key == "nu_control") c.params.nu_control = num();
    else if (key == "epsilon") c.params.epsilon = num();
    else if (key == "preset") c.preset = val;
    else if (key == "L") c.L = num();
    else if (key == "n_x") c.n_x = detail::parse_unsigned(key, val);
    else if (key == "fp_dt_factor") c.fp_dt_factor = num();
    else if (key == "fp_report_interval") c.fp_report_interval = num();
    else if (key == "snapshot_times") c.snapshot_times = detail::parse_list(key, val);
    else if (key == "n_particles") c.n_particles = detail::parse_unsigned(key, val);
    else if (key == "seed") c.seed = detail::parse_unsigned(key, val);
    else if (key == "dsmc_dt") c.dsmc_dt = num();
    else if (key == "dsmc_report_interval") c.dsmc_report_interval = num();
    else if (key == "noise_law") c.noise_law = detail::parse_noise_law(key, val);
    else if (key == "workers") c.workers = static_cast<int>(detail::parse_unsigned(key, val));
    else if (key == "histogram_bins") c.histogram_bins = detail::parse_unsigned(key, val);
    else if (key == "epsilon_list") c.epsilons = detail::parse_list(key, val);
    else if (key == "p_list") c.p_values = detail::parse_list(key, val);
    else if (key == "horizon") c.horizon = num();
    else if (key == "ode_dt") c.ode_dt = num();
    else if (key == "ode_report_interval") c.ode_report_interval = num();
    else if (key == "out_dir") c.out_dir = val;
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown configuration key '" + key + "'");
  }
  check_config(c);
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace mdkin
