#pragma once

#include "mdkin/population.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdkin {

/// Model constants. Noise strengths are stored as variances (sigma2), which
/// is what every formula of the model consumes; Table-1 style inputs that
/// quote "sigma = 0.01" are read as sigma^2 = 0.01.
struct ParameterSet {
  PerPopulation<double> beta{};    ///< interaction / decay rates, > 0
  PerPopulation<double> sigma2{};  ///< noise variances, >= 0
  double gamma_M = 0.0;            ///< macrophage recruitment by damaged cells, > 0
  double gamma_C = 0.0;            ///< T-cell recruitment by macrophages, > 0
  double nu_control = 0.0;         ///< therapy efficacy on T cells, >= 0
  double epsilon = 1.0;            ///< quasi-invariant scaling already applied, in (0, 1]

  /// Effective linear decay rate of population p. Only C feels the control.
  [[nodiscard]] double decay_rate(Population p) const noexcept {
    return p == Population::C ? beta[p] + nu_control : beta[p];
  }

  /// sigma_J^2 < 2 beta_J for every J; required for finite equilibrium variances.
  [[nodiscard]] bool variances_finite() const noexcept {
    for (Population p : kPopulations) {
      if (!(sigma2[p] < 2.0 * decay_rate(p))) return false;
    }
    return true;
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

/// Parameter values of the reference experiments.
inline ParameterSet table1_parameters() {
  ParameterSet p;
  p.beta = make_per_population(0.2, 0.1, 0.2, 0.1);
  p.sigma2 = make_per_population(0.01, 0.01, 0.01, 0.01);
  p.gamma_M = 0.05;
  p.gamma_C = 0.05;
  return p;
}

struct Violation {
  std::string key;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
  [[nodiscard]] bool mentions(const std::string& key) const {
    for (const auto& v : violations)
      if (v.key == key) return true;
    return false;
  }
  [[nodiscard]] std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.message;
    }
    return out;
  }
};

inline ValidationReport validate(const ParameterSet& p) {
  ValidationReport report;
  auto add = [&](std::string key, std::string msg) {
    report.violations.push_back({std::move(key), std::move(msg)});
  };
  auto finite = [](double v) { return std::isfinite(v); };

  for (Population j : kPopulations) {
    const std::string s{name(j)};
    if (!finite(p.beta[j]) || !(p.beta[j] > 0.0))
      add("beta_" + s, "beta_" + s + " must be positive");
    if (!finite(p.sigma2[j]) || p.sigma2[j] < 0.0)
      add("sigma2_" + s, "sigma2_" + s + " must be nonnegative");
    else if (!(p.sigma2[j] < 2.0 * p.decay_rate(j)))
      add("sigma2_" + s, "sigma2_" + s + " >= 2*beta_" + s +
                             " (requires sigma^2 < 2 beta for finite variances)");
  }
  if (!finite(p.gamma_M) || !(p.gamma_M > 0.0)) add("gamma_M", "gamma_M must be positive");
  if (!finite(p.gamma_C) || !(p.gamma_C > 0.0)) add("gamma_C", "gamma_C must be positive");
  if (!finite(p.nu_control) || p.nu_control < 0.0)
    add("nu_control", "nu_control must be nonnegative");
  if (!finite(p.epsilon) || !(p.epsilon > 0.0 && p.epsilon <= 1.0))
    add("epsilon", "epsilon must lie in (0,1]");
  return report;
}

/// Quasi-invariant scaling: every rate and noise variance is multiplied by
/// epsilon. Scalings compose multiplicatively.
inline ParameterSet scaled(const ParameterSet& p, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("scaling epsilon must lie in (0,1], got " + std::to_string(epsilon));
  ParameterSet out = p;
  for (Population j : kPopulations) {
    out.beta[j] *= epsilon;
    out.sigma2[j] *= epsilon;
  }
  out.gamma_M *= epsilon;
  out.gamma_C *= epsilon;
  out.nu_control *= epsilon;
  out.epsilon *= epsilon;
  return out;
}

/// Means and variances of the four populations at time t.
struct MomentState {
  double t = 0.0;
  PerPopulation<double> mean{};
  PerPopulation<double> variance{};
};

}  // namespace mdkin
