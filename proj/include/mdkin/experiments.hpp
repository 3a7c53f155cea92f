#pragma once

// Batch experiment drivers. Each run writes CSV tables plus summary.json into
// the configured output directory and returns the same manifest and
// headline numbers in an ExperimentReport.

#include "mdkin/config.hpp"
#include "mdkin/dsmc.hpp"
#include "mdkin/energy_distance.hpp"
#include "mdkin/envelope.hpp"
#include "mdkin/fokker_planck.hpp"
#include "mdkin/inverse_gamma.hpp"
#include "mdkin/moment_odes.hpp"
#include "mdkin/output.hpp"

#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace mdkin {

struct ExperimentReport {
  std::string experiment;
  std::vector<std::string> files;  ///< every file written, summary.json included
  nlohmann::json headline;
};

/// Applies the configured worker count (no effect without OpenMP).
inline void apply_workers(int workers) {
#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#else
  (void)workers;
#endif
}

inline std::vector<std::string> trajectory_header(const std::string& prefix = "") {
  std::vector<std::string> h{"t"};
  for (Population j : kPopulations) h.push_back(prefix + "m_" + std::string(name(j)));
  for (Population j : kPopulations) h.push_back(prefix + "V_" + std::string(name(j)));
  return h;
}

inline std::vector<double> trajectory_row(const MomentState& s) {
  std::vector<double> r{s.t};
  for (Population j : kPopulations) r.push_back(s.mean[j]);
  for (Population j : kPopulations) r.push_back(s.variance[j]);
  return r;
}

inline nlohmann::json per_population_json(const PerPopulation<double>& v) {
  nlohmann::json o = nlohmann::json::object();
  for (Population j : kPopulations) o[std::string(name(j))] = v[j];
  return o;
}

/// Moments at time t by linear interpolation of a time-ordered trajectory.
inline MomentState interpolate_moments(const std::vector<MomentState>& traj, double t) {
  if (traj.empty()) throw std::invalid_argument("interpolate_moments: empty trajectory");
  if (t <= traj.front().t) return traj.front();
  if (t >= traj.back().t) return traj.back();
  const auto it = std::upper_bound(traj.begin(), traj.end(), t,
                                   [](double v, const MomentState& s) { return v < s.t; });
  const MomentState& b = *it;
  const MomentState& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  MomentState s;
  s.t = t;
  for (Population j : kPopulations) {
    s.mean[j] = (1.0 - w) * a.mean[j] + w * b.mean[j];
    s.variance[j] = (1.0 - w) * a.variance[j] + w * b.variance[j];
  }
  return s;
}

/// Writes summary.json and completes the report's manifest.
inline ExperimentReport finish_report(OutputDir& out, std::string experiment, nlohmann::json headline) {
  const auto path = out.claim("summary.json");
  ExperimentReport r{std::move(experiment), out.files(), std::move(headline)};
  nlohmann::json doc;
  doc["experiment"] = r.experiment;
  doc["files"] = r.files;
  doc["headline"] = r.headline;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << doc.dump(2) << '\n';
  return r;
}

// ---------------------------------------------------------------- moments

/// Integrates the moment ODEs and writes the trajectory and phase-plane
/// tables; returns the headline numbers.
inline nlohmann::json write_moments(const RunConfig& config, OutputDir& out) {
  check_config(config);
  const double horizon = config.horizon.value_or(100.0);
  const MomentState initial = config.initial_moments("fig1");
  const auto traj = integrate(initial, config.params, horizon, {config.ode_dt, config.ode_report_interval});
  const double m0 = initial.mean[Population::N] + initial.mean[Population::D];
  const EquilibriumSummary eq = equilibrium(config.params, m0);

  {
    auto csv = out.csv("moments_trajectory.csv", trajectory_header());
    for (const auto& s : traj) csv.row(trajectory_row(s));
  }
  using enum Population;
  struct Plane {
    const char* file;
    const char* label;
    bool variance;
    Population x, y;
  };
  const Plane planes[] = {{"phase_mN_mD.csv", "mN_mD", false, N, D},
                          {"phase_mM_mC.csv", "mM_mC", false, M, C},
                          {"phase_VN_VD.csv", "VN_VD", true, N, D},
                          {"phase_VM_VC.csv", "VM_VC", true, M, C}};
  for (const Plane& pl : planes) {
    const std::string pre = pl.variance ? "V_" : "m_";
    auto csv = out.csv(pl.file, {"t", pre + std::string(name(pl.x)), pre + std::string(name(pl.y))});
    for (const auto& s : traj) {
      const auto& v = pl.variance ? s.variance : s.mean;
      csv.row({s.t, v[pl.x], v[pl.y]});
    }
  }
  {
    auto csv = out.csv("equilibrium_markers.csv", {"plane", "x", "y"});
    for (const Plane& pl : planes) {
      if (pl.variance && !eq.variance) continue;
      const auto& v = pl.variance ? *eq.variance : eq.mean;
      csv.row({pl.label}, {v[pl.x], v[pl.y]});
    }
  }

  double drift = 0.0;
  for (const auto& s : traj) drift = std::max(drift, std::abs(s.mean[N] + s.mean[D] - m0));
  const MomentState& end = traj.back();
  nlohmann::json h;
  h["horizon"] = horizon;
  h["nu_control"] = config.params.nu_control;
  h["terminal_means"] = per_population_json(end.mean);
  h["terminal_variances"] = per_population_json(end.variance);
  h["equilibrium_means"] = per_population_json(eq.mean);
  PerPopulation<double> mean_err;
  for (Population j : kPopulations) mean_err[j] = std::abs(end.mean[j] - eq.mean[j]);
  h["terminal_mean_error"] = per_population_json(mean_err);
  if (eq.variance) {
    h["equilibrium_variances"] = per_population_json(*eq.variance);
    PerPopulation<double> var_err;
    for (Population j : kPopulations) var_err[j] = std::abs(end.variance[j] - (*eq.variance)[j]);
    h["terminal_variance_error"] = per_population_json(var_err);
  }
  h["max_conservation_drift"] = drift;
  return h;
}

inline ExperimentReport run_moments(const RunConfig& config) {
  OutputDir out(config.out_dir);
  nlohmann::json h = write_moments(config, out);
  return finish_report(out, "moments", std::move(h));
}

/// Moments run with therapy switched on (nu_control defaults to 0.1 when the
/// configuration leaves it at zero), plus a controlled/uncontrolled
/// equilibrium table.
inline ExperimentReport run_therapy(RunConfig config) {
  if (config.params.nu_control == 0.0) config.params.nu_control = 0.1;
  OutputDir out(config.out_dir);
  nlohmann::json h = write_moments(config, out);

  ParameterSet plain = config.params;
  plain.nu_control = 0.0;
  const MomentState initial = config.initial_moments("fig1");
  const double m0 = initial.mean[Population::N] + initial.mean[Population::D];
  const EquilibriumSummary off = equilibrium(plain, m0);
  const EquilibriumSummary on = equilibrium(config.params, m0);

  {
    auto csv = out.csv("therapy_equilibria.csv",
                       {"population", "mean_uncontrolled", "mean_controlled", "variance_uncontrolled",
                        "variance_controlled"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Population j : kPopulations)
      csv.row({std::string(name(j))}, {off.mean[j], on.mean[j], off.variance ? (*off.variance)[j] : nan,
                                       on.variance ? (*on.variance)[j] : nan});
  }
  h["uncontrolled_equilibrium_means"] = per_population_json(off.mean);
  h["controlled_equilibrium_means"] = per_population_json(on.mean);
  if (off.variance && on.variance) {
    h["uncontrolled_equilibrium_variances"] = per_population_json(*off.variance);
    h["controlled_equilibrium_variances"] = per_population_json(*on.variance);
  }
  return finish_report(out, "therapy", h);
}

// ---------------------------------------------------------------- consistency

struct ConsistencyResult {
  double epsilon = 0.0;
  std::size_t particles = 0;
  std::vector<MomentState> dsmc;  ///< empirical moments at report times
  std::vector<MomentState> ode;   ///< moment ODE from the ensemble's initial moments
  Histogram histogram;            ///< terminal ensemble
  std::uint64_t steps = 0;
  double min_dt = 0.0;
  PerPopulation<double> max_mean_z{};          ///< max over times of |dsmc - ode| / standard error
  PerPopulation<double> terminal_variance_dev{};  ///< |V_dsmc - V_ode| / V_ode at the horizon
};

/// Seed of the run at scaling epsilon: split from the master seed by the bit
/// pattern of epsilon, so it does not depend on the list order.
inline std::uint64_t consistency_seed(std::uint64_t master, double epsilon) {
  Rng r = split_stream(master, std::bit_cast<std::uint64_t>(epsilon));
  return r();
}

inline ConsistencyResult consistency_run(const RunConfig& config, double epsilon, double horizon) {
  ConsistencyResult r;
  r.epsilon = epsilon;
  r.particles = config.n_particles;
  ParticleEnsemble e = init_ensemble(config.n_particles, config.initial_means("sec41"),
                                     consistency_seed(config.seed, epsilon), config.initial_widths());
  const MomentState initial = estimate_moments(e, 0.0);
  const DsmcRun run = mdkin::run(e, config.params, epsilon, horizon,
                                 {config.dsmc_dt, config.dsmc_report_interval, config.noise_law});
  r.dsmc = run.moments;
  r.steps = run.steps;
  r.min_dt = run.steps ? run.min_dt : 0.0;
  const auto fine = integrate(initial, config.params, horizon, {config.ode_dt, 0.0});
  for (const auto& s : r.dsmc) r.ode.push_back(interpolate_moments(fine, s.t));
  r.histogram = to_histogram(e, config.L, config.histogram_bins);

  const double n = static_cast<double>(config.n_particles);
  for (std::size_t k = 0; k < r.dsmc.size(); ++k)
    for (Population j : kPopulations) {
      const double se = std::sqrt(r.dsmc[k].variance[j] / n);
      const double gap = std::abs(r.dsmc[k].mean[j] - r.ode[k].mean[j]);
      r.max_mean_z[j] = std::max(r.max_mean_z[j], se > 0.0 ? gap / se : (gap > 0.0 ? INFINITY : 0.0));
    }
  for (Population j : kPopulations)
    r.terminal_variance_dev[j] =
        std::abs(r.dsmc.back().variance[j] - r.ode.back().variance[j]) / r.ode.back().variance[j];
  return r;
}

/// True when the largest terminal variance deviation shrinks as epsilon
/// shrinks, over the results given (any order).
inline bool variance_deviation_monotone(std::vector<const ConsistencyResult*> runs) {
  std::sort(runs.begin(), runs.end(), [](auto* a, auto* b) { return a->epsilon > b->epsilon; });
  auto worst = [](const ConsistencyResult* r) {
    return *std::max_element(r->terminal_variance_dev.begin(), r->terminal_variance_dev.end());
  };
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (!(worst(runs[i]) < worst(runs[i - 1]))) return false;
  return true;
}

inline std::string epsilon_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0e", eps);
  std::string s = buf;
  return s;
}

inline ExperimentReport run_consistency(const RunConfig& config) {
  check_config(config);
  apply_workers(config.workers);
  const double horizon = config.horizon.value_or(100.0);
  OutputDir out(config.out_dir);
  std::vector<ConsistencyResult> results;
  std::vector<std::string> tags;
  for (double eps : config.epsilons) {
    const std::string tag = epsilon_tag(eps);
    if (std::find(tags.begin(), tags.end(), tag) != tags.end())
      throw ConfigError("epsilon_list contains " + tag + " twice");
    tags.push_back(tag);
    results.push_back(consistency_run(config, eps, horizon));
    const ConsistencyResult& r = results.back();
    {
      auto csv = out.csv("dsmc_eps" + tag + ".csv", trajectory_header());
      for (const auto& s : r.dsmc) csv.row(trajectory_row(s));
    }
    {
      auto csv = out.csv("ode_eps" + tag + ".csv", trajectory_header());
      for (const auto& s : r.ode) csv.row(trajectory_row(s));
    }
    {
      auto csv = out.csv("histogram_eps" + tag + ".csv", {"x_center", "f_N", "f_D", "f_M", "f_C"});
      const Histogram& hg = r.histogram;
      for (std::size_t i = 0; i < hg.bins; ++i) {
        std::vector<double> row{hg.center(i)};
        for (Population j : kPopulations) row.push_back(hg.density[j][i]);
        csv.row(row);
      }
    }
  }
  nlohmann::json h;
  h["horizon"] = horizon;
  h["n_particles"] = config.n_particles;
  h["seed"] = config.seed;
  h["runs"] = nlohmann::json::array();
  {
    auto csv = out.csv("consistency_summary.csv",
                       {"epsilon", "population", "max_mean_z", "terminal_mean_dsmc", "terminal_mean_ode",
                        "terminal_variance_dsmc", "terminal_variance_ode", "terminal_variance_rel_dev"});
    for (const auto& r : results) {
      for (Population j : kPopulations)
        csv.row({format_number(r.epsilon), std::string(name(j))},
                {r.max_mean_z[j], r.dsmc.back().mean[j], r.ode.back().mean[j], r.dsmc.back().variance[j],
                 r.ode.back().variance[j], r.terminal_variance_dev[j]});
      nlohmann::json run;
      run["epsilon"] = r.epsilon;
      run["steps"] = r.steps;
      run["min_dt"] = r.min_dt;
      run["max_mean_z"] = per_population_json(r.max_mean_z);
      run["terminal_variance_rel_dev"] = per_population_json(r.terminal_variance_dev);
      h["runs"].push_back(run);
    }
  }
  std::vector<const ConsistencyResult*> ptrs;
  for (const auto& r : results) ptrs.push_back(&r);
  h["variance_deviation_monotone_in_epsilon"] = variance_deviation_monotone(ptrs);
  return finish_report(out, "consistency", h);
}

// ---------------------------------------------------------------- mean field

struct MetricSample {
  double t = 0.0;
  Population population = Population::N;
  double p = 0.75;
  double energy = 0.0;  ///< E^p(f_J, f_J^q)
  double norm = 0.0;    ///< c_p E^p
  double gronwall = 0.0;
  double fig5 = 0.0;
};

struct MeanfieldResult {
  CellGrid grid;
  FpRun fp;
  std::vector<MomentState> ode;  ///< moment ODE from the grid's initial moments, at report times
  std::vector<std::pair<double, Densities>> snapshots;
  std::vector<std::pair<double, PerPopulation<double>>> truncated_mass;  ///< f^q mass beyond L
  std::vector<MetricSample> metrics;
  Densities equilibrium;  ///< f^inf projected on the grid
  PerPopulation<double> terminal_l1{};
  /// E(horizon) / E(0) and max(E - envelope), indexed [p index][population].
  std::vector<PerPopulation<double>> energy_ratio, envelope_violation;
  double max_mean_gap = 0.0;  ///< max |grid mean - ODE mean| over report times
};

inline MeanfieldResult meanfield_run(const RunConfig& config, double horizon) {
  const ParameterSet& params = config.params;
  MeanfieldResult r;
  r.grid = config.grid();
  const CellGrid& grid = r.grid;
  const Densities initial =
      uniform_initial_densities(grid, config.initial_means("sec41"), config.initial_widths());

  std::vector<EnergyKernel> kernels;
  for (double p : config.p_values) kernels.emplace_back(grid, p);
  std::vector<double> snap_times = config.snapshot_times;
  std::sort(snap_times.begin(), snap_times.end());
  snap_times.erase(std::unique(snap_times.begin(), snap_times.end()), snap_times.end());
  std::size_t next_snap = 0;
  const double t_tol = 1e-9 * std::max(1.0, horizon);

  // E[k][p][j] at report k
  std::vector<std::vector<PerPopulation<double>>> energy;
  std::vector<double> times;
  auto observer = [&](double t, const Densities& f, const MomentState& m) {
    times.push_back(t);
    energy.emplace_back(kernels.size());
    for (Population j : kPopulations) {
      const auto fq = project_density(grid, quasi_equilibrium(j, m.mean, params));
      for (std::size_t q = 0; q < kernels.size(); ++q) energy.back()[q][j] = kernels[q].distance(f[j], fq);
    }
    while (next_snap < snap_times.size() && snap_times[next_snap] <= t + t_tol) {
      if (snap_times[next_snap] >= t - t_tol) {
        r.snapshots.emplace_back(snap_times[next_snap], f);
        PerPopulation<double> tm;
        for (Population j : kPopulations) tm[j] = quasi_equilibrium(j, m.mean, params).tail_mass(grid.length);
        r.truncated_mass.emplace_back(snap_times[next_snap], tm);
      }
      ++next_snap;
    }
  };
  FpOptions opt;
  opt.grid = grid;
  opt.dt_factor = config.fp_dt_factor;
  opt.report_interval = config.fp_report_interval;
  r.fp = evolve_system(initial, params, horizon, opt, observer);

  const MomentState& start = r.fp.moments.front();
  const auto fine = integrate(start, params, horizon, {config.ode_dt, 0.0});
  for (const auto& s : r.fp.moments) {
    r.ode.push_back(interpolate_moments(fine, s.t));
    for (Population j : kPopulations)
      r.max_mean_gap = std::max(r.max_mean_gap, std::abs(s.mean[j] - r.ode.back().mean[j]));
  }

  const double m0 = start.mean[Population::N] + start.mean[Population::D];
  for (Population j : kPopulations) {
    r.equilibrium[j] = project_density(grid, equilibrium_distribution(j, params, m0));
    r.terminal_l1[j] = l1_distance(grid, r.fp.final[j], r.equilibrium[j]);
  }

  r.energy_ratio.resize(kernels.size());
  r.envelope_violation.resize(kernels.size());
  for (std::size_t q = 0; q < kernels.size(); ++q) {
    const double p = config.p_values[q];
    for (Population j : kPopulations) {
      const double e0 = energy.front()[q][j];
      const DecayEnvelope env = decay_envelope(j, p, fine, params, envelope_y_from_energy(e0, p));
      double worst = -INFINITY;
      for (std::size_t k = 0; k < times.size(); ++k) {
        MetricSample s;
        s.t = times[k];
        s.population = j;
        s.p = p;
        s.energy = energy[k][q][j];
        s.norm = hminus_p_constant(p) * s.energy;
        s.gronwall = env.at(env.gronwall, s.t);
        s.fig5 = env.at(env.fig5, s.t);
        worst = std::max(worst, s.energy - s.gronwall);
        r.metrics.push_back(s);
      }
      r.energy_ratio[q][j] = e0 > 0.0 ? energy.back()[q][j] / e0 : 0.0;
      r.envelope_violation[q][j] = worst;
    }
  }
  return r;
}

inline ExperimentReport run_meanfield(const RunConfig& config) {
  check_config(config);
  const double horizon = config.horizon.value_or(75.0);
  const MeanfieldResult r = meanfield_run(config, horizon);
  const CellGrid& grid = r.grid;

  OutputDir out(config.out_dir);
  {
    auto csv = out.csv("meanfield_moments.csv", trajectory_header());
    for (const auto& s : r.fp.moments) csv.row(trajectory_row(s));
  }
  {
    auto csv = out.csv("meanfield_ode.csv", trajectory_header());
    for (const auto& s : r.ode) csv.row(trajectory_row(s));
  }
  auto density_csv = [&](const std::string& file, const Densities& f) {
    auto csv = out.csv(file, {"x", "f_N", "f_D", "f_M", "f_C"});
    for (std::size_t i = 0; i < grid.cells; ++i) {
      std::vector<double> row{grid.center(i)};
      for (Population j : kPopulations) row.push_back(f[j][i]);
      csv.row(row);
    }
  };
  for (const auto& [t, f] : r.snapshots) density_csv("density_t" + format_number(t) + ".csv", f);
  density_csv("density_equilibrium.csv", r.equilibrium);
  {
    auto csv = out.csv("density_truncated_mass.csv", {"t", "N", "D", "M", "C"});
    for (const auto& [t, m] : r.truncated_mass) csv.row({t, m[Population::N], m[Population::D], m[Population::M], m[Population::C]});
  }
  {
    auto csv = out.csv("metrics.csv",
                       {"t", "population", "p", "E_p", "norm_value", "envelope_gronwall", "envelope_fig5"});
    for (const auto& s : r.metrics)
      csv.row({format_number(s.t), std::string(name(s.population)), format_number(s.p)},
              {s.energy, s.norm, s.gronwall, s.fig5});
  }

  nlohmann::json h;
  h["horizon"] = horizon;
  h["n_x"] = grid.cells;
  h["dt"] = r.fp.dt;
  h["steps"] = r.fp.steps;
  h["fallback_steps"] = r.fp.fallback_steps;
  h["max_mass_error"] = r.fp.max_mass_error;
  h["terminal_means"] = per_population_json(r.fp.moments.back().mean);
  h["terminal_l1_to_equilibrium"] = per_population_json(r.terminal_l1);
  h["max_mean_gap_to_moment_ode"] = r.max_mean_gap;
  double worst = -INFINITY;
  h["energy"] = nlohmann::json::array();
  for (std::size_t q = 0; q < config.p_values.size(); ++q) {
    nlohmann::json e;
    e["p"] = config.p_values[q];
    e["terminal_over_initial"] = per_population_json(r.energy_ratio[q]);
    e["max_envelope_violation"] = per_population_json(r.envelope_violation[q]);
    for (Population j : kPopulations) worst = std::max(worst, r.envelope_violation[q][j]);
    h["energy"].push_back(e);
  }
  h["max_envelope_violation"] = worst;
  std::vector<double> skipped;
  for (double t : config.snapshot_times) {
    bool found = false;
    for (const auto& s : r.snapshots) found = found || s.first == t;
    if (!found) skipped.push_back(t);
  }
  h["skipped_snapshot_times"] = skipped;
  return finish_report(out, "meanfield", h);
}

}  // namespace mdkin
