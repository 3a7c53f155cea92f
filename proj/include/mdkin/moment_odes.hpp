#pragma once

// Closed moment systems: the mean equations (shared by the kinetic and the
// mean-field model) and the mean-field variance equations.

#include "mdkin/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdkin {

using Rates = PerPopulation<double>;

/// d/dt of the means. The first two components are exact negatives of each
/// other, which is what conserves m_N + m_D.
inline Rates means_rhs(const PerPopulation<double>& m, const ParameterSet& p) {
  using enum Population;
  const double damage = p.beta[N] * m[N] * m[C];
  const double repair = p.beta[D] * m[M] * m[D];
  Rates r;
  r[N] = -damage + repair;
  r[D] = -repair + damage;
  r[M] = -p.beta[M] * m[M] + p.gamma_M * m[D];
  r[C] = -p.decay_rate(C) * m[C] + p.gamma_C * m[M];
  return r;
}

/// Rate factor g_J multiplying the variance relaxation: m_C for N, m_M for D, 1 otherwise.
inline double variance_drive(Population j, const PerPopulation<double>& m) noexcept {
  switch (j) {
    case Population::N: return m[Population::C];
    case Population::D: return m[Population::M];
    default: return 1.0;
  }
}

inline void require_finite_variances(const ParameterSet& p, const char* op) {
  if (!p.variances_finite())
    throw std::domain_error(std::string(op) + ": requires sigma_J^2 < 2 beta_J for every population");
}

/// d/dt of the mean-field variances. With therapy the C equation uses
/// beta_C + nu in place of beta_C (extension of the controlled C dynamics).
inline Rates variances_rhs(const MomentState& s, const ParameterSet& p) {
  require_finite_variances(p, "variances_rhs");
  Rates r;
  for (Population j : kPopulations) {
    const double gap = 2.0 * p.decay_rate(j) - p.sigma2[j];
    const double target = p.sigma2[j] * s.mean[j] * s.mean[j] / gap;
    r[j] = -gap * variance_drive(j, s.mean) * (s.variance[j] - target);
  }
  return r;
}

struct IntegrationOptions {
  double dt = 1e-2;
  /// Spacing of reported states; must be a multiple of dt up to rounding.
  /// Zero reports every step.
  double report_interval = 0.0;
};

namespace detail {

struct MomentDerivative {
  Rates dm;
  Rates dv;
};

inline MomentDerivative moment_derivative(const MomentState& s, const ParameterSet& p) {
  return {means_rhs(s.mean, p), variances_rhs(s, p)};
}

inline MomentState axpy(const MomentState& s, double h, const MomentDerivative& k) {
  MomentState out = s;
  for (Population j : kPopulations) {
    out.mean[j] += h * k.dm[j];
    out.variance[j] += h * k.dv[j];
  }
  return out;
}

/// Number of steps of size about `dt` that exactly tile `span`.
inline long tiling_steps(double span, double dt) {
  return std::max(1L, static_cast<long>(std::ceil(span / dt - 1e-9)));
}

}  // namespace detail

/// One classical RK4 step of the coupled mean/variance system.
inline MomentState rk4_step(const MomentState& s, const ParameterSet& p, double h) {
  using detail::axpy;
  const auto k1 = detail::moment_derivative(s, p);
  const auto k2 = detail::moment_derivative(axpy(s, 0.5 * h, k1), p);
  const auto k3 = detail::moment_derivative(axpy(s, 0.5 * h, k2), p);
  const auto k4 = detail::moment_derivative(axpy(s, h, k3), p);
  MomentState out = s;
  for (Population j : kPopulations) {
    out.mean[j] += h / 6.0 * (k1.dm[j] + 2.0 * k2.dm[j] + 2.0 * k3.dm[j] + k4.dm[j]);
    out.variance[j] += h / 6.0 * (k1.dv[j] + 2.0 * k2.dv[j] + 2.0 * k3.dv[j] + k4.dv[j]);
  }
  out.t = s.t + h;
  return out;
}

/// Fixed-step RK4 from `initial` to initial.t + horizon. The returned
/// trajectory starts with the initial state and contains every report time.
/// Throws if a mean becomes nonpositive (step too large).
inline std::vector<MomentState> integrate(const MomentState& initial, const ParameterSet& p,
                                          double horizon, const IntegrationOptions& opt = {}) {
  if (!(opt.dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (!(horizon >= 0.0)) throw std::invalid_argument("integrate: horizon must be nonnegative");
  require_finite_variances(p, "integrate");
  for (Population j : kPopulations)
    if (!(initial.mean[j] > 0.0)) throw std::invalid_argument("integrate: initial means must be positive");

  std::vector<MomentState> out{initial};
  if (horizon == 0.0) return out;

  const double report = opt.report_interval > 0.0 ? std::min(opt.report_interval, horizon) : 0.0;
  const long segments = report > 0.0 ? detail::tiling_steps(horizon, report) : 1;
  const double seg_len = horizon / static_cast<double>(segments);
  const long per_seg = detail::tiling_steps(seg_len, opt.dt);
  const double h = seg_len / static_cast<double>(per_seg);

  MomentState s = initial;
  for (long seg = 0; seg < segments; ++seg) {
    for (long k = 0; k < per_seg; ++k) {
      s = rk4_step(s, p, h);
      for (Population j : kPopulations)
        if (!(s.mean[j] > 0.0))
          throw std::runtime_error("integrate: mean of population " + std::string(name(j)) +
                                   " became nonpositive at t=" + std::to_string(s.t) +
                                   "; reduce dt");
      if (report == 0.0) out.push_back(s);
    }
    s.t = initial.t + seg_len * static_cast<double>(seg + 1);
    if (report > 0.0) out.push_back(s);
  }
  return out;
}

struct EquilibriumSummary {
  PerPopulation<double> mean{};
  std::optional<PerPopulation<double>> variance;  ///< absent unless sigma^2 < 2 beta
  bool valid_variances = false;
};

/// Closed-form equilibrium reached from any state with m_N + m_D = m0.
/// With therapy, beta_C is replaced by beta_C + nu_control throughout.
inline EquilibriumSummary equilibrium(const ParameterSet& p, double m0) {
  using enum Population;
  if (!(m0 > 0.0)) throw std::invalid_argument("equilibrium: conserved mass m0 must be positive");
  const double bc = p.decay_rate(C);
  EquilibriumSummary e;
  e.mean[N] = p.beta[D] * bc * m0 / (p.beta[D] * bc + p.beta[N] * p.gamma_C);
  e.mean[D] = m0 - e.mean[N];
  e.mean[M] = p.gamma_M / p.beta[M] * e.mean[D];
  e.mean[C] = p.gamma_C * e.mean[M] / bc;
  e.valid_variances = p.variances_finite();
  if (e.valid_variances) {
    PerPopulation<double> v;
    for (Population j : kPopulations)
      v[j] = p.sigma2[j] / (2.0 * p.decay_rate(j) - p.sigma2[j]) * e.mean[j] * e.mean[j];
    e.variance = v;
  }
  return e;
}

}  // namespace mdkin
