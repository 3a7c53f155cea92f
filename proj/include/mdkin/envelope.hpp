#pragma once

// Computable decay bounds for the distance between a mean-field density and
// its inverse-Gamma quasi-equilibrium. With z the weighted Fourier distance
// and y = z^{1/(3-2p)}, the differential inequality
//   y' <= -a(t) y + b(t)
// yields the Gronwall envelope
//   y(t) <= [y(0) + int_0^t b(s) e^{A(s)} ds] e^{-A(t)},  A = int a.

#include "mdkin/energy_distance.hpp"
#include "mdkin/inverse_gamma.hpp"
#include "mdkin/moment_odes.hpp"
#include "mdkin/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mdkin {

/// Interpolation constant C_p of the Fourier splitting estimate
/// (about 4.7622 at p = 3/4).
inline double envelope_constant(double p) {
  require_sobolev_exponent(p);
  const double q = 3.0 - 2.0 * p;
  const double r = (p - 0.5) / (2.0 - 2.0 * p);
  return std::pow(2.0 / (2.0 * p - 1.0), (2.0 - 2.0 * p) / q) *
         std::pow(1.0 / (1.0 - p), (2.0 * p - 1.0) / q) *
         (std::pow(r, 2.0 * (2.0 - 2.0 * p) / q) + std::pow(r, (1.0 - 2.0 * p) / q));
}

/// Contraction rate a_J(t) = (2p-1)/(3-2p) (sigma^2 (3-2p)/4 + rate_J) g_J(t).
inline double envelope_rate(Population j, double p, const PerPopulation<double>& m, const ParameterSet& params) {
  const double q = 3.0 - 2.0 * p;
  return (2.0 * p - 1.0) / q * (params.sigma2[j] * q / 4.0 + params.decay_rate(j)) * variance_drive(j, m);
}

/// d omega_J / dt along the mean ODE, by the chain rule.
inline double omega_derivative(Population j, const PerPopulation<double>& m, const ParameterSet& params) {
  using enum Population;
  const Rates dm = means_rhs(m, params);
  const double omega = quasi_equilibrium(j, m, params).omega;
  switch (j) {
    case N: return omega * (dm[M] / m[M] + dm[D] / m[D] - dm[C] / m[C]);
    case D: return omega * (dm[N] / m[N] + dm[C] / m[C] - dm[M] / m[M]);
    case M: return 2.0 * params.gamma_M / params.sigma2[M] * dm[D];
    case C: return 2.0 * params.gamma_C / params.sigma2[C] * dm[M];
  }
  return 0.0;
}

/// y-variable corresponding to an energy distance: (c_p E)^{1/(3-2p)}.
inline double envelope_y_from_energy(double energy, double p) {
  return std::pow(hminus_p_constant(p) * energy, 1.0 / (3.0 - 2.0 * p));
}

/// Energy distance corresponding to a y-variable: y^{3-2p} / c_p.
inline double envelope_energy_from_y(double y, double p) {
  return std::pow(y, 3.0 - 2.0 * p) / hminus_p_constant(p);
}

struct DecayEnvelope {
  Population population = Population::N;
  double p = 0.75;
  double c_p = 0.0;  ///< envelope_constant(p)
  double M = 0.0;    ///< max of m_J + m_J^q over the trajectory
  double D = 0.0;    ///< max of 2 nu_J / omega_J over the trajectory
  std::vector<double> t;
  std::vector<double> a, b;
  std::vector<double> a_integral;  ///< A(t)
  std::vector<double> gronwall_y;  ///< envelope for y
  std::vector<double> gronwall;    ///< the same bound in energy-distance units
  std::vector<double> fig5;        ///< exp(-(3-2p) A(t)) - 1, as printed

  /// Linear interpolation of a column at time s (clamped to the range).
  [[nodiscard]] double at(const std::vector<double>& column, double s) const {
    if (t.empty()) throw std::logic_error("DecayEnvelope::at: empty envelope");
    if (s <= t.front()) return column.front();
    if (s >= t.back()) return column.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double w = (s - t[k - 1]) / (t[k] - t[k - 1]);
    return (1.0 - w) * column[k - 1] + w * column[k];
  }
};

/// Gronwall envelope for population j along a moment trajectory, starting
/// from y0 (use envelope_y_from_energy on the initial distance). Integrals
/// use the trapezoidal rule on the trajectory's time grid, so the grid
/// should be fine compared with the variation of the means.
inline DecayEnvelope decay_envelope(Population j, double p, const std::vector<MomentState>& traj,
                                    const ParameterSet& params, double y0) {
  require_sobolev_exponent(p);
  if (traj.empty()) throw std::invalid_argument("decay_envelope: empty trajectory");
  if (!(y0 >= 0.0)) throw std::invalid_argument("decay_envelope: y0 must be nonnegative");
  const double q = 3.0 - 2.0 * p;
  DecayEnvelope env;
  env.population = j;
  env.p = p;
  env.c_p = envelope_constant(p);
  const std::size_t n = traj.size();
  std::vector<double> domega(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& m = traj[k].mean;
    const InverseGammaSpec qe = quasi_equilibrium(j, m, params);
    env.M = std::max(env.M, m[j] + qe.mean());
    env.D = std::max(env.D, 2.0 * qe.nu / qe.omega);
    domega[k] = std::abs(omega_derivative(j, m, params));
    env.t.push_back(traj[k].t);
    env.a.push_back(envelope_rate(j, p, m, params));
  }
  for (std::size_t k = 0; k < n; ++k) env.b.push_back(env.c_p * env.M * env.D * domega[k] / q);

  env.a_integral.assign(n, 0.0);
  env.gronwall_y.assign(n, y0);
  for (std::size_t k = 1; k < n; ++k) {
    const double h = env.t[k] - env.t[k - 1];
    const double dA = 0.5 * h * (env.a[k] + env.a[k - 1]);
    env.a_integral[k] = env.a_integral[k - 1] + dA;
    const double decay = std::exp(-dA);
    env.gronwall_y[k] = env.gronwall_y[k - 1] * decay + 0.5 * h * (env.b[k - 1] * decay + env.b[k]);
  }
  for (std::size_t k = 0; k < n; ++k) {
    env.gronwall.push_back(envelope_energy_from_y(env.gronwall_y[k], p));
    env.fig5.push_back(std::exp(-q * env.a_integral[k]) - 1.0);
  }
  return env;
}

}  // namespace mdkin
