#pragma once

// Inverse-Gamma quasi-equilibria of the mean-field Fokker-Planck equations.

#include "mdkin/moment_odes.hpp"
#include "mdkin/params.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mdkin {

/// Inverse-Gamma law with shape nu and scale omega:
/// f(x) = omega^nu / Gamma(nu) x^{-(nu+1)} exp(-omega / x) on (0, inf).
struct InverseGammaSpec {
  double nu = 0.0;
  double omega = 0.0;

  /// omega / (nu - 1); NaN when nu <= 1.
  [[nodiscard]] double mean() const noexcept {
    return nu > 1.0 ? omega / (nu - 1.0) : std::numeric_limits<double>::quiet_NaN();
  }
  /// omega^2 / ((nu - 1)^2 (nu - 2)); NaN when nu <= 2.
  [[nodiscard]] double variance() const noexcept {
    return nu > 2.0 ? omega * omega / ((nu - 1.0) * (nu - 1.0) * (nu - 2.0))
                    : std::numeric_limits<double>::quiet_NaN();
  }
  [[nodiscard]] double mode() const noexcept { return omega / (nu + 1.0); }

  /// log f(x) for x > 0, -inf otherwise.
  [[nodiscard]] double log_pdf(double x) const {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return nu * std::log(omega) - std::lgamma(nu) - (nu + 1.0) * std::log(x) - omega / x;
  }
  /// Density, evaluated in log space (nu = 41 overflows the direct form).
  /// Zero outside the support.
  [[nodiscard]] double pdf(double x) const {
    if (!(x > 0.0)) return 0.0;
    return std::exp(log_pdf(x));
  }
  /// d/dx log f(x) = -(nu + 1)/x + omega/x^2.
  [[nodiscard]] double log_pdf_derivative(double x) const noexcept {
    return -(nu + 1.0) / x + omega / (x * x);
  }
  /// P(X <= x) = Q(nu, omega / x).
  [[nodiscard]] double cdf(double x) const {
    if (!(x > 0.0)) return 0.0;
    return boost::math::gamma_q(nu, omega / x);
  }
  /// P(X > x); the mass a truncated domain [0, x] misses.
  [[nodiscard]] double tail_mass(double x) const {
    if (!(x > 0.0)) return 1.0;
    return boost::math::gamma_p(nu, omega / x);
  }
};

/// Shape nu_J = 1 + 2 rate_J / sigma_J^2, with rate_C = beta_C + nu_control.
inline double quasi_equilibrium_shape(Population j, const ParameterSet& p) {
  if (!(p.sigma2[j] > 0.0))
    throw std::domain_error("quasi-equilibrium of population " + std::string(name(j)) +
                            " is degenerate when sigma^2 = 0");
  return 1.0 + 2.0 * p.decay_rate(j) / p.sigma2[j];
}

/// Inverse-Gamma quasi-equilibrium of population j for the current means.
inline InverseGammaSpec quasi_equilibrium(Population j, const PerPopulation<double>& m,
                                          const ParameterSet& p) {
  using enum Population;
  const double nu = quasi_equilibrium_shape(j, p);
  auto need_positive = [&](Population k) {
    if (!(m[k] > 0.0))
      throw std::domain_error("quasi_equilibrium(" + std::string(name(j)) + "): mean of " +
                              std::string(name(k)) + " must be positive");
  };
  double omega = 0.0;
  switch (j) {
    case N:
      need_positive(C);
      omega = 2.0 * p.beta[D] * m[M] * m[D] / (p.sigma2[N] * m[C]);
      break;
    case D:
      need_positive(M);
      omega = 2.0 * p.beta[N] * m[N] * m[C] / (p.sigma2[D] * m[M]);
      break;
    case M: omega = 2.0 * p.gamma_M / p.sigma2[M] * m[D]; break;
    case C: omega = 2.0 * p.gamma_C / p.sigma2[C] * m[M]; break;
  }
  if (!(omega > 0.0))
    throw std::domain_error("quasi_equilibrium(" + std::string(name(j)) +
                            "): driving means give a nonpositive scale");
  return {nu, omega};
}

inline InverseGammaSpec quasi_equilibrium(Population j, const MomentState& s, const ParameterSet& p) {
  return quasi_equilibrium(j, s.mean, p);
}

/// Equilibrium law f_J^inf for conserved mass m0 = m_N + m_D.
inline InverseGammaSpec equilibrium_distribution(Population j, const ParameterSet& p, double m0) {
  return quasi_equilibrium(j, equilibrium(p, m0).mean, p);
}

/// Drift/diffusion coefficients of one population's Fokker-Planck equation
///   df/dt = d/dx[(lambda x - mu) f] + kappa/2 d^2/dx^2 (x^2 f).
struct DriftDiffusion {
  double lambda = 0.0;  ///< linear drift rate
  double mu = 0.0;      ///< constant inflow drift
  double kappa = 0.0;   ///< diffusion scale, >= 0
};

inline DriftDiffusion drift_diffusion(Population j, const PerPopulation<double>& m,
                                      const ParameterSet& p) {
  using enum Population;
  switch (j) {
    case N: return {p.beta[N] * m[C], p.beta[D] * m[M] * m[D], p.sigma2[N] * m[C]};
    case D: return {p.beta[D] * m[M], p.beta[N] * m[N] * m[C], p.sigma2[D] * m[M]};
    case M: return {p.beta[M], p.gamma_M * m[D], p.sigma2[M]};
    case C: return {p.decay_rate(C), p.gamma_C * m[M], p.sigma2[C]};
  }
  return {};
}

/// Inverse-Gamma steady state of a frozen-coefficient equation:
/// nu = 1 + 2 lambda / kappa, omega = 2 mu / kappa.
inline InverseGammaSpec stationary_law(const DriftDiffusion& c) {
  if (!(c.kappa > 0.0)) throw std::domain_error("stationary_law: kappa must be positive");
  return {1.0 + 2.0 * c.lambda / c.kappa, 2.0 * c.mu / c.kappa};
}

/// Zero-flux stationary residual (lambda x - mu) f + kappa/2 d/dx (x^2 f),
/// with the derivative taken analytically.
inline double stationary_residual(const InverseGammaSpec& law, const DriftDiffusion& c, double x) {
  const double f = law.pdf(x);
  const double d_x2f = f * (2.0 * x + x * x * law.log_pdf_derivative(x));
  return (c.lambda * x - c.mu) * f + 0.5 * c.kappa * d_x2f;
}

}  // namespace mdkin
