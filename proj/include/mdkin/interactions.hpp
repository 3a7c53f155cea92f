#pragma once

// Microscopic interaction rules. Every update maps nonnegative densities to
// a nonnegative density provided the noise draw respects the positivity
// margin checked by InteractionRules.

#include "mdkin/params.hpp"
#include "mdkin/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mdkin {

namespace rules {

// Unchecked kernels shared by the checked API below and the particle engine.

constexpr double saturation(double x) noexcept { return x / (1.0 + x); }

constexpr double kernel(double x) noexcept { return 1.0 + x; }

/// x' = x - beta Phi(partner) x + eta x
constexpr double loss(double x, double partner, double eta, double beta) noexcept {
  return x - beta * saturation(partner) * x + eta * x;
}

/// x'' = x + beta Phi(mediator) source
constexpr double transfer_gain(double x, double source, double mediator, double beta) noexcept {
  return x + beta * saturation(mediator) * source;
}

/// x' = x - beta x + eta x
constexpr double decay(double x, double eta, double beta) noexcept {
  return x - beta * x + eta * x;
}

/// x'' = x + gamma source - nu x
constexpr double recruitment(double x, double source, double gamma, double nu) noexcept {
  return x + gamma * source - nu * x;
}

}  // namespace rules

namespace detail {

inline void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0)) throw std::domain_error(std::string(what) + " must be nonnegative");
}

inline double checked_result(double v, const char* op) {
  if (!(v >= 0.0))
    throw std::domain_error(std::string(op) + " produced a negative density; the noise draw exceeds the positivity margin");
  return v;
}

}  // namespace detail

/// Phi(x) = x / (1 + x), in [0, 1).
inline double saturation(double x) {
  detail::require_nonnegative(x, "saturation argument");
  return rules::saturation(x);
}

/// Normal cells after an encounter with T cells (loss with noise).
inline double degeneration_update(double x_N, double x_C, double eta, double beta_N) {
  detail::require_nonnegative(x_N, "x_N");
  detail::require_nonnegative(x_C, "x_C");
  return detail::checked_result(rules::loss(x_N, x_C, eta, beta_N), "degeneration_update");
}

/// Damaged cells after an encounter with macrophages (clearance with noise).
inline double clearance_update(double x_D, double x_M, double eta, double beta_D) {
  detail::require_nonnegative(x_D, "x_D");
  detail::require_nonnegative(x_M, "x_M");
  return detail::checked_result(rules::loss(x_D, x_M, eta, beta_D), "clearance_update");
}

/// Normal cells replenished by clearance of damaged cells.
inline double replenish_update(double x_N, double x_D, double x_M, double beta_D) {
  detail::require_nonnegative(x_N, "x_N");
  detail::require_nonnegative(x_D, "x_D");
  detail::require_nonnegative(x_M, "x_M");
  return rules::transfer_gain(x_N, x_D, x_M, beta_D);
}

/// Damaged cells gained from degeneration of normal cells.
inline double damage_gain_update(double x_D, double x_N, double x_C, double beta_N) {
  detail::require_nonnegative(x_D, "x_D");
  detail::require_nonnegative(x_N, "x_N");
  detail::require_nonnegative(x_C, "x_C");
  return rules::transfer_gain(x_D, x_N, x_C, beta_N);
}

/// Natural decay with homeostatic noise (macrophages, T cells).
inline double decay_update(double x, double eta, double beta) {
  detail::require_nonnegative(x, "x");
  return detail::checked_result(rules::decay(x, eta, beta), "decay_update");
}

/// Recruitment proportional to a source population, minus therapy removal.
/// nu_control > 1 would break positivity of the rule and is rejected.
inline double recruitment_update(double x, double source, double gamma, double nu_control) {
  detail::require_nonnegative(x, "x");
  detail::require_nonnegative(source, "source");
  if (nu_control < 0.0 || nu_control > 1.0)
    throw std::domain_error("recruitment_update: nu_control must lie in [0,1]");
  return rules::recruitment(x, source, gamma, nu_control);
}

enum class NoiseLaw { TwoPoint, UniformSymmetric };

/// Largest |eta| the law can produce for a given variance.
inline double max_amplitude(NoiseLaw law, double variance) noexcept {
  return law == NoiseLaw::TwoPoint ? std::sqrt(variance) : std::sqrt(3.0 * variance);
}

/// Standardized draw xi with <xi> = 0 and <xi^2> = 1; eta = xi * sqrt(variance).
/// The two-point law uses a single bit.
template <class Urbg>
double standard_noise(NoiseLaw law, Urbg& rng) {
  const auto bits = static_cast<std::uint64_t>(rng());
  if (law == NoiseLaw::TwoPoint) return (bits & 1u) ? 1.0 : -1.0;
  return std::sqrt(3.0) * (2.0 * uniform01(bits) - 1.0);
}

struct NoiseSpec {
  double sigma2 = 0.0;
  NoiseLaw law = NoiseLaw::TwoPoint;
};

/// One noise draw with mean zero and second moment `variance`.
template <class Urbg>
double sample_noise(const NoiseSpec& spec, double variance, Urbg& rng) {
  if (!(variance >= 0.0)) throw std::invalid_argument("sample_noise: variance must be nonnegative");
  if (variance == 0.0) return 0.0;
  return std::sqrt(variance) * standard_noise(spec.law, rng);
}

/// Parameter set bundled with a noise law, checked once so that every rule
/// applied with draws from that law keeps densities nonnegative. The check
/// uses the worst case Phi = 1: 1 - beta - max|eta| >= 0 for every J, and
/// nu_control <= 1.
class InteractionRules {
 public:
  InteractionRules(const ParameterSet& params, NoiseLaw law) : params_(params), law_(law) {
    for (Population j : kPopulations) {
      const double margin = 1.0 - params.beta[j] - max_amplitude(law, params.sigma2[j]);
      if (margin < 0.0)
        throw std::domain_error("noise law admits negative densities for population " +
                                std::string(name(j)) + ": 1 - beta - max|eta| = " +
                                std::to_string(margin));
    }
    if (params.nu_control > 1.0)
      throw std::domain_error("nu_control > 1 breaks positivity of T-cell recruitment");
  }

  [[nodiscard]] const ParameterSet& params() const noexcept { return params_; }
  [[nodiscard]] NoiseLaw law() const noexcept { return law_; }

  /// Worst-case positivity margin over the four populations.
  [[nodiscard]] double positivity_margin() const noexcept {
    double m = 1.0;
    for (Population j : kPopulations)
      m = std::min(m, 1.0 - params_.beta[j] - max_amplitude(law_, params_.sigma2[j]));
    return m;
  }

 private:
  ParameterSet params_;
  NoiseLaw law_;
};

}  // namespace mdkin
