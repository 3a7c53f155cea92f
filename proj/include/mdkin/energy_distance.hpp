#pragma once

// Energy distance E^p(f, g) with kernel |x - y|^(2p - 1), 1/2 < p < 1, and
// the equivalent homogeneous negative Sobolev quantity.

#include "mdkin/grid.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdkin {

inline void require_sobolev_exponent(double p) {
  if (!(p > 0.5 && p < 1.0))
    throw std::invalid_argument("energy distance exponent p must lie in (1/2, 1), got " + std::to_string(p));
}

/// Constant c_p with  int |xi|^{-2p} |f^ - g^|^2 dxi = c_p E^p(f, g):
/// c_p = sqrt(2)/(2p - 1) * Gamma(3/2 - p) / (2^{2p-1} Gamma(p)). Equals 2 at p = 3/4.
inline double hminus_p_constant(double p) {
  require_sobolev_exponent(p);
  return std::sqrt(2.0) / (2.0 * p - 1.0) * std::tgamma(1.5 - p) /
         (std::pow(2.0, 2.0 * p - 1.0) * std::tgamma(p));
}

/// Exact pair integrals of |x - y|^a between cells of a uniform grid, for
/// densities that are constant on each cell. weight(k) is the integral over
/// two cells k apart.
class EnergyKernel {
 public:
  EnergyKernel(const CellGrid& grid, double p) : grid_(grid), p_(p) {
    require_sobolev_exponent(p);
    const double a = 2.0 * p - 1.0;
    const double b = a + 2.0;
    const double scale = std::pow(grid.dx(), b) / ((a + 1.0) * (a + 2.0));
    weights_.resize(grid.cells);
    weights_[0] = 2.0 * scale;
    for (std::size_t k = 1; k < grid.cells; ++k) {
      // (k+1)^b - 2 k^b + (k-1)^b without the k^2-fold cancellation
      const double kd = static_cast<double>(k);
      const double up = std::expm1(b * std::log1p(1.0 / kd));
      const double down = std::expm1(b * std::log1p(-1.0 / kd));
      weights_[k] = scale * std::pow(kd, b) * (up + down);
    }
  }

  [[nodiscard]] const CellGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] double p() const noexcept { return p_; }
  [[nodiscard]] double weight(std::size_t k) const { return weights_.at(k); }

  /// E^p(f, g) = -sum_ij (f - g)_i (f - g)_j w_|i-j|. Roundoff-level
  /// negatives are clamped to zero.
  [[nodiscard]] double distance(std::span<const double> f, std::span<const double> g) const {
    const std::size_t n = grid_.cells;
    if (f.size() != n || g.size() != n)
      throw std::invalid_argument("EnergyKernel::distance: densities must live on the kernel grid");
    diff_.resize(n);
    for (std::size_t i = 0; i < n; ++i) diff_[i] = f[i] - g[i];
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag += diff_[i] * diff_[i];
    double off = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      double s = 0.0;
      const double* h = diff_.data();
      for (std::size_t i = 0; i + k < n; ++i) s += h[i] * h[i + k];
      off += weights_[k] * s;
    }
    return std::max(0.0, -(weights_[0] * diag + 2.0 * off));
  }

 private:
  CellGrid grid_;
  double p_;
  std::vector<double> weights_;
  mutable std::vector<double> diff_;
};

/// Energy distance between two unit-mass grid densities.
inline double energy_distance(const CellGrid& grid, std::span<const double> f,
                              std::span<const double> g, double p) {
  return EnergyKernel(grid, p).distance(f, g);
}

enum class SampleEstimator {
  V,  ///< plug-in: empirical measures, diagonal pairs included
  U   ///< unbiased: within-sample averages exclude i == j
};

/// Energy distance between two sample sets, O(n m + n^2 + m^2).
inline double energy_distance(std::span<const double> x, std::span<const double> y, double p,
                              SampleEstimator est = SampleEstimator::V) {
  require_sobolev_exponent(p);
  if (x.empty() || y.empty()) throw std::invalid_argument("energy_distance: empty sample set");
  const double a = 2.0 * p - 1.0;
  auto cross = [&](std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (double ui : u)
      for (double vj : v) s += std::pow(std::abs(ui - vj), a);
    return s;
  };
  auto within = [&](std::span<const double> u) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = i + 1; j < u.size(); ++j) s += std::pow(std::abs(u[i] - u[j]), a);
    const double nd = static_cast<double>(u.size());
    if (est == SampleEstimator::V) return 2.0 * s / (nd * nd);
    return u.size() > 1 ? 2.0 * s / (nd * (nd - 1.0)) : 0.0;
  };
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  return 2.0 * cross(x, y) / (nx * ny) - within(x) - within(y);
}

/// int |xi|^{-2p} |f^ - g^|^2 dxi through the energy-distance identity.
inline double hminus_p_norm(const CellGrid& grid, std::span<const double> f,
                            std::span<const double> g, double p) {
  return hminus_p_constant(p) * energy_distance(grid, f, g, p);
}

}  // namespace mdkin
