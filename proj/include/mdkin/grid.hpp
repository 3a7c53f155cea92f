#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mdkin {

/// Uniform cell-centred grid on [0, L]: n cells of width L/n, centres at
/// (i + 1/2) L/n. No centre sits on x = 0, where the diffusion degenerates.
struct CellGrid {
  double length = 12.0;
  std::size_t cells = 801;

  CellGrid() = default;
  CellGrid(double L, std::size_t n) : length(L), cells(n) {
    if (!(L > 0.0)) throw std::invalid_argument("CellGrid: length must be positive");
    if (n < 2) throw std::invalid_argument("CellGrid: need at least two cells");
  }

  [[nodiscard]] double dx() const noexcept { return length / static_cast<double>(cells); }
  [[nodiscard]] double center(std::size_t i) const noexcept {
    return (static_cast<double>(i) + 0.5) * dx();
  }
  /// Right edge of cell i (interface i + 1/2).
  [[nodiscard]] double interface(std::size_t i) const noexcept {
    return static_cast<double>(i + 1) * dx();
  }

  friend bool operator==(const CellGrid&, const CellGrid&) = default;
};

/// Midpoint-rule integral of x^k f(x).
inline double grid_moment(const CellGrid& g, std::span<const double> f, int k) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::pow(g.center(i), k) * f[i];
  return s * g.dx();
}

inline double grid_mass(const CellGrid& g, std::span<const double> f) {
  double s = 0.0;
  for (double v : f) s += v;
  return s * g.dx();
}

inline double grid_mean(const CellGrid& g, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += g.center(i) * f[i];
  return s * g.dx();
}

/// Central second moment about the grid mean.
inline double grid_variance(const CellGrid& g, std::span<const double> f) {
  const double m = grid_mean(g, f);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = g.center(i) - m;
    s += d * d * f[i];
  }
  return s * g.dx();
}

inline double l1_distance(const CellGrid& g, std::span<const double> f, std::span<const double> h) {
  if (f.size() != h.size()) throw std::invalid_argument("l1_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::abs(f[i] - h[i]);
  return s * g.dx();
}

inline double sup_distance(std::span<const double> f, std::span<const double> h) {
  if (f.size() != h.size()) throw std::invalid_argument("sup_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s = std::max(s, std::abs(f[i] - h[i]));
  return s;
}

}  // namespace mdkin
