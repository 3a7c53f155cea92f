#pragma once

// Finite-volume solver for the four coupled mean-field Fokker-Planck
// equations with zero-flux boundaries. Each equation is written as
//   df/dt = d/dx [ B f + D df/dx ],  B = (lambda + kappa) x - mu,  D = kappa x^2 / 2,
// and the interface flux uses the Chang-Cooper weighting with the exact
// integral of B/D between neighbouring centres, so the discrete steady state
// is the inverse-Gamma density sampled at the cell centres.

#include "mdkin/grid.hpp"
#include "mdkin/inverse_gamma.hpp"
#include "mdkin/moment_odes.hpp"
#include "mdkin/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdkin {

/// z / (e^z - 1), continuous at 0.
inline double bernoulli(double z) noexcept {
  if (std::abs(z) < 1e-4) return 1.0 - 0.5 * z + z * z / 12.0;
  return z / std::expm1(z);
}

/// delta(l) = 1/l + 1/(1 - e^l): weight of the left value in the interface
/// reconstruction. Tends to 1/2 as l -> 0.
inline double upwind_fraction(double lambda_hat) noexcept {
  const double l = lambda_hat;
  if (std::abs(l) < 1e-3) return 0.5 - l / 12.0 + l * l * l / 720.0;
  return 1.0 / l - 1.0 / std::expm1(l);
}

/// Flux through one interface, F = right * f_R - left * f_L, equivalently
/// F = advective [(1 - delta) f_R + delta f_L] + diffusive (f_R - f_L).
struct InterfaceFlux {
  double lambda_hat = 0.0;
  double delta = 0.5;
  double advective = 0.0;
  double diffusive = 0.0;
  double right = 0.0;
  double left = 0.0;
};

/// Exact integral of B/D between x_l and x_r (both > 0).
inline double drift_integral(const DriftDiffusion& c, double x_l, double x_r) {
  const double dx = x_r - x_l;
  return 2.0 * (c.lambda + c.kappa) / c.kappa * std::log1p(dx / x_l) -
         2.0 * c.mu / c.kappa * dx / (x_l * x_r);
}

/// Interface weights for the interface at `x` between centres x -/+ dx/2.
/// kappa = 0 falls back to first-order upwinding.
inline InterfaceFlux flux_coefficients(const DriftDiffusion& c, double x, double dx) {
  if (!(dx > 0.0)) throw std::invalid_argument("flux_coefficients: dx must be positive");
  if (!(x - 0.5 * dx > 0.0))
    throw std::invalid_argument("flux_coefficients: both neighbouring centres must lie in x > 0");
  if (c.kappa < 0.0) throw std::invalid_argument("flux_coefficients: kappa must be nonnegative");
  InterfaceFlux w;
  if (c.kappa == 0.0) {
    const double b = c.lambda * x - c.mu;
    w.advective = b;
    w.delta = b > 0.0 ? 0.0 : 1.0;
    w.lambda_hat = b > 0.0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    w.right = std::max(b, 0.0);
    w.left = std::max(-b, 0.0);
    return w;
  }
  const double d = 0.5 * c.kappa * x * x;
  w.lambda_hat = drift_integral(c, x - 0.5 * dx, x + 0.5 * dx);
  w.delta = upwind_fraction(w.lambda_hat);
  w.diffusive = d / dx;
  w.advective = w.diffusive * w.lambda_hat;
  w.right = w.diffusive * bernoulli(-w.lambda_hat);
  w.left = w.diffusive * bernoulli(w.lambda_hat);
  return w;
}

/// Tridiagonal generator A of df/dt = A f on a cell grid with zero flux at
/// both ends. Off-diagonals are nonnegative and every column sums to zero.
struct FpOperator {
  std::vector<double> lower;  ///< lower[i] = A(i, i-1), lower[0] unused
  std::vector<double> diag;
  std::vector<double> upper;  ///< upper[i] = A(i, i+1), upper[n-1] unused

  FpOperator(const CellGrid& grid, const DriftDiffusion& c)
      : lower(grid.cells, 0.0), diag(grid.cells, 0.0), upper(grid.cells, 0.0) {
    const std::size_t n = grid.cells;
    const double dx = grid.dx();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const InterfaceFlux w = flux_coefficients(c, grid.interface(i), dx);
      // F_{i+1/2} enters cell i with + and cell i+1 with -
      upper[i] += w.right / dx;
      diag[i] -= w.left / dx;
      diag[i + 1] -= w.right / dx;
      lower[i + 1] += w.left / dx;
    }
  }

  [[nodiscard]] std::vector<double> apply(std::span<const double> f) const {
    const std::size_t n = diag.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * f[i];
      if (i > 0) s += lower[i] * f[i - 1];
      if (i + 1 < n) s += upper[i] * f[i + 1];
      out[i] = s;
    }
    return out;
  }

  /// Solves (alpha I - beta A) x = rhs by the Thomas algorithm; the matrix is
  /// a column-diagonally-dominant M-matrix, so no pivoting is needed.
  [[nodiscard]] std::vector<double> solve_shifted(double alpha, double beta,
                                                  std::span<const double> rhs) const {
    const std::size_t n = diag.size();
    if (rhs.size() != n) throw std::invalid_argument("FpOperator: size mismatch");
    std::vector<double> c(n), x(n);
    double denom = alpha - beta * diag[0];
    if (!(denom > 0.0)) throw std::runtime_error("FpOperator: singular tridiagonal system");
    c[0] = -beta * upper[0] / denom;
    x[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
      const double a = -beta * lower[i];
      denom = alpha - beta * diag[i] - a * c[i - 1];
      if (!(denom > 0.0)) throw std::runtime_error("FpOperator: singular tridiagonal system");
      c[i] = i + 1 < n ? -beta * upper[i] / denom : 0.0;
      x[i] = (rhs[i] - a * x[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
  }
};

/// Inverse-Gamma pdf at the cell centres, renormalized to unit grid mass.
inline std::vector<double> project_density(const CellGrid& grid, const InverseGammaSpec& law) {
  std::vector<double> f(grid.cells);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.cells; ++i) {
    f[i] = law.log_pdf(grid.center(i));
    top = std::max(top, f[i]);
  }
  for (double& v : f) v = std::exp(v - top);
  const double mass = grid_mass(grid, f);
  for (double& v : f) v /= mass;
  return f;
}

/// Grid density proportional to the stationary law at the cell centres,
/// normalized to unit midpoint mass. This is the exact discrete steady state.
inline std::vector<double> discrete_equilibrium(const CellGrid& grid, const DriftDiffusion& c) {
  return project_density(grid, stationary_law(c));
}

/// Inverse-Gamma pdf at the cell centres without renormalization.
inline std::vector<double> sample_density(const CellGrid& grid, const InverseGammaSpec& law) {
  std::vector<double> f(grid.cells);
  for (std::size_t i = 0; i < grid.cells; ++i) f[i] = law.pdf(grid.center(i));
  return f;
}

/// Cell averages of the uniform density of unit mass on
/// [mean - width/2, mean + width/2], clipped at 0 and renormalized.
inline std::vector<double> uniform_initial_density(const CellGrid& grid, double mean, double width) {
  if (!(mean > 0.0)) throw std::invalid_argument("uniform_initial_density: mean must be positive");
  if (!(width > 0.0)) throw std::invalid_argument("uniform_initial_density: width must be positive");
  const double a = std::max(0.0, mean - 0.5 * width);
  const double b = mean + 0.5 * width;
  if (b > grid.length) throw std::invalid_argument("uniform_initial_density: support exceeds the grid");
  const double dx = grid.dx();
  std::vector<double> f(grid.cells, 0.0);
  for (std::size_t i = 0; i < grid.cells; ++i) {
    const double lo = std::max(a, static_cast<double>(i) * dx);
    const double hi = std::min(b, static_cast<double>(i + 1) * dx);
    if (hi > lo) f[i] = (hi - lo) / (dx * (b - a));
  }
  return f;
}

/// One backward-Euler step of a single population with frozen coefficients.
/// Unconditionally positive and mass conserving.
inline std::vector<double> step_population(const CellGrid& grid, std::span<const double> f,
                                           const DriftDiffusion& c, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_population: dt must be positive");
  return FpOperator(grid, c).solve_shifted(1.0, dt, f);
}

/// One BDF2 step with frozen coefficients: 3 f^{n+1} - 2 dt A f^{n+1} = 4 f^n - f^{n-1}.
/// Not positivity preserving in general; evolve_system falls back to
/// backward Euler when it is not.
inline std::vector<double> bdf2_step_population(const CellGrid& grid, std::span<const double> f,
                                                std::span<const double> f_prev, const DriftDiffusion& c,
                                                double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("bdf2_step_population: dt must be positive");
  if (f.size() != grid.cells || f_prev.size() != grid.cells)
    throw std::invalid_argument("bdf2_step_population: density size does not match grid");
  std::vector<double> rhs(grid.cells);
  for (std::size_t i = 0; i < grid.cells; ++i) rhs[i] = 4.0 * f[i] - f_prev[i];
  return FpOperator(grid, c).solve_shifted(3.0, 2.0 * dt, rhs);
}

using Densities = PerPopulation<std::vector<double>>;

inline MomentState grid_moments(const CellGrid& grid, const Densities& f, double t) {
  MomentState s;
  s.t = t;
  for (Population j : kPopulations) {
    s.mean[j] = grid_mean(grid, f[j]);
    s.variance[j] = grid_variance(grid, f[j]);
  }
  return s;
}

enum class FpTimeScheme {
  BackwardEuler,
  /// Second-order BDF with the coefficients evaluated at linearly
  /// extrapolated means; a step that would produce a negative value is
  /// redone with backward Euler.
  Bdf2
};

struct FpOptions {
  CellGrid grid{};
  double dt_factor = 0.5;  ///< dt = dt_factor * dx, shrunk to tile the report interval
  double report_interval = 0.25;
  FpTimeScheme scheme = FpTimeScheme::Bdf2;
};

struct FpRun {
  std::vector<MomentState> moments;  ///< grid moments at every report time, starting at t0
  Densities final;
  double dt = 0.0;
  long steps = 0;
  long fallback_steps = 0;  ///< BDF2 steps redone with backward Euler
  double max_mass_error = 0.0;
};

using FpObserver = std::function<void(double t, const Densities&, const MomentState&)>;

namespace detail {

inline void check_density(std::span<const double> f, const CellGrid& grid, const char* who) {
  if (f.size() != grid.cells) throw std::invalid_argument(std::string(who) + ": density size does not match grid");
  for (double v : f)
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(who) + ": density must be nonnegative");
}

inline bool all_nonnegative(std::span<const double> f) {
  return std::all_of(f.begin(), f.end(), [](double v) { return v >= 0.0; });
}

}  // namespace detail

/// Evolves the coupled system from `initial` (unit-mass densities at time t0)
/// over `horizon`. Means are taken from the current densities by midpoint
/// quadrature before every step and all four populations advance with that
/// snapshot. The observer sees every report time, including t0.
inline FpRun evolve_system(const Densities& initial, const ParameterSet& params, double horizon,
                           const FpOptions& opt = {}, const FpObserver& observer = {}, double t0 = 0.0) {
  const CellGrid& grid = opt.grid;
  for (Population j : kPopulations) detail::check_density(initial[j], grid, "evolve_system");
  if (!(horizon >= 0.0)) throw std::invalid_argument("evolve_system: horizon must be nonnegative");
  if (!(opt.dt_factor > 0.0)) throw std::invalid_argument("evolve_system: dt_factor must be positive");

  FpRun run;
  Densities cur = initial;
  MomentState m_cur = grid_moments(grid, cur, t0);
  run.moments.push_back(m_cur);
  if (observer) observer(t0, cur, m_cur);
  if (horizon == 0.0) {
    run.final = cur;
    return run;
  }

  const double report = opt.report_interval > 0.0 ? std::min(opt.report_interval, horizon) : horizon;
  const long segments = detail::tiling_steps(horizon, report);
  const double seg_len = horizon / static_cast<double>(segments);
  const long per_seg = detail::tiling_steps(seg_len, opt.dt_factor * grid.dx());
  const double dt = seg_len / static_cast<double>(per_seg);
  run.dt = dt;

  Densities prev;
  MomentState m_prev;
  bool have_prev = false;
  for (long seg = 0; seg < segments; ++seg) {
    for (long k = 0; k < per_seg; ++k) {
      Densities next;
      bool bdf2 = opt.scheme == FpTimeScheme::Bdf2 && have_prev;
      if (bdf2) {
        PerPopulation<double> m_star;
        for (Population j : kPopulations) {
          m_star[j] = 2.0 * m_cur.mean[j] - m_prev.mean[j];
          if (!(m_star[j] > 0.0)) m_star[j] = m_cur.mean[j];
        }
        for (Population j : kPopulations) {
          next[j] = bdf2_step_population(grid, cur[j], prev[j], drift_diffusion(j, m_star, params), dt);
          if (!detail::all_nonnegative(next[j])) {
            bdf2 = false;
            break;
          }
        }
        if (!bdf2) ++run.fallback_steps;
      }
      if (!bdf2) {
        for (Population j : kPopulations)
          next[j] = step_population(grid, cur[j], drift_diffusion(j, m_cur.mean, params), dt);
      }
      for (Population j : kPopulations) {
        if (!detail::all_nonnegative(next[j]))
          throw std::runtime_error("evolve_system: negative density in population " + std::string(name(j)));
        run.max_mass_error = std::max(run.max_mass_error, std::abs(grid_mass(grid, next[j]) - 1.0));
      }
      prev = std::move(cur);
      m_prev = m_cur;
      have_prev = true;
      cur = std::move(next);
      ++run.steps;
      const double t = seg + 1 == segments && k + 1 == per_seg
                           ? t0 + horizon
                           : t0 + seg_len * static_cast<double>(seg) + dt * static_cast<double>(k + 1);
      m_cur = grid_moments(grid, cur, t);
    }
    m_cur.t = t0 + seg_len * static_cast<double>(seg + 1);
    run.moments.push_back(m_cur);
    if (observer) observer(m_cur.t, cur, m_cur);
  }
  run.final = std::move(cur);
  return run;
}

/// Initial densities: uniform of width `width` around each mean.
inline Densities uniform_initial_densities(const CellGrid& grid, const PerPopulation<double>& means,
                                           const PerPopulation<double>& widths) {
  Densities f;
  for (Population j : kPopulations) f[j] = uniform_initial_density(grid, means[j], widths[j]);
  return f;
}

inline Densities uniform_initial_densities(const CellGrid& grid, const PerPopulation<double>& means,
                                           double width) {
  return uniform_initial_densities(grid, means, make_per_population(width, width, width, width));
}

}  // namespace mdkin
