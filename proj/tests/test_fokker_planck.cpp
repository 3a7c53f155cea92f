#include "mdkin/fokker_planck.hpp"
#include "mdkin/moment_odes.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace mdkin;
using enum Population;

namespace {

const PerPopulation<double> kEq = make_per_population(5.0, 5.0, 1.25, 0.625);
const PerPopulation<double> kOff = make_per_population(7.0, 3.0, 0.8, 0.4);

std::vector<double> random_density(const CellGrid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> f(g.cells);
  for (double& v : f) v = u(rng);
  const double m = grid_mass(g, f);
  for (double& v : f) v /= m;
  return f;
}

double max_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

TEST(ChangCooper, WeightAtZeroAndOne) {
  EXPECT_DOUBLE_EQ(upwind_fraction(0.0), 0.5);
  EXPECT_NEAR(upwind_fraction(1.0), 1.0 - 1.0 / (std::exp(1.0) - 1.0), 1e-15);
  EXPECT_NEAR(upwind_fraction(1.0), 0.41802, 5e-6);
}

TEST(ChangCooper, WeightIsContinuousAcrossTheSeriesSwitch) {
  for (double l : {1e-3, -1e-3}) {
    const double below = upwind_fraction(l * (1 - 1e-9)), above = upwind_fraction(l * (1 + 1e-9));
    EXPECT_NEAR(below, above, 1e-12);
  }
  EXPECT_NEAR(bernoulli(1e-4 * (1 - 1e-9)), bernoulli(1e-4 * (1 + 1e-9)), 1e-12);
  EXPECT_DOUBLE_EQ(bernoulli(0.0), 1.0);
}

TEST(ChangCooper, WeightStaysInTheUnitInterval) {
  for (double l = -50.0; l <= 50.0; l += 0.37) {
    const double d = upwind_fraction(l);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(ChangCooper, FluxFormsAgree) {
  const DriftDiffusion c = drift_diffusion(N, kOff, table1_parameters());
  const double fl = 0.3, fr = 0.7;
  for (double x : {0.05, 0.5, 3.0, 11.0}) {
    const InterfaceFlux w = flux_coefficients(c, x, 0.015);
    EXPECT_NEAR(w.right - w.left, w.advective, 1e-12 * (std::abs(w.advective) + w.diffusive));
    const double split = w.advective * ((1 - w.delta) * fr + w.delta * fl) + w.diffusive * (fr - fl);
    EXPECT_NEAR(w.right * fr - w.left * fl, split, 1e-10 * (std::abs(split) + w.diffusive));
  }
}

TEST(ChangCooper, RejectsBadGeometry) {
  const DriftDiffusion c{1.0, 1.0, 1.0};
  EXPECT_THROW((void)flux_coefficients(c, 0.01, 0.02), std::invalid_argument);
  EXPECT_THROW((void)flux_coefficients(c, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW((void)flux_coefficients({1.0, 1.0, -1.0}, 1.0, 0.1), std::invalid_argument);
}

TEST(Operator, ColumnsSumToZeroAndOffDiagonalsAreNonnegative) {
  const CellGrid g(12.0, 401);
  const ParameterSet p = table1_parameters();
  for (Population j : kPopulations) {
    const FpOperator A(g, drift_diffusion(j, kOff, p));
    for (std::size_t i = 0; i < g.cells; ++i) {
      double col = A.diag[i];
      if (i > 0) col += A.upper[i - 1];
      if (i + 1 < g.cells) col += A.lower[i + 1];
      ASSERT_NEAR(col, 0.0, 1e-10 * std::abs(A.diag[i]) + 1e-300);
      ASSERT_GE(A.lower[i], 0.0);
      ASSERT_GE(A.upper[i], 0.0);
      ASSERT_LE(A.diag[i], 0.0);
    }
  }
}

TEST(Operator, SampledStationaryLawIsInTheKernel) {
  const CellGrid g(12.0, 801);
  const ParameterSet p = table1_parameters();
  for (Population j : kPopulations) {
    const DriftDiffusion c = drift_diffusion(j, kEq, p);
    const FpOperator A(g, c);
    const auto f = discrete_equilibrium(g, c);
    const auto r = A.apply(f);
    double scale = 0.0;
    for (std::size_t i = 0; i < g.cells; ++i) scale = std::max(scale, std::abs(A.diag[i] * f[i]));
    EXPECT_LT(max_abs(r), 1e-11 * scale) << name(j);
  }
}

TEST(Operator, DiscreteEquilibriumMatchesTheContinuousMoments) {
  const CellGrid g(12.0, 3201);
  const ParameterSet p = table1_parameters();
  for (Population j : kPopulations) {
    const auto law = quasi_equilibrium(j, kEq, p);
    const auto f = discrete_equilibrium(g, drift_diffusion(j, kEq, p));
    EXPECT_NEAR(grid_mass(g, f), 1.0, 1e-13);
    // the grid cannot see the tail beyond L, so compare with the truncated law
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double mass = GK::integrate([&](double x) { return law.pdf(x); }, 0.0, g.length, 15, 1e-14);
    const double first = GK::integrate([&](double x) { return x * law.pdf(x); }, 0.0, g.length, 15, 1e-14);
    EXPECT_NEAR(grid_mean(g, f), first / mass, 1e-5) << name(j);
  }
}

TEST(Stepping, BackwardEulerConservesMassAndPositivity) {
  const CellGrid g(12.0, 201);
  const ParameterSet p = table1_parameters();
  for (Population j : kPopulations) {
    auto f = random_density(g, 11 + index(j));
    const DriftDiffusion c = drift_diffusion(j, kOff, p);
    for (double dt : {1e-3, 0.1, 10.0}) {
      const auto h = step_population(g, f, c, dt);
      EXPECT_NEAR(grid_mass(g, h), 1.0, 1e-12);
      for (double v : h) ASSERT_GT(v, 0.0);
    }
  }
}

TEST(Stepping, FrozenIterationsConvergeToTheDiscreteEquilibrium) {
  const CellGrid g(12.0, 201);
  const ParameterSet p = table1_parameters();
  for (Population j : kPopulations) {
    const DriftDiffusion c = drift_diffusion(j, kEq, p);
    const auto target = discrete_equilibrium(g, c);
    auto be = random_density(g, 3);
    auto prev = be;
    auto cur = step_population(g, be, c, 0.5);
    for (int k = 0; k < 4000; ++k) be = step_population(g, be, c, 0.5);
    double worst_step = 0.0;
    for (int k = 0; k < 4000; ++k) {
      auto next = bdf2_step_population(g, cur, prev, c, 0.5);
      worst_step = std::max(worst_step, std::abs(grid_mass(g, next) - grid_mass(g, cur)));
      prev = std::move(cur);
      cur = std::move(next);
    }
    EXPECT_LT(sup_distance(be, target), 1e-9 * max_abs(target)) << name(j);
    EXPECT_LT(sup_distance(cur, target), 1e-9 * max_abs(target)) << name(j);
    EXPECT_LT(worst_step, 1e-12);
    EXPECT_NEAR(grid_mass(g, cur), 1.0, 1e-11);  // roundoff accumulates over the run
  }
}

TEST(Stepping, ConsistentWithTheExplicitGeneratorAsDtShrinks) {
  const CellGrid g(12.0, 101);
  const DriftDiffusion c = drift_diffusion(D, kOff, table1_parameters());
  const FpOperator A(g, c);
  const auto f = random_density(g, 5);
  double prev = INFINITY;
  for (double dt : {1e-3, 1e-4, 1e-5}) {
    const auto h = step_population(g, f, c, dt);
    const auto af = A.apply(f);
    std::vector<double> diff(g.cells);
    for (std::size_t i = 0; i < g.cells; ++i) diff[i] = h[i] - f[i] - dt * af[i];
    const double e = max_abs(diff);
    EXPECT_LT(e, prev / 50.0);  // second order in dt
    prev = e;
  }
}

TEST(Stepping, ZeroDiffusionUsesUpwinding) {
  const CellGrid g(12.0, 120);
  const DriftDiffusion c{1.0, 3.0, 0.0};
  const FpOperator A(g, c);
  for (std::size_t i = 0; i + 1 < g.cells; ++i) {
    const double b = c.lambda * g.interface(i) - c.mu;
    EXPECT_TRUE(A.upper[i] == 0.0 || A.lower[i + 1] == 0.0);
    if (b > 0.0) EXPECT_GT(A.upper[i], 0.0);
  }
  auto f = random_density(g, 9);
  for (int k = 0; k < 2000; ++k) f = step_population(g, f, c, 0.05);
  EXPECT_NEAR(grid_mass(g, f), 1.0, 1e-12);
  // mass collects at x = mu / lambda
  EXPECT_NEAR(grid_mean(g, f), 3.0, 0.2);
}

TEST(Stepping, RejectsBadInput) {
  const CellGrid g(12.0, 10);
  std::vector<double> f(10, 1.0 / 12.0), bad(9, 0.1);
  const DriftDiffusion c{1.0, 1.0, 1.0};
  EXPECT_THROW((void)step_population(g, f, c, 0.0), std::invalid_argument);
  EXPECT_THROW((void)bdf2_step_population(g, f, bad, c, 0.1), std::invalid_argument);
}

TEST(InitialData, UniformDensityMoments) {
  const CellGrid g(12.0, 801);
  const double width = std::sqrt(12.0 * 0.1);
  const auto f = uniform_initial_density(g, 5.0, width);
  EXPECT_NEAR(grid_mass(g, f), 1.0, 1e-13);
  // midpoint moments of partially covered end cells are off by O(dx^2)
  EXPECT_NEAR(grid_mean(g, f), 5.0, g.dx() * g.dx());
  EXPECT_NEAR(grid_variance(g, f), 0.1, g.dx() * g.dx());
  EXPECT_THROW((void)uniform_initial_density(g, 11.9, 1.0), std::invalid_argument);
  EXPECT_THROW((void)uniform_initial_density(g, 0.0, 1.0), std::invalid_argument);
  // clipped at 0: the support shrinks to [0, mean + width / 2]
  const auto h = uniform_initial_density(g, 0.1, width);
  EXPECT_NEAR(grid_mass(g, h), 1.0, 1e-13);
  EXPECT_NEAR(grid_mean(g, h), 0.5 * (0.1 + 0.5 * width), g.dx() * g.dx());
}

TEST(System, ZeroHorizonReturnsTheInitialData) {
  const CellGrid g(12.0, 101);
  const auto f0 = uniform_initial_densities(g, kOff, 1.0);
  const FpRun run = evolve_system(f0, table1_parameters(), 0.0, {g});
  ASSERT_EQ(run.moments.size(), 1u);
  EXPECT_EQ(run.steps, 0);
  for (Population j : kPopulations) EXPECT_EQ(run.final[j], f0[j]);
}

TEST(System, ConservesMassAndReportsOnSchedule) {
  const CellGrid g(12.0, 201);
  const auto f0 = uniform_initial_densities(g, kOff, 1.0);
  std::vector<double> seen;
  const FpRun run = evolve_system(f0, table1_parameters(), 3.0, {g, 0.5, 0.5},
                                  [&](double t, const Densities&, const MomentState&) { seen.push_back(t); });
  ASSERT_EQ(run.moments.size(), 7u);
  ASSERT_EQ(seen.size(), 7u);
  for (std::size_t k = 0; k < seen.size(); ++k) EXPECT_NEAR(seen[k], 0.5 * k, 1e-12);
  EXPECT_LT(run.max_mass_error, 1e-12);
  for (Population j : kPopulations)
    for (double v : run.final[j]) ASSERT_GE(v, 0.0);
}

TEST(System, RejectsInvalidInput) {
  const CellGrid g(12.0, 50);
  auto f0 = uniform_initial_densities(g, kOff, 1.0);
  EXPECT_THROW((void)evolve_system(f0, table1_parameters(), -1.0, {g}), std::invalid_argument);
  f0[M][3] = -1.0;
  EXPECT_THROW((void)evolve_system(f0, table1_parameters(), 1.0, {g}), std::invalid_argument);
}

TEST(System, GridMeansTrackTheMomentOdesUnderRefinement) {
  const ParameterSet p = table1_parameters();
  const auto m0 = make_per_population(6.0, 4.0, 1.0, 0.5);
  double prev = INFINITY;
  double last = 0.0;
  for (std::size_t n : {201u, 801u, 3201u}) {
    const CellGrid g(12.0, n);
    const auto f0 = uniform_initial_densities(g, m0, 1.0);
    const FpRun run = evolve_system(f0, p, 20.0, {g, 0.5, 1.0});
    const auto ode = integrate(grid_moments(g, f0, 0.0), p, 20.0, {1e-3, 1.0});
    double err = 0.0;
    for (std::size_t k = 0; k < run.moments.size(); ++k)
      for (Population j : kPopulations) err = std::max(err, std::abs(run.moments[k].mean[j] - ode[k].mean[j]));
    EXPECT_LT(err, prev) << "n=" << n;
    prev = err;
    last = err;
  }
  EXPECT_LT(last, 1e-3);
}
