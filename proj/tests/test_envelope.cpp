#include "mdkin/envelope.hpp"
#include "mdkin/moment_odes.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mdkin;
using enum Population;

namespace {

std::vector<MomentState> constant_trajectory(const PerPopulation<double>& m, double horizon, int steps) {
  std::vector<MomentState> traj;
  for (int k = 0; k <= steps; ++k) traj.push_back({horizon * k / steps, m, make_per_population(0.1, 0.1, 0.1, 0.1)});
  return traj;
}

const MomentState kStart{0.0, make_per_population(9.0, 1.0, 0.6, 0.6), make_per_population(0.1, 0.1, 0.1, 0.1)};

}  // namespace

TEST(EnvelopeConstant, ThreeQuarters) {
  // 4^(1/3) * 4^(1/3) * (0.5^(2/3) + 0.5^(-1/3))
  const double expected = std::cbrt(16.0) * (std::pow(0.5, 2.0 / 3.0) + std::cbrt(2.0));
  EXPECT_NEAR(envelope_constant(0.75), expected, 1e-13);
  EXPECT_NEAR(envelope_constant(0.75), 4.7622, 5e-5);
}

TEST(EnvelopeConstant, FiniteAndPositiveOnTheExponentRange) {
  for (double p : {0.55, 0.625, 0.75, 0.875, 0.95}) {
    EXPECT_TRUE(std::isfinite(envelope_constant(p)));
    EXPECT_GT(envelope_constant(p), 0.0);
  }
  EXPECT_THROW((void)envelope_constant(1.0), std::invalid_argument);
}

TEST(Envelope, EnergyAndYRoundTrip) {
  for (double p : {0.625, 0.75, 0.875})
    for (double e : {1e-9, 1e-3, 0.4, 7.0}) EXPECT_NEAR(envelope_energy_from_y(envelope_y_from_energy(e, p), p), e, 1e-14 * e);
}

TEST(Envelope, RateIsNonnegativeAlongTheTrajectory) {
  const ParameterSet p = table1_parameters();
  for (const auto& s : integrate(kStart, p, 100.0, {1e-2, 0.5}))
    for (Population j : kPopulations)
      for (double q : {0.625, 0.75, 0.875}) ASSERT_GE(envelope_rate(j, q, s.mean, p), 0.0);
}

TEST(Envelope, OmegaDerivativeMatchesFiniteDifferences) {
  const ParameterSet p = table1_parameters();
  const double h = 1e-3;
  const auto traj = integrate(kStart, p, 10.0, {h / 10.0, h});
  for (std::size_t k = 1; k + 1 < traj.size(); k += 997) {
    for (Population j : kPopulations) {
      const double fd = (quasi_equilibrium(j, traj[k + 1].mean, p).omega - quasi_equilibrium(j, traj[k - 1].mean, p).omega) /
                        (2.0 * h);
      const double an = omega_derivative(j, traj[k].mean, p);
      EXPECT_NEAR(an, fd, 1e-5 * (1.0 + std::abs(fd))) << name(j) << " t=" << traj[k].t;
    }
  }
}

TEST(Envelope, PureDecayAtEquilibrium) {
  const ParameterSet p = table1_parameters();
  const auto m = make_per_population(5.0, 5.0, 1.25, 0.625);
  const auto traj = constant_trajectory(m, 20.0, 400);
  for (Population j : kPopulations) {
    const double y0 = envelope_y_from_energy(0.3, 0.75);
    const DecayEnvelope env = decay_envelope(j, 0.75, traj, p, y0);
    const double a = envelope_rate(j, 0.75, m, p);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      EXPECT_NEAR(env.b[k], 0.0, 1e-12);
      EXPECT_NEAR(env.gronwall_y[k], y0 * std::exp(-a * traj[k].t), 1e-12 * y0);
      EXPECT_LE(env.fig5[k], 0.0);
    }
    EXPECT_NEAR(env.gronwall.front(), 0.3, 1e-14);
  }
}

TEST(Envelope, GronwallMatchesADirectOdeSolve) {
  // y' = -a y + b with a, b read from the envelope itself
  const ParameterSet p = table1_parameters();
  const auto traj = integrate(kStart, p, 30.0, {1e-3, 1e-3});
  const DecayEnvelope env = decay_envelope(D, 0.75, traj, p, 2.0);
  double y = 2.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double h = env.t[k] - env.t[k - 1];
    const double k1 = -env.a[k - 1] * y + env.b[k - 1];
    const double ym = y + h * k1;
    const double k2 = -env.a[k] * ym + env.b[k];
    y += 0.5 * h * (k1 + k2);
  }
  EXPECT_NEAR(env.gronwall_y.back(), y, 1e-4 * y);
  EXPECT_GT(env.M, 0.0);
  EXPECT_GT(env.D, 0.0);
}

TEST(Envelope, InterpolationAndValidation) {
  const ParameterSet p = table1_parameters();
  const auto traj = constant_trajectory(make_per_population(5.0, 5.0, 1.25, 0.625), 2.0, 2);
  const DecayEnvelope env = decay_envelope(M, 0.75, traj, p, 1.0);
  EXPECT_DOUBLE_EQ(env.at(env.a_integral, 0.5), 0.5 * env.a_integral[1]);
  EXPECT_DOUBLE_EQ(env.at(env.a_integral, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(env.at(env.a_integral, 9.0), env.a_integral.back());
  EXPECT_THROW((void)DecayEnvelope{}.at({}, 0.0), std::logic_error);
  EXPECT_THROW((void)decay_envelope(M, 0.75, {}, p, 1.0), std::invalid_argument);
  EXPECT_THROW((void)decay_envelope(M, 0.75, traj, p, -1.0), std::invalid_argument);
  EXPECT_THROW((void)decay_envelope(M, 0.3, traj, p, 1.0), std::invalid_argument);
}
