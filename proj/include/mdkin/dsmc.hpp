#pragma once

// Direct-simulation Monte Carlo for the kinetic system. Every particle of
// every population is advanced once per step through its two channels
// (a loss/decay channel followed by a gain/recruitment channel). Partners are
// drawn uniformly from the pre-step snapshot, and acceptance of the
// kernel-weighted channels uses kappa(x) = 1 + x of the partner.

#include "mdkin/interactions.hpp"
#include "mdkin/moment_odes.hpp"
#include "mdkin/params.hpp"
#include "mdkin/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdkin {

/// Particles are split into this many fixed blocks, each with its own random
/// stream, so results do not depend on the number of worker threads.
inline constexpr std::size_t kRngBlocks = 64;

struct ParticleEnsemble {
  PerPopulation<std::vector<double>> x;
  std::vector<Rng> streams;  ///< one per block
  double t = 0.0;            ///< internal (unscaled) time
  std::uint64_t steps = 0;

  [[nodiscard]] std::size_t size() const noexcept { return x[Population::N].size(); }
};

/// Half-open index range of block b out of kRngBlocks over n particles.
inline std::pair<std::size_t, std::size_t> block_range(std::size_t b, std::size_t n) noexcept {
  return {b * n / kRngBlocks, (b + 1) * n / kRngBlocks};
}

/// Width of the initial uniform laws; gives variance exactly 0.1.
inline double initial_width() { return std::sqrt(6.0 / 5.0); }

/// Samples each population uniformly on [m - w/2, m + w/2], clipped at 0.
inline ParticleEnsemble init_ensemble(std::size_t n_particles, const PerPopulation<double>& means,
                                      std::uint64_t seed, const PerPopulation<double>& widths) {
  if (n_particles < 1) throw std::invalid_argument("init_ensemble: need at least one particle");
  for (Population j : kPopulations)
    if (!(means[j] > 0.0))
      throw std::invalid_argument("init_ensemble: initial mean of " + std::string(name(j)) + " must be positive");
  ParticleEnsemble e;
  e.streams.reserve(kRngBlocks);
  for (std::size_t b = 0; b < kRngBlocks; ++b) e.streams.push_back(split_stream(seed, b));
  // Initial sampling uses its own stream so the dynamics streams start fresh.
  Rng init = split_stream(seed, kRngBlocks);
  for (Population j : kPopulations) {
    e.x[j].resize(n_particles);
    for (double& v : e.x[j]) v = std::max(0.0, means[j] + widths[j] * (uniform01(init) - 0.5));
  }
  return e;
}

inline ParticleEnsemble init_ensemble(std::size_t n_particles, const PerPopulation<double>& means,
                                      std::uint64_t seed, double width = initial_width()) {
  return init_ensemble(n_particles, means, seed, make_per_population(width, width, width, width));
}

/// Sample mean and unbiased sample variance (0 for a single particle).
inline MomentState estimate_moments(const ParticleEnsemble& e, double t) {
  MomentState s;
  s.t = t;
  for (Population j : kPopulations) {
    const auto& v = e.x[j];
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    s.mean[j] = mean;
    s.variance[j] = v.size() > 1 ? ss / (n - 1.0) : 0.0;
  }
  return s;
}

inline MomentState estimate_moments(const ParticleEnsemble& e) { return estimate_moments(e, e.t); }

struct Histogram {
  double length = 0.0;
  std::size_t bins = 0;
  PerPopulation<std::vector<double>> density;  ///< count / (n * bin width)
  PerPopulation<std::size_t> overflow{};       ///< samples beyond length

  [[nodiscard]] double width() const noexcept { return length / static_cast<double>(bins); }
  [[nodiscard]] double center(std::size_t i) const noexcept {
    return (static_cast<double>(i) + 0.5) * width();
  }
};

inline Histogram to_histogram(const ParticleEnsemble& e, double length, std::size_t bins) {
  if (!(length > 0.0) || bins == 0) throw std::invalid_argument("to_histogram: need length > 0 and bins > 0");
  Histogram h;
  h.length = length;
  h.bins = bins;
  const double w = h.width();
  for (Population j : kPopulations) {
    std::vector<double> counts(bins, 0.0);
    std::size_t over = 0;
    for (double x : e.x[j]) {
      if (x > length) {
        ++over;
        continue;
      }
      counts[std::min(bins - 1, static_cast<std::size_t>(x / w))] += 1.0;
    }
    const double norm = 1.0 / (static_cast<double>(e.x[j].size()) * w);
    for (double& c : counts) c *= norm;
    h.density[j] = std::move(counts);
    h.overflow[j] = over;
  }
  return h;
}

/// Step size and the kernel majorant it was checked against.
struct StepPlan {
  double dt = 0.0;
  double kappa_bound = 1.0;
};

/// Majorant of kappa over the kernel-weighted partners (C and M).
inline double kappa_bound(const ParticleEnsemble& e) {
  double top = 0.0;
  for (double x : e.x[Population::C]) top = std::max(top, x);
  for (double x : e.x[Population::M]) top = std::max(top, x);
  return rules::kernel(top);
}

/// Largest admissible step not exceeding `requested`.
inline StepPlan plan_step(const ParticleEnsemble& e, double requested) {
  StepPlan p;
  p.kappa_bound = kappa_bound(e);
  p.dt = std::min({requested, 1.0 / p.kappa_bound, 1.0});
  return p;
}

namespace dsmc {

// Per-particle draws. The engine fills them from the random streams; the
// test oracle enumerates them exhaustively and calls the same kernels.

/// Partner-dependent factors of the kernel-weighted channels.
struct PartnerTerms {
  double kappa = 1.0;     ///< kernel 1 + c
  double phi = 0.0;       ///< saturation c / (1 + c)
  double root_phi = 0.0;  ///< sqrt(phi), scales the noise
};

inline PartnerTerms partner_terms(double c) noexcept {
  const double phi = rules::saturation(c);
  return {rules::kernel(c), phi, std::sqrt(phi)};
}

/// Kernel-weighted loss (channels a, c) or unit-rate decay (e, g).
struct LossDraw {
  bool fire = false;
  PartnerTerms partner{};  ///< unused for decay
  double xi = 0.0;         ///< standardized noise
};

/// Kernel-weighted transfer gain (channels b, d).
struct GainDraw {
  bool fire = false;
  double source = 0.0;
  PartnerTerms mediator{};
};

/// Unit-rate recruitment (channels f, h).
struct RecruitDraw {
  bool fire = false;
  double source = 0.0;
};

/// x - beta Phi(c) x + eta x with eta = xi sqrt(sigma2 Phi(c)).
inline double apply_loss(double x, const LossDraw& d, double beta, double sigma) {
  if (!d.fire) return x;
  return x - beta * d.partner.phi * x + d.xi * sigma * d.partner.root_phi * x;
}

inline double apply_decay(double x, const LossDraw& d, double beta, double sigma) {
  if (!d.fire) return x;
  return rules::decay(x, d.xi * sigma, beta);
}

inline double apply_gain(double x, const GainDraw& d, double beta) {
  return d.fire ? x + beta * d.mediator.phi * d.source : x;
}

inline double apply_recruit(double x, const RecruitDraw& d, double gamma, double nu) {
  return d.fire ? rules::recruitment(x, d.source, gamma, nu) : x;
}

/// Post-step value of one particle of population j, loss channel first.
inline double advance(Population j, double x, const LossDraw& loss, const GainDraw& gain,
                      const RecruitDraw& recruit, const ParameterSet& p) {
  using enum Population;
  switch (j) {
    case N: return apply_gain(apply_loss(x, loss, p.beta[N], std::sqrt(p.sigma2[N])), gain, p.beta[D]);
    case D: return apply_gain(apply_loss(x, loss, p.beta[D], std::sqrt(p.sigma2[D])), gain, p.beta[N]);
    case M:
      return apply_recruit(apply_decay(x, loss, p.beta[M], std::sqrt(p.sigma2[M])), recruit, p.gamma_M, 0.0);
    case C:
      return apply_recruit(apply_decay(x, loss, p.beta[C], std::sqrt(p.sigma2[C])), recruit, p.gamma_C,
                           p.nu_control);
  }
  return x;
}

namespace draw {

// Fixed per-particle word budget: kinetic populations (N, D) use three
// 64-bit words, linear populations (M, C) two. Word 1 carries the loss
// channel (partner index in the high half, acceptance in bits 1..31, the
// two-point sign in bit 0), word 2 the gain channel (partner index and
// acceptance). Uniform noise reads 32 spare bits.

inline constexpr double kTwoPow31 = 2147483648.0;
inline constexpr double kTwoPow32 = 4294967296.0;

/// Index in [0, n) from the high 32 bits of w.
inline std::size_t high_index(std::uint64_t w, std::size_t n) noexcept {
  return static_cast<std::size_t>(((w >> 32) * static_cast<std::uint64_t>(n)) >> 32);
}

/// Uniform in [0, 1) from bits 1..31 of w.
inline double low_uniform(std::uint64_t w) noexcept {
  return static_cast<double>((w >> 1) & 0x7fffffffu) / kTwoPow31;
}

/// Standardized noise: the sign of bit 0 of `sign_word` for the two-point
/// law, sqrt(3) (2u - 1) with u from 32 spare bits for the uniform law.
inline double noise(NoiseLaw law, std::uint64_t sign_word, std::uint32_t spare) noexcept {
  if (law == NoiseLaw::TwoPoint) return (sign_word & 1u) ? 1.0 : -1.0;
  return std::sqrt(3.0) * (2.0 * (static_cast<double>(spare) / kTwoPow32) - 1.0);
}

}  // namespace draw

}  // namespace dsmc

/// One Monte Carlo step of all eight channels with Jacobi coupling.
/// Throws std::domain_error when dt * kappa_bound > 1 or dt > 1.
inline void step(ParticleEnsemble& e, const ParameterSet& p, double dt, NoiseLaw law = NoiseLaw::TwoPoint) {
  using enum Population;
  using namespace dsmc;
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const double kb = kappa_bound(e);
  if (dt * kb > 1.0 || dt > 1.0)
    throw std::domain_error("step: dt * kappa_bound = " + std::to_string(dt * kb) +
                            " exceeds 1; use plan_step to shrink dt");
  if (e.streams.size() != kRngBlocks) throw std::invalid_argument("step: ensemble has no random streams");
  const std::size_t n = e.size();
  for (Population j : kPopulations)
    if (e.x[j].size() != n) throw std::invalid_argument("step: populations must have equal sizes");

  const auto& xN = e.x[N];
  const auto& xD = e.x[D];
  const auto& xM = e.x[M];
  const auto& xC = e.x[C];
  PerPopulation<std::vector<double>> out;
  for (Population j : kPopulations) out[j].resize(n);

  constexpr std::size_t kChunk = 256;
  constexpr std::uint64_t u32 = 0xffffffffu;

  // Partners are gathered chunk-wise so that many independent loads are in
  // flight at once; the arithmetic pass then runs on local buffers.
  auto kinetic = [&](Population j, const std::vector<double>& partner, const std::vector<double>& mediator,
                     const std::vector<double>& source, Rng& rng, std::size_t lo, std::size_t hi) {
    std::uint64_t w1[kChunk], w2[kChunk], w3[kChunk];
    double pa[kChunk], pm[kChunk], ps[kChunk];
    const auto& self = e.x[j];
    for (std::size_t i0 = lo; i0 < hi; i0 += kChunk) {
      const std::size_t m = std::min(kChunk, hi - i0);
      for (std::size_t k = 0; k < m; ++k) {
        w1[k] = rng();
        w2[k] = rng();
        w3[k] = rng();
      }
      for (std::size_t k = 0; k < m; ++k) {
        pa[k] = partner[draw::high_index(w1[k], n)];
        pm[k] = mediator[draw::high_index(w2[k], n)];
        ps[k] = source[draw::high_index(w3[k], n)];
      }
      for (std::size_t k = 0; k < m; ++k) {
        const PartnerTerms ta = partner_terms(pa[k]);
        const PartnerTerms tm = partner_terms(pm[k]);
        LossDraw a{draw::low_uniform(w1[k]) < dt * ta.kappa, ta,
                   draw::noise(law, w1[k], static_cast<std::uint32_t>(w3[k] & u32))};
        GainDraw g{draw::low_uniform(w2[k]) < dt * tm.kappa, ps[k], tm};
        out[j][i0 + k] = advance(j, self[i0 + k], a, g, {}, p);
      }
    }
  };
  auto linear = [&](Population j, const std::vector<double>& source, Rng& rng, std::size_t lo, std::size_t hi) {
    std::uint64_t w1[kChunk], w2[kChunk];
    double ps[kChunk];
    const auto& self = e.x[j];
    for (std::size_t i0 = lo; i0 < hi; i0 += kChunk) {
      const std::size_t m = std::min(kChunk, hi - i0);
      for (std::size_t k = 0; k < m; ++k) {
        w1[k] = rng();
        w2[k] = rng();
      }
      for (std::size_t k = 0; k < m; ++k) ps[k] = source[draw::high_index(w2[k], n)];
      for (std::size_t k = 0; k < m; ++k) {
        LossDraw a{draw::low_uniform(w1[k]) < dt, PartnerTerms{},
                   draw::noise(law, w1[k], static_cast<std::uint32_t>(w1[k] >> 32))};
        RecruitDraw r{draw::low_uniform(w2[k]) < dt, ps[k]};
        out[j][i0 + k] = advance(j, self[i0 + k], a, {}, r, p);
      }
    }
  };

#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < kRngBlocks; ++b) {
    Rng& rng = e.streams[b];
    const auto [lo, hi] = block_range(b, n);
    kinetic(N, xC, xM, xD, rng, lo, hi);  // channels a, b
    kinetic(D, xM, xC, xN, rng, lo, hi);  // channels c, d
    linear(M, xD, rng, lo, hi);           // channels e, f
    linear(C, xM, rng, lo, hi);           // channels g, h
  }
  for (Population j : kPopulations) e.x[j] = std::move(out[j]);
  e.t += dt;
  ++e.steps;
}

/// Exact expectation of the next-step population moments given the current
/// ensemble, averaging over all partner draws, acceptances and noise.
struct ExpectedMoments {
  PerPopulation<double> mean;    ///< E[(1/n) sum x_i']
  PerPopulation<double> second;  ///< E[(1/n) sum x_i'^2]
  /// Var((1/n) sum x_i') given the ensemble: particles update independently.
  PerPopulation<double> mean_variance;
};

/// Closed-form expectation for symmetric noise of unit variance. Loss and
/// gain draws are independent, so E[x''^2] splits into loss, cross and gain
/// parts; the therapy term of C acts on the post-decay value.
inline ExpectedMoments expected_step_moments(const ParticleEnsemble& e, const ParameterSet& p, double dt) {
  using enum Population;
  auto avg = [](const std::vector<double>& v, auto fn) {
    double s = 0.0;
    for (double x : v) s += fn(x);
    return s / static_cast<double>(v.size());
  };
  auto id = [](double x) { return x; };
  auto sq = [](double x) { return x * x; };
  auto x_phi = [](double x) { return x * rules::saturation(x); };

  ExpectedMoments r;
  // Kernel-weighted pair (self population j, loss partner L, gain source S, gain mediator G).
  auto kinetic = [&](Population j, Population partner, Population source, Population mediator,
                     double beta_loss, double sigma2, double beta_gain) {
    const auto& x = e.x[j];
    const double mp = avg(e.x[partner], id);
    const double mp_phi = avg(e.x[partner], x_phi);
    const double ms = avg(e.x[source], id);
    const double ms2 = avg(e.x[source], sq);
    const double mg = avg(e.x[mediator], id);
    const double mg_phi = avg(e.x[mediator], x_phi);
    const double gain1 = dt * beta_gain * mg * ms;
    const double gain2 = dt * beta_gain * beta_gain * mg_phi * ms2;
    // kappa(c) [(1 - beta Phi(c))^2 + sigma2 Phi(c) - 1] = -2 beta c + beta^2 c Phi(c) + sigma2 c
    const double loss_factor1 = 1.0 - dt * beta_loss * mp;
    const double loss_factor2 = 1.0 + dt * (-2.0 * beta_loss * mp + beta_loss * beta_loss * mp_phi + sigma2 * mp);
    double s1 = 0.0, s2 = 0.0, var = 0.0;
    for (double xi : x) {
      const double l1 = xi * loss_factor1;
      const double l2 = xi * xi * loss_factor2;
      const double e1 = l1 + gain1;
      const double e2 = l2 + 2.0 * l1 * gain1 + gain2;
      s1 += e1;
      s2 += e2;
      var += e2 - e1 * e1;
    }
    const double n = static_cast<double>(x.size());
    r.mean[j] = s1 / n;
    r.second[j] = s2 / n;
    r.mean_variance[j] = var / (n * n);
  };
  kinetic(N, C, D, M, p.beta[N], p.sigma2[N], p.beta[D]);
  kinetic(D, M, N, C, p.beta[D], p.sigma2[D], p.beta[N]);

  auto linear = [&](Population j, Population source, double beta, double sigma2, double gamma, double nu) {
    const auto& x = e.x[j];
    const double ms = avg(e.x[source], id);
    const double ms2 = avg(e.x[source], sq);
    const double d1 = 1.0 - dt * beta;
    const double d2 = 1.0 + dt * ((1.0 - beta) * (1.0 - beta) + sigma2 - 1.0);
    // x'' = x' (1 - nu F) + F gamma s with F ~ Bernoulli(dt)
    const double k1 = 1.0 - dt * nu;
    const double k2 = 1.0 - dt * (2.0 * nu - nu * nu);
    const double cross = dt * (1.0 - nu) * gamma * ms;
    const double g2 = dt * gamma * gamma * ms2;
    double s1 = 0.0, s2 = 0.0, var = 0.0;
    for (double xi : x) {
      const double l1 = xi * d1;
      const double l2 = xi * xi * d2;
      const double e1 = l1 * k1 + dt * gamma * ms;
      const double e2 = l2 * k2 + 2.0 * l1 * cross + g2;
      s1 += e1;
      s2 += e2;
      var += e2 - e1 * e1;
    }
    const double n = static_cast<double>(x.size());
    r.mean[j] = s1 / n;
    r.second[j] = s2 / n;
    r.mean_variance[j] = var / (n * n);
  };
  linear(M, D, p.beta[M], p.sigma2[M], p.gamma_M, 0.0);
  linear(C, M, p.beta[C], p.sigma2[C], p.gamma_C, p.nu_control);
  return r;
}

struct DsmcOptions {
  double dt = 0.5;               ///< requested internal step, shrunk by plan_step
  double report_interval = 1.0;  ///< on the mean-field clock
  NoiseLaw law = NoiseLaw::TwoPoint;
};

using DsmcObserver = std::function<void(double t, const ParticleEnsemble&)>;

struct DsmcRun {
  std::vector<MomentState> moments;  ///< on the mean-field clock
  std::uint64_t steps = 0;
  double min_dt = std::numeric_limits<double>::infinity();
};

/// Simulates the epsilon-scaled dynamics for internal time horizon / epsilon.
/// Reported times are on the mean-field clock t = epsilon * internal time.
inline DsmcRun run(ParticleEnsemble& e, const ParameterSet& params, double epsilon, double horizon,
                   const DsmcOptions& opt = {}, const DsmcObserver& observer = {}) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("run: horizon must be nonnegative");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("run: dt must be positive");
  const ParameterSet sp = scaled(params, epsilon);
  InteractionRules guard(sp, opt.law);  // throws if the noise law can break positivity
  (void)guard;

  DsmcRun out;
  const double t0 = e.t * epsilon;
  auto report = [&](double t) {
    out.moments.push_back(estimate_moments(e, t));
    if (observer) observer(t, e);
  };
  report(t0);
  if (horizon == 0.0) return out;

  const double interval = opt.report_interval > 0.0 ? std::min(opt.report_interval, horizon) : horizon;
  const long segments = mdkin::detail::tiling_steps(horizon, interval);
  const double seg_internal = horizon / static_cast<double>(segments) / epsilon;
  for (long s = 0; s < segments; ++s) {
    double remaining = seg_internal;
    while (remaining > 1e-12 * seg_internal) {
      const StepPlan plan = plan_step(e, opt.dt);
      const double dt = std::min(plan.dt, remaining);
      step(e, sp, dt, opt.law);
      out.min_dt = std::min(out.min_dt, dt);
      ++out.steps;
      remaining -= dt;
    }
    e.t = (t0 + horizon * static_cast<double>(s + 1) / static_cast<double>(segments)) / epsilon;
    report(e.t * epsilon);
  }
  return out;
}

}  // namespace mdkin
