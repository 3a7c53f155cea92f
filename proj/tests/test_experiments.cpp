#include "mdkin/experiments.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mdkin;
using enum Population;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("mdkin_test_" + tag);
  fs::remove_all(d);
  return d;
}

std::vector<std::string> listing(const fs::path& d) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(d)) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

RunConfig small_consistency(const std::string& tag) {
  RunConfig c;
  c.n_particles = 2000;
  c.horizon = 2.0;
  c.epsilons = {0.1};
  c.out_dir = fresh_dir(tag).string();
  return c;
}

}  // namespace

TEST(Helpers, InterpolationAndTags) {
  std::vector<MomentState> traj{{0.0, make_per_population(1.0, 2.0, 3.0, 4.0), make_per_population(1.0, 1.0, 1.0, 1.0)},
                                {2.0, make_per_population(3.0, 2.0, 1.0, 0.0), make_per_population(3.0, 3.0, 3.0, 3.0)}};
  const MomentState s = interpolate_moments(traj, 0.5);
  EXPECT_DOUBLE_EQ(s.mean[N], 1.5);
  EXPECT_DOUBLE_EQ(s.mean[C], 3.0);
  EXPECT_DOUBLE_EQ(s.variance[M], 1.5);
  EXPECT_DOUBLE_EQ(interpolate_moments(traj, 5.0).mean[N], 3.0);
  EXPECT_THROW((void)interpolate_moments({}, 0.0), std::invalid_argument);
  EXPECT_EQ(epsilon_tag(1e-3), "1e-03");
  EXPECT_EQ(epsilon_tag(0.5), "5e-01");
  EXPECT_NE(consistency_seed(1, 0.1), consistency_seed(1, 0.01));
  EXPECT_EQ(consistency_seed(1, 0.1), consistency_seed(1, 0.1));
}

TEST(Output, CsvRowsMustMatchTheHeader) {
  const fs::path d = fresh_dir("csv");
  OutputDir out(d);
  auto csv = out.csv("a.csv", {"x", "y"});
  EXPECT_THROW(csv.row({1.0}), std::logic_error);
  EXPECT_THROW((void)out.claim("a.csv"), std::logic_error);
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
}

TEST(Moments, ManifestMatchesTheDirectoryAndConservationHolds) {
  RunConfig c;
  c.out_dir = fresh_dir("moments").string();
  const ExperimentReport r = run_moments(c);
  EXPECT_EQ(r.experiment, "moments");
  EXPECT_EQ(sorted(r.files), listing(c.out_dir));
  EXPECT_EQ(line_count(fs::path(c.out_dir) / "moments_trajectory.csv"), 1u + 1001u);
  EXPECT_LE(r.headline["max_conservation_drift"].get<double>(), 1e-10);
  const auto doc = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "summary.json"));
  EXPECT_EQ(doc["experiment"], "moments");
  EXPECT_EQ(doc["files"].get<std::vector<std::string>>(), r.files);
  EXPECT_FALSE(doc.contains("runtime"));
}

TEST(Moments, ZeroHorizonWritesOnlyTheInitialState) {
  RunConfig c;
  c.horizon = 0.0;
  c.out_dir = fresh_dir("moments0").string();
  (void)run_moments(c);
  EXPECT_EQ(line_count(fs::path(c.out_dir) / "moments_trajectory.csv"), 2u);
}

TEST(Therapy, ControlledEquilibriumAndManifest) {
  RunConfig c;
  c.horizon = 400.0;
  c.ode_report_interval = 10.0;
  c.out_dir = fresh_dir("therapy").string();
  const ExperimentReport r = run_therapy(c);
  EXPECT_EQ(r.experiment, "therapy");
  EXPECT_EQ(sorted(r.files), listing(c.out_dir));
  EXPECT_NEAR(r.headline["nu_control"].get<double>(), 0.1, 0.0);
  EXPECT_NEAR(r.headline["controlled_equilibrium_means"]["N"].get<double>(), 20.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.headline["terminal_means"]["N"].get<double>(), 20.0 / 3.0, 1e-3);
  EXPECT_GT(r.headline["controlled_equilibrium_variances"]["N"].get<double>(),
            r.headline["uncontrolled_equilibrium_variances"]["N"].get<double>());
}

TEST(Consistency, ReproducibleAcrossRunsAndWorkerCounts) {
  RunConfig a = small_consistency("cons_a"), b = small_consistency("cons_b"), w = small_consistency("cons_w");
  a.workers = 1;
  b.workers = 1;
  w.workers = 4;
  const ExperimentReport ra = run_consistency(a);
  (void)run_consistency(b);
  (void)run_consistency(w);
  apply_workers(1);
  EXPECT_EQ(sorted(ra.files), listing(a.out_dir));
  for (const auto& f : ra.files) {
    EXPECT_EQ(slurp(fs::path(a.out_dir) / f), slurp(fs::path(b.out_dir) / f)) << f;
    EXPECT_EQ(slurp(fs::path(a.out_dir) / f), slurp(fs::path(w.out_dir) / f)) << f;
  }
  EXPECT_NE(std::find(ra.files.begin(), ra.files.end(), "dsmc_eps1e-01.csv"), ra.files.end());
}

TEST(Consistency, SeedChangesTheOutput) {
  RunConfig a = small_consistency("seed_a"), b = small_consistency("seed_b");
  b.seed = a.seed + 1;
  (void)run_consistency(a);
  (void)run_consistency(b);
  EXPECT_NE(slurp(fs::path(a.out_dir) / "dsmc_eps1e-01.csv"), slurp(fs::path(b.out_dir) / "dsmc_eps1e-01.csv"));
}

TEST(Consistency, DuplicateEpsilonTagsAreRejected) {
  RunConfig c = small_consistency("dup");
  c.epsilons = {0.1, 0.1};
  EXPECT_THROW((void)run_consistency(c), ConfigError);
}

TEST(Consistency, MeansStayWithinStandardErrorsOnShortRuns) {
  RunConfig c;
  c.n_particles = 20000;
  const ConsistencyResult r = consistency_run(c, 0.01, 3.0);
  ASSERT_EQ(r.dsmc.size(), 4u);
  for (Population j : kPopulations) {
    EXPECT_LT(r.max_mean_z[j], 5.0) << name(j);
    EXPECT_LT(r.terminal_variance_dev[j], 0.05) << name(j);
  }
  for (Population j : kPopulations) {
    double mass = static_cast<double>(r.histogram.overflow[j]) / static_cast<double>(c.n_particles);
    for (double v : r.histogram.density[j]) mass += v * r.histogram.width();
    EXPECT_NEAR(mass, 1.0, 1e-12);
  }
}

TEST(Meanfield, ReducedRunWritesSnapshotsAndStaysBelowTheEnvelope) {
  RunConfig c;
  c.n_x = 201;
  c.horizon = 3.0;
  c.p_values = {0.75};
  c.fp_report_interval = 0.5;
  c.out_dir = fresh_dir("meanfield").string();
  const ExperimentReport r = run_meanfield(c);
  EXPECT_EQ(sorted(r.files), listing(c.out_dir));
  for (const char* f : {"density_t0.csv", "density_t1.csv", "metrics.csv", "density_equilibrium.csv"})
    EXPECT_NE(std::find(r.files.begin(), r.files.end(), f), r.files.end()) << f;
  EXPECT_EQ(r.headline["skipped_snapshot_times"].get<std::vector<double>>(), (std::vector<double>{8.0, 75.0}));
  EXPECT_LT(r.headline["max_mass_error"].get<double>(), 1e-12);
  EXPECT_EQ(line_count(fs::path(c.out_dir) / "metrics.csv"), 1u + 7u * 4u);

  const MeanfieldResult m = meanfield_run(c, 3.0);
  for (const auto& s : m.metrics) {
    const double e0 = m.metrics[static_cast<std::size_t>(&s - m.metrics.data()) / 7 * 7].energy;
    EXPECT_LE(s.energy, s.gronwall + 1e-12 * e0) << name(s.population) << " t=" << s.t;
    EXPECT_LE(s.fig5, 0.0);
  }
}
