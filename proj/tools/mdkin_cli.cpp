// Command-line driver for the batch experiments.

#include "mdkin/mdkin.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> preset;
  std::vector<double> epsilons;
  std::vector<double> p_values;
  std::optional<double> nu;
  std::optional<double> horizon;
  std::optional<int> workers;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Configuration file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master random seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--preset", o.preset, "Initial-mean preset")->check(CLI::IsMember({"fig1", "sec41"}));
  cmd->add_option("--epsilon", o.epsilons, "Comma-separated scaling list for consistency runs")->delimiter(',');
  cmd->add_option("--p", o.p_values, "Comma-separated energy-distance exponents")->delimiter(',');
  cmd->add_option("--nu", o.nu, "Therapy efficacy nu_control");
  cmd->add_option("--horizon", o.horizon, "Final time");
  cmd->add_option("--workers", o.workers, "OpenMP worker threads (0 = default)");
}

mdkin::RunConfig load(const Overrides& o) {
  mdkin::RunConfig c = o.config_path.empty() ? mdkin::RunConfig{} : mdkin::parse_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.preset) c.preset = *o.preset;
  if (!o.epsilons.empty()) c.epsilons = o.epsilons;
  if (!o.p_values.empty()) c.p_values = o.p_values;
  if (o.nu) c.params.nu_control = *o.nu;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.workers) c.workers = *o.workers;
  mdkin::check_config(c);
  return c;
}

void print_report(const mdkin::ExperimentReport& r, double seconds) {
  std::cout << "experiment: " << r.experiment << "\n";
  std::cout << "files:\n";
  for (const auto& f : r.files) std::cout << "  " << f << "\n";
  std::cout << "headline:\n" << r.headline.dump(2) << "\n";
  std::cout << "elapsed: " << seconds << " s\n";
}

void print_config(const mdkin::RunConfig& c) {
  using mdkin::Population;
  for (Population j : mdkin::kPopulations) {
    const std::string s{mdkin::name(j)};
    std::cout << "beta_" << s << " = " << c.params.beta[j] << "\n";
    std::cout << "sigma2_" << s << " = " << c.params.sigma2[j] << "\n";
  }
  std::cout << "gamma_M = " << c.params.gamma_M << "\ngamma_C = " << c.params.gamma_C
            << "\nnu_control = " << c.params.nu_control << "\nepsilon = " << c.params.epsilon << "\n";
  std::cout << "preset = " << c.preset.value_or("(per experiment)") << "\n";
  std::cout << "L = " << c.L << "\nn_x = " << c.n_x << "\nn_particles = " << c.n_particles
            << "\nseed = " << c.seed << "\nout_dir = " << c.out_dir << "\n";
  std::cout << "horizon = " << (c.horizon ? std::to_string(*c.horizon) : std::string("(per experiment)")) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic and mean-field simulations of muscle damage and immune response"};
  app.footer(mdkin::config_reference());
  app.require_subcommand(1);

  Overrides o;
  auto* moments = app.add_subcommand("moments", "Integrate the mean and variance ODEs (default preset fig1)");
  auto* consistency = app.add_subcommand("consistency", "Particle runs for each epsilon against the moment ODEs");
  auto* meanfield = app.add_subcommand("meanfield", "Fokker-Planck run with energy distances and envelopes");
  auto* therapy = app.add_subcommand("therapy", "Moment run with therapy (nu_control defaults to 0.1)");
  auto* validate = app.add_subcommand("validate-config", "Parse and check a configuration file");
  for (auto* cmd : {moments, consistency, meanfield, therapy, validate}) add_common_flags(cmd, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const mdkin::RunConfig config = load(o);
    if (validate->parsed()) {
      print_config(config);
      std::cout << "configuration OK\n";
      return 0;
    }
    const auto start = std::chrono::steady_clock::now();
    mdkin::ExperimentReport report;
    if (moments->parsed()) report = mdkin::run_moments(config);
    else if (consistency->parsed()) report = mdkin::run_consistency(config);
    else if (meanfield->parsed()) report = mdkin::run_meanfield(config);
    else report = mdkin::run_therapy(config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    print_report(report, seconds);
  } catch (const mdkin::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
