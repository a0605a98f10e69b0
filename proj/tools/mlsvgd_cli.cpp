#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mlsvgd/config.hpp"
#include "mlsvgd/errors.hpp"
#include "mlsvgd/experiment.hpp"
#include "mlsvgd/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFlagged = 3;

int summary_status(const nlohmann::json& summary) {
  const bool flagged = summary.value("flagged_runs", 0) > 0 || !summary.value("gaps", nlohmann::json::array()).empty();
  return flagged ? kExitFlagged : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel Stein variational gradient descent experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string dir;
  std::string output_dir;
  std::string cost_mode;
  std::string problem;
  mlsvgd::RunOptions options;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run every schedule and replicate, then summarize");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed-offset", options.seed_offset, "Added to every replicate seed");
    sub->add_option("--cost-mode", cost_mode, "Cost weights")->check(CLI::IsMember({"measured", "analytic"}));
    sub->add_option("--output-dir", output_dir, "Overrides output_dir of the config");
  };
  add_common(run);
  run->add_option("--jobs", options.jobs, "Parallel jobs")->check(CLI::PositiveNumber);
  run->add_flag("--quiet", quiet, "No progress output");

  auto* summarize = app.add_subcommand("summarize", "Rebuild tables and summary.json from an artifact directory");
  summarize->add_option("dir", dir, "Artifact directory")->required()->check(CLI::ExistingDirectory);

  auto* mcmc_ref = app.add_subcommand("mcmc-ref", "Compute or load the DRAM reference at the finest level");
  mcmc_ref->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  mcmc_ref->add_option("--output-dir", output_dir, "Overrides output_dir of the config");

  auto* rates = app.add_subcommand("rates", "Fit cost and KL exponents of the hierarchy");
  add_common(rates);
  rates->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* defaults = app.add_subcommand("config", "Print the default config of a problem type");
  defaults->add_option("problem", problem, "Problem type")
      ->required()
      ->check(CLI::IsMember({"diffusion-reaction", "beam", "gaussian-hierarchy"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (!cost_mode.empty()) options.cost_mode = mlsvgd::cost_mode_from_string(cost_mode);
    auto load = [&]() {
      auto config = mlsvgd::load_config(config_path);
      if (!output_dir.empty()) config.output_dir = output_dir;
      return mlsvgd::effective_config(config, options);
    };

    if (*run) {
      if (!quiet) options.progress = &std::cerr;
      auto config = mlsvgd::load_config(config_path);
      if (!output_dir.empty()) config.output_dir = output_dir;
      const auto summary = mlsvgd::run_experiment(config, options);
      std::cout << summary.dump(2) << "\n";
      return summary_status(summary);
    }
    if (*summarize) {
      const auto summary = mlsvgd::summarize(dir);
      std::cout << summary.dump(2) << "\n";
      return summary_status(summary);
    }
    if (*mcmc_ref) {
      const auto config = load();
      const auto ref = mlsvgd::load_or_compute_reference(config, config.output_dir);
      std::cout << mlsvgd::to_json(ref).dump(2) << "\n";
      return kExitOk;
    }
    if (*rates) {
      const auto config = load();
      const auto result = mlsvgd::compute_rates(config);
      const auto j = result.to_json();
      std::filesystem::create_directories(config.output_dir);
      mlsvgd::io::write_file_atomic((std::filesystem::path(config.output_dir) / "rates.json").string(), j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
      return kExitOk;
    }
    if (*defaults) {
      std::cout << mlsvgd::to_json(mlsvgd::default_config(problem)).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const mlsvgd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
