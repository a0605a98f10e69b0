#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlsvgd/bayes.hpp"

namespace mlsvgd {

enum class CostMode { Measured, Analytic };

std::string to_string(CostMode mode);
CostMode cost_mode_from_string(const std::string& name);

struct InitialEnsembleSpec {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // diagonal
};

/// DRAM reference at the highest level.
struct ReferenceSpec {
  bool enabled = true;
  long burn_in = 10000;
  long samples = 20000;
  long stride = 2;
  double initial_proposal_var = 1e-2;
  std::uint64_t seed = 101;
  /// Chain start; absent means the local mode reached by gradient ascent
  /// from the initial-ensemble mean.
  std::optional<Eigen::VectorXd> initial_state;
  long mode_search_steps = 2000;
  double mode_search_step = 1e-5;
  bool write_samples = false;
};

/// Per-level DRAM chains for the KL-versus-level fit of a PDE hierarchy.
struct RatesSpec {
  int proxy_level = 0;  // 0 means levels + 1
  long burn_in = 2000;
  long samples = 8000;
  long stride = 4;
  std::uint64_t seed = 202;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemSpec problem = GaussianHierarchyProblem{};
  Eigen::Index particles = 100;
  double step_size = 0.1;
  double bandwidth = 1.0;
  double tolerance = 1e-3;
  long max_iterations = 50000;
  InitialEnsembleSpec initial;
  std::vector<std::vector<int>> schedules;  // multilevel schedules
  bool baseline = true;                     // also run the single-level schedule {L}
  std::vector<std::uint64_t> seeds{1};
  CostMode cost_mode = CostMode::Measured;
  std::vector<double> analytic_costs;       // per level; empty means the default weights
  int calibration_repeats = 20;
  std::vector<double> level_tolerances;     // optional per-level override of tolerance
  std::vector<double> speedup_tolerances;   // tolerances at which SL/ML cost ratios are tabulated
  std::vector<double> error_targets;        // mean-error levels at which cost ratios are tabulated
  ReferenceSpec reference;
  RatesSpec rates;
  std::string output_dir = "out";

  int levels() const;
  Eigen::Index dim() const;
};

/// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& config);

/// Strict parse: unknown keys and wrong types are ConfigErrors; absent keys
/// take the defaults of the problem type.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// 16 hex digits of 64-bit FNV-1a.
std::string fnv1a_hex(const std::string& text);
/// fnv1a_hex of the canonical JSON dump without output_dir.
std::string config_hash(const ExperimentConfig& config);

/// Defaults for "diffusion-reaction", "beam" or "gaussian-hierarchy".
ExperimentConfig default_config(const std::string& problem_type);

std::string problem_type(const ProblemSpec& problem);

/// Analytic cost weight of a level when none is configured: grid unknowns
/// for the PDE problems, cost_scale * base^(gamma l) for the Gaussian hierarchy.
double default_analytic_cost(const ProblemSpec& problem, int level);

}  // namespace mlsvgd
