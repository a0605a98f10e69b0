#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlsvgd/config.hpp"
#include "mlsvgd/dram.hpp"
#include "mlsvgd/mlsvgd.hpp"
#include "mlsvgd/rates.hpp"

namespace mlsvgd {

/// Options that do not change results (except seed_offset, which is folded
/// into the effective config before hashing).
struct RunOptions {
  int jobs = 1;
  std::uint64_t seed_offset = 0;
  std::optional<CostMode> cost_mode;
  std::ostream* progress = nullptr;
};

/// Config with the command-line overrides applied.
ExperimentConfig effective_config(const ExperimentConfig& config, const RunOptions& options);

/// One weight per level, measured or analytic.
struct CostCalibration {
  CostMode mode = CostMode::Analytic;
  std::vector<double> weights;
  nlohmann::json to_json() const;
};

CostCalibration calibrate_costs(const ExperimentConfig& config, const Hierarchy& hierarchy);

/// Gradient ascent with backtracking on the log-density from `start`; stops
/// after `steps` accepted moves or when no step improves the density.
Eigen::VectorXd local_mode(const TargetLevel& target, const Eigen::VectorXd& start, double initial_step, long steps);

struct Reference {
  std::string key;  // hash of the problem and reference settings
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd initial_state;
  nlohmann::json summary;
};

/// DRAM at the highest level. Samples are returned through `chain` if given.
Reference compute_reference(const ExperimentConfig& config, const BuiltProblem& built, Chain* chain = nullptr);
std::string reference_key(const ExperimentConfig& config);
nlohmann::json to_json(const Reference& reference);
Reference reference_from_json(const nlohmann::json& j);

/// Reads `<dir>/reference.json` when its key matches, otherwise computes and
/// writes it (plus reference_samples.csv when configured).
Reference load_or_compute_reference(const ExperimentConfig& config, const std::string& dir);

/// Particle mean after each iteration of a run.
struct MeanPoint {
  long iteration = 0;
  int level = 0;
  double cum_cost = 0;
  double wall_seconds = 0;
  Eigen::VectorXd mean;
};

struct RunRecord {
  std::string schedule;  // e.g. "1-2-3"
  std::uint64_t seed = 0;
  RunReport report;
  std::vector<MeanPoint> means;
};

/// One replicate of one schedule with the given cost weights.
RunRecord run_one(const ExperimentConfig& config, const std::vector<int>& schedule, std::uint64_t seed,
                  const std::vector<double>& cost_weights);

/// Cost of a run at the first iteration of its final segment with grad_norm <= tol.
std::optional<double> cost_to_tolerance(const IterationTrace& trace, const std::vector<std::size_t>& switch_indices,
                                        double tolerance);
std::optional<double> wall_to_tolerance(const IterationTrace& trace, const std::vector<std::size_t>& switch_indices,
                                        double tolerance);

/// Replicate error curve: at every recorded cost, the mean error metric over
/// all replicates using each replicate's latest mean at or below that cost.
struct ErrorPoint {
  double cum_cost = 0;
  double mean_error = 0;
};
std::vector<ErrorPoint> error_vs_cost(const Eigen::VectorXd& reference, const std::vector<std::vector<MeanPoint>>& runs);

/// Smallest cost after which the error curve stays at or below `target`.
std::optional<double> cost_to_error(const std::vector<ErrorPoint>& curve, double target);

/// Runs every (schedule, seed) job, writes per-run artifacts, the cached
/// reference and the aggregated tables. Returns the summary JSON.
nlohmann::json run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Rebuilds speedup and error tables plus summary.json from an artifact
/// directory. Missing runs are listed under "gaps".
nlohmann::json summarize(const std::string& dir);

/// Cost and KL exponents of the configured hierarchy. PDE problems use DRAM
/// chains per level and the unnormalized KL estimator against the proxy level.
struct RatesResult {
  RateFitReport report;
  std::vector<double> kl_std_errors;
  nlohmann::json to_json() const;
};
RatesResult compute_rates(const ExperimentConfig& config);

/// "# config_hash=...,seed=...,cost_mode=..." line prefixed to CSV outputs.
std::string provenance_comment(const std::string& hash, std::optional<std::uint64_t> seed, CostMode mode);

std::string schedule_name(const std::vector<int>& schedule);

}  // namespace mlsvgd
