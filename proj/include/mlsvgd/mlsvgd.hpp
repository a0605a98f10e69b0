#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlsvgd/svgd.hpp"

namespace mlsvgd {

/// Strictly increasing, nonempty list of 1-based levels; the last entry must
/// be the highest level of the hierarchy it runs on.
class LevelSchedule {
 public:
  explicit LevelSchedule(std::vector<int> levels);

  const std::vector<int>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  int finest() const { return levels_.back(); }

  /// Throws std::invalid_argument unless every level exists in a hierarchy of
  /// `hierarchy_size` levels and the last entry is that size.
  void check_against(std::size_t hierarchy_size) const;

  std::string to_string() const;  // e.g. "1-2-3"

 private:
  std::vector<int> levels_;
};

struct LevelCost {
  int level = 0;
  double cost_weight = 0;
  long iterations = 0;
  long score_evaluations = 0;
  long density_evaluations = 0;
};

/// Discrete cost model: a level contributes c_l * n_l * N.
struct CostLedger {
  long particle_count = 0;
  std::vector<LevelCost> levels;  // one entry per visited segment, in visit order

  /// Running total accumulated during the run.
  double cumulative_cost = 0;
};

/// sum_l c_l * n_l * N, evaluated in segment order.
double cost_of_run(const CostLedger& ledger);

struct RunReport {
  ParticleEnsemble<double> ensemble;
  IterationTrace trace;
  std::vector<std::size_t> switch_indices;  // trace index at which each segment starts
  CostLedger ledger;
  std::vector<bool> tolerance_reached;       // one flag per segment
  double wall_seconds = 0;

  bool all_tolerances_reached() const;
};

struct MlsvgdOptions {
  /// Per-segment tolerances overriding SvgdConfig::tolerance; empty means uniform.
  std::vector<double> level_tolerances;
  std::function<void(const IterationRecord&, const ParticleEnsemble<double>&)> observer;
};

/// Chains single-level runs over the scheduled levels, each starting from the
/// previous level's final ensemble. A level that exhausts max_iterations is
/// flagged and the run proceeds to the next level.
RunReport run_mlsvgd(const ParticleEnsemble<double>& initial, const Hierarchy& hierarchy,
                     const LevelSchedule& schedule, const RbfKernel<double>& kernel, const SvgdConfig& config,
                     const MlsvgdOptions& options = {});

nlohmann::json to_json(const CostLedger& ledger);
/// Metadata, ledger and switch indices; trace and ensemble go to CSV files.
nlohmann::json to_json(const RunReport& report);

}  // namespace mlsvgd
