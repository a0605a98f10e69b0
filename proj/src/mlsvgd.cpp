#include "mlsvgd/mlsvgd.hpp"

#include <algorithm>
#include <stdexcept>

namespace mlsvgd {

LevelSchedule::LevelSchedule(std::vector<int> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("LevelSchedule: schedule is empty");
  if (levels_.front() < 1) throw std::invalid_argument("LevelSchedule: levels are 1-based");
  for (std::size_t k = 1; k < levels_.size(); ++k) {
    if (levels_[k] <= levels_[k - 1]) {
      throw std::invalid_argument("LevelSchedule: levels must be strictly increasing");
    }
  }
}

void LevelSchedule::check_against(std::size_t hierarchy_size) const {
  if (static_cast<std::size_t>(levels_.back()) != hierarchy_size) {
    throw std::invalid_argument("LevelSchedule: last level " + std::to_string(levels_.back()) +
                                " is not the highest available level " + std::to_string(hierarchy_size));
  }
}

std::string LevelSchedule::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (k) out += '-';
    out += std::to_string(levels_[k]);
  }
  return out;
}

double cost_of_run(const CostLedger& ledger) {
  double total = 0.0;
  for (const auto& level : ledger.levels) {
    // Same association as the per-step trace cost, (c_l * N) * n_l.
    total += level.cost_weight * static_cast<double>(ledger.particle_count) * static_cast<double>(level.iterations);
  }
  return total;
}

bool RunReport::all_tolerances_reached() const {
  return std::all_of(tolerance_reached.begin(), tolerance_reached.end(), [](bool b) { return b; });
}

RunReport run_mlsvgd(const ParticleEnsemble<double>& initial, const Hierarchy& hierarchy,
                     const LevelSchedule& schedule, const RbfKernel<double>& kernel, const SvgdConfig& config,
                     const MlsvgdOptions& options) {
  config.validate();
  schedule.check_against(hierarchy.size());
  if (!options.level_tolerances.empty() && options.level_tolerances.size() != schedule.size()) {
    throw std::invalid_argument("run_mlsvgd: need one tolerance per scheduled level");
  }

  RunReport report;
  report.ledger.particle_count = initial.count();
  SegmentContext context;
  context.clock_start = std::chrono::steady_clock::now();
  context.observer = options.observer;

  ParticleEnsemble<double> ensemble = initial;
  for (std::size_t segment = 0; segment < schedule.size(); ++segment) {
    const TargetLevel& target = *hierarchy.at(static_cast<std::size_t>(schedule.levels()[segment] - 1));
    SvgdConfig segment_config = config;
    if (!options.level_tolerances.empty()) segment_config.tolerance = options.level_tolerances[segment];

    const long scores_before = target.score_evaluations();
    const long densities_before = target.density_evaluations();
    context.base_cost = report.ledger.cumulative_cost;
    report.switch_indices.push_back(report.trace.size());

    auto result = run_single_level(std::move(ensemble), target, kernel, segment_config, context);

    LevelCost cost;
    cost.level = target.level();
    cost.cost_weight = target.cost_weight();
    cost.iterations = result.iterations;
    cost.score_evaluations = target.score_evaluations() - scores_before;
    cost.density_evaluations = target.density_evaluations() - densities_before;
    report.ledger.levels.push_back(cost);
    report.ledger.cumulative_cost = cost_of_run(report.ledger);

    report.trace.insert(report.trace.end(), result.trace.begin(), result.trace.end());
    report.tolerance_reached.push_back(result.tolerance_reached);
    ensemble = std::move(result.ensemble);
  }
  report.ensemble = std::move(ensemble);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - context.clock_start).count();
  return report;
}

nlohmann::json to_json(const CostLedger& ledger) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : ledger.levels) {
    levels.push_back({{"level", l.level},
                      {"cost_weight", l.cost_weight},
                      {"iterations", l.iterations},
                      {"score_evaluations", l.score_evaluations},
                      {"density_evaluations", l.density_evaluations}});
  }
  return {{"particle_count", ledger.particle_count},
          {"levels", levels},
          {"cumulative_cost", ledger.cumulative_cost}};
}

nlohmann::json to_json(const RunReport& report) {
  nlohmann::json flags = nlohmann::json::array();
  for (bool b : report.tolerance_reached) flags.push_back(b);
  return {{"ledger", to_json(report.ledger)},
          {"model_cost", cost_of_run(report.ledger)},
          {"switch_indices", report.switch_indices},
          {"tolerance_reached", flags},
          {"all_tolerances_reached", report.all_tolerances_reached()},
          {"iterations", report.trace.size()},
          {"final_grad_norm", report.trace.empty() ? 0.0 : report.trace.back().grad_norm},
          {"wall_seconds", report.wall_seconds},
          {"count", report.ensemble.count()},
          {"dim", report.ensemble.dim()}};
}

}  // namespace mlsvgd
