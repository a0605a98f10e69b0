#include "mlsvgd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "mlsvgd/bayes.hpp"
#include "mlsvgd/divergence.hpp"
#include "mlsvgd/errors.hpp"
#include "mlsvgd/io.hpp"

namespace mlsvgd {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string schedule_name(const std::vector<int>& schedule) {
  std::string out;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i > 0) out += "-";
    out += std::to_string(schedule[i]);
  }
  return out;
}

std::string provenance_comment(const std::string& hash, std::optional<std::uint64_t> seed, CostMode mode) {
  std::string out = "# config_hash=" + hash;
  if (seed) out += ",seed=" + std::to_string(*seed);
  out += ",cost_mode=" + to_string(mode) + "\n";
  return out;
}

ExperimentConfig effective_config(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentConfig out = config;
  for (auto& s : out.seeds) s += options.seed_offset;
  if (options.cost_mode) out.cost_mode = *options.cost_mode;
  validate(out);
  return out;
}

json CostCalibration::to_json() const {
  return {{"cost_mode", to_string(mode)}, {"weights", weights}};
}

CostCalibration calibrate_costs(const ExperimentConfig& config, const Hierarchy& hierarchy) {
  CostCalibration out;
  out.mode = config.cost_mode;
  for (int l = 1; l <= config.levels(); ++l) {
    if (config.cost_mode == CostMode::Measured) {
      out.weights.push_back(measure_density_cost(*hierarchy.at(l - 1), config.initial.mean, config.calibration_repeats));
    } else if (!config.analytic_costs.empty()) {
      out.weights.push_back(config.analytic_costs[static_cast<std::size_t>(l - 1)]);
    } else {
      out.weights.push_back(default_analytic_cost(config.problem, l));
    }
  }
  return out;
}

namespace {

double safe_log_density(const TargetLevel& target, const Eigen::VectorXd& x) {
  try {
    const double v = target.log_density(x);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  } catch (const RunError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

Eigen::VectorXd local_mode(const TargetLevel& target, const Eigen::VectorXd& start, double initial_step, long steps) {
  Eigen::VectorXd x = start;
  double fx = safe_log_density(target, x);
  if (!std::isfinite(fx)) throw RunError("local_mode: start has zero density: " + describe_vector(start));
  double h = initial_step;
  for (long k = 0; k < steps; ++k) {
    const Eigen::VectorXd g = target.score(x);
    if (!g.allFinite() || g.norm() == 0.0) break;
    bool moved = false;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::VectorXd y = x + h * g;
      const double fy = safe_log_density(target, y);
      if (fy > fx) {
        x = y;
        fx = fy;
        h *= 2.0;
        moved = true;
        break;
      }
      h *= 0.5;
    }
    if (!moved) break;
  }
  return x;
}

std::string reference_key(const ExperimentConfig& config) {
  const json full = to_json(config);
  json key = {{"problem", full.at("problem")}, {"reference", full.at("reference")}};
  if (!config.reference.initial_state) key["initial_mean"] = full.at("initial").at("mean");
  return fnv1a_hex(key.dump());
}

Reference compute_reference(const ExperimentConfig& config, const BuiltProblem& built, Chain* chain_out) {
  const TargetLevel& target = *built.hierarchy.back();
  const ReferenceSpec& spec = config.reference;
  DramConfig dram;
  dram.initial_state = spec.initial_state
                           ? *spec.initial_state
                           : local_mode(target, config.initial.mean, spec.mode_search_step, spec.mode_search_steps);
  dram.initial_proposal_var = spec.initial_proposal_var;
  dram.burn_in = spec.burn_in;
  dram.samples = spec.samples;
  dram.stride = spec.stride;
  dram.seed = spec.seed;
  Chain chain = dram_sample(target, dram);

  Reference out;
  out.key = reference_key(config);
  out.mean = reference_mean(chain);
  out.covariance = sample_covariance(chain);
  out.initial_state = dram.initial_state;
  out.summary = chain_summary_json(chain, dram);
  out.summary["level"] = target.level();
  if (chain_out) *chain_out = std::move(chain);
  return out;
}

json to_json(const Reference& r) {
  return {{"key", r.key},
          {"mean", io::vector_json(r.mean)},
          {"covariance", io::matrix_json(r.covariance)},
          {"initial_state", io::vector_json(r.initial_state)},
          {"chain", r.summary}};
}

Reference reference_from_json(const json& j) {
  Reference r;
  r.key = j.at("key").get<std::string>();
  r.mean = io::vector_from_json(j.at("mean"));
  r.covariance = io::matrix_from_json(j.at("covariance"));
  r.initial_state = io::vector_from_json(j.at("initial_state"));
  r.summary = j.value("chain", json::object());
  return r;
}

Reference load_or_compute_reference(const ExperimentConfig& config, const std::string& dir) {
  const fs::path path = fs::path(dir) / "reference.json";
  const std::string key = reference_key(config);
  const json provenance = {{"config_hash", config_hash(config)},
                           {"seed", config.reference.seed},
                           {"cost_mode", to_string(config.cost_mode)}};
  if (fs::exists(path)) {
    try {
      json stored = json::parse(io::read_file(path.string()));
      Reference cached = reference_from_json(stored);
      if (cached.key == key) {
        if (stored.value("provenance", json()) != provenance) {
          stored["provenance"] = provenance;
          io::write_file_atomic(path.string(), stored.dump(2) + "\n");
        }
        return cached;
      }
    } catch (const std::exception&) {
      // unreadable cache: recompute
    }
  }
  const BuiltProblem built = make_hierarchy(config.problem);
  Chain chain;
  Reference ref = compute_reference(config, built, &chain);
  fs::create_directories(dir);
  json out = to_json(ref);
  out["provenance"] = provenance;
  io::write_file_atomic(path.string(), out.dump(2) + "\n");
  if (config.reference.write_samples) {
    io::write_file_atomic((fs::path(dir) / "reference_samples.csv").string(),
                          provenance_comment(config_hash(config), config.reference.seed, config.cost_mode) +
                              chain_samples_csv(chain));
  }
  return ref;
}

RunRecord run_one(const ExperimentConfig& config, const std::vector<int>& schedule, std::uint64_t seed,
                  const std::vector<double>& cost_weights) {
  const BuiltProblem built = make_hierarchy(config.problem);
  for (std::size_t l = 0; l < built.hierarchy.size(); ++l) built.hierarchy[l]->set_cost_weight(cost_weights.at(l));

  const auto initial = init_ensemble<double>(config.particles, config.initial.mean, config.initial.variance, seed);
  SvgdConfig svgd;
  svgd.step_size = config.step_size;
  svgd.tolerance = config.tolerance;
  svgd.max_iterations = config.max_iterations;
  const RbfKernel<double> kernel(config.bandwidth);

  RunRecord record;
  record.schedule = schedule_name(schedule);
  record.seed = seed;
  MlsvgdOptions options;
  for (int l : schedule) {
    if (!config.level_tolerances.empty()) {
      options.level_tolerances.push_back(config.level_tolerances.at(static_cast<std::size_t>(l - 1)));
    }
  }
  options.observer = [&record](const IterationRecord& it, const ParticleEnsemble<double>& ensemble) {
    record.means.push_back({it.iteration, it.level, it.cum_cost, it.wall_seconds,
                            ensemble.particles.colwise().mean().transpose()});
  };
  record.report = run_mlsvgd(initial, built.hierarchy, LevelSchedule(schedule), kernel, svgd, options);
  return record;
}

namespace {

template <typename Field>
std::optional<double> first_in_final_segment(const IterationTrace& trace, const std::vector<std::size_t>& switches,
                                             double tolerance, Field field) {
  const std::size_t start = switches.empty() ? 0 : switches.back();
  for (std::size_t i = start; i < trace.size(); ++i) {
    if (trace[i].grad_norm <= tolerance) return field(trace[i]);
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> cost_to_tolerance(const IterationTrace& trace, const std::vector<std::size_t>& switch_indices,
                                        double tolerance) {
  return first_in_final_segment(trace, switch_indices, tolerance, [](const IterationRecord& r) { return r.cum_cost; });
}

std::optional<double> wall_to_tolerance(const IterationTrace& trace, const std::vector<std::size_t>& switch_indices,
                                        double tolerance) {
  return first_in_final_segment(trace, switch_indices, tolerance,
                                [](const IterationRecord& r) { return r.wall_seconds; });
}

std::vector<ErrorPoint> error_vs_cost(const Eigen::VectorXd& reference, const std::vector<std::vector<MeanPoint>>& runs) {
  std::vector<double> costs;
  for (const auto& run : runs) {
    if (run.empty()) return {};
    for (const auto& p : run) costs.push_back(p.cum_cost);
  }
  std::sort(costs.begin(), costs.end());
  costs.erase(std::unique(costs.begin(), costs.end()), costs.end());

  // Every replicate must have a point at or below the cost.
  double start = 0;
  for (const auto& run : runs) start = std::max(start, run.front().cum_cost);

  std::vector<std::size_t> cursor(runs.size(), 0);
  std::vector<ErrorPoint> out;
  for (double c : costs) {
    if (c < start) continue;
    double sum = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      while (cursor[r] + 1 < runs[r].size() && runs[r][cursor[r] + 1].cum_cost <= c) ++cursor[r];
      sum += (reference - runs[r][cursor[r]].mean).norm();
    }
    out.push_back({c, sum / static_cast<double>(runs.size())});
  }
  return out;
}

std::optional<double> cost_to_error(const std::vector<ErrorPoint>& curve, double target) {
  std::optional<double> out;
  for (const auto& p : curve) {
    if (p.mean_error > target) {
      out.reset();
    } else if (!out) {
      out = p.cum_cost;
    }
  }
  return out;
}

namespace {

std::string means_to_csv(const std::vector<MeanPoint>& means) {
  std::ostringstream out;
  out << "iteration,level,cum_cost,wall_seconds";
  const Eigen::Index d = means.empty() ? 0 : means.front().mean.size();
  for (Eigen::Index k = 0; k < d; ++k) out << ",theta_" << (k + 1);
  out << "\n";
  for (const auto& p : means) {
    out << p.iteration << "," << p.level << "," << io::format_double(p.cum_cost) << ","
        << io::format_double(p.wall_seconds);
    for (Eigen::Index k = 0; k < d; ++k) out << "," << io::format_double(p.mean(k));
    out << "\n";
  }
  return out.str();
}

std::vector<MeanPoint> means_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<MeanPoint> out;
  if (!io::next_data_line(in, line)) return out;  // header
  while (io::next_data_line(in, line)) {
    const auto cells = io::split_csv_line(line);
    if (cells.size() < 4) throw std::runtime_error("means csv: short row");
    MeanPoint p;
    p.iteration = std::stol(cells[0]);
    p.level = std::stoi(cells[1]);
    p.cum_cost = std::stod(cells[2]);
    p.wall_seconds = std::stod(cells[3]);
    p.mean.resize(static_cast<Eigen::Index>(cells.size() - 4));
    for (std::size_t k = 4; k < cells.size(); ++k) p.mean(static_cast<Eigen::Index>(k - 4)) = std::stod(cells[k]);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::vector<int>> all_schedules(const ExperimentConfig& config) {
  std::vector<std::vector<int>> out = config.schedules;
  if (config.baseline) {
    const std::vector<int> single{config.levels()};
    if (std::find(out.begin(), out.end(), single) == out.end()) out.push_back(single);
  }
  return out;
}

fs::path run_dir(const fs::path& root, const std::string& schedule, std::uint64_t seed) {
  return root / "runs" / schedule / ("seed_" + std::to_string(seed));
}

void write_run(const fs::path& dir, const RunRecord& record, const std::string& hash, CostMode mode) {
  fs::create_directories(dir);
  const std::string comment = provenance_comment(hash, record.seed, mode);
  const json provenance = {{"config_hash", hash}, {"seed", record.seed}, {"cost_mode", to_string(mode)}};
  const auto& report = record.report;

  io::write_file_atomic((dir / "trace.csv").string(), comment + trace_to_csv(report.trace));
  io::write_file_atomic((dir / "means.csv").string(), comment + means_to_csv(record.means));

  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < report.ensemble.dim(); ++k) header.push_back("theta_" + std::to_string(k + 1));
  io::write_file_atomic((dir / "ensemble.csv").string(), comment + io::matrix_to_csv(report.ensemble.particles, header));
  const json meta = {{"count", report.ensemble.count()},     {"dim", report.ensemble.dim()},
                     {"level_index", report.ensemble.level_index}, {"iteration", report.ensemble.iteration},
                     {"seed", record.seed},                  {"provenance", provenance}};
  io::write_file_atomic((dir / "ensemble.json").string(), meta.dump(2) + "\n");

  json rj = to_json(report);
  rj["schedule"] = record.schedule;
  rj["provenance"] = provenance;
  io::write_file_atomic((dir / "report.json").string(), rj.dump(2) + "\n");
}

void write_failure(const fs::path& dir, const std::string& schedule, std::uint64_t seed, const std::string& what,
                   const std::string& hash, CostMode mode) {
  fs::create_directories(dir);
  const json rj = {{"schedule", schedule},
                   {"error", what},
                   {"all_tolerances_reached", false},
                   {"provenance", {{"config_hash", hash}, {"seed", seed}, {"cost_mode", to_string(mode)}}}};
  io::write_file_atomic((dir / "report.json").string(), rj.dump(2) + "\n");
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_cell(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

}  // namespace

json run_experiment(const ExperimentConfig& base_config, const RunOptions& options) {
  const ExperimentConfig config = effective_config(base_config, options);
  const std::string hash = config_hash(config);
  const fs::path root(config.output_dir);
  fs::create_directories(root);

  json cfg = to_json(config);
  cfg["config_hash"] = hash;
  io::write_file_atomic((root / "config.json").string(), cfg.dump(2) + "\n");

  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.progress) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    *options.progress << msg << std::endl;
  };

  CostCalibration costs;
  {
    const BuiltProblem built = make_hierarchy(config.problem);
    costs = calibrate_costs(config, built.hierarchy);
  }
  json cj = costs.to_json();
  cj["config_hash"] = hash;
  io::write_file_atomic((root / "costs.json").string(), cj.dump(2) + "\n");
  log("cost weights: " + json(costs.weights).dump());

  if (config.reference.enabled) {
    log("reference chain");
    load_or_compute_reference(config, root.string());
  }

  struct Job {
    std::vector<int> schedule;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& s : all_schedules(config)) {
    for (auto seed : config.seeds) jobs.push_back({s, seed});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const std::string name = schedule_name(job.schedule);
      const fs::path dir = run_dir(root, name, job.seed);
      try {
        const RunRecord record = run_one(config, job.schedule, job.seed, costs.weights);
        write_run(dir, record, hash, config.cost_mode);
        log("schedule " + name + " seed " + std::to_string(job.seed) + ": " +
            std::to_string(record.report.trace.size()) + " iterations, cost " +
            io::format_double(cost_of_run(record.report.ledger)) +
            (record.report.all_tolerances_reached() ? "" : " (flagged)"));
      } catch (const RunError& e) {
        write_failure(dir, name, job.seed, e.what(), hash, config.cost_mode);
        log("schedule " + name + " seed " + std::to_string(job.seed) + " failed: " + e.what());
      }
    }
  };
  const int threads = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return summarize(root.string());
}

json summarize(const std::string& dir) {
  const fs::path root(dir);
  const json cfg = json::parse(io::read_file((root / "config.json").string()));
  json stripped = cfg;
  stripped.erase("config_hash");
  const ExperimentConfig config = config_from_json(stripped);
  const std::string hash = cfg.value("config_hash", config_hash(config));
  const std::string comment = provenance_comment(hash, std::nullopt, config.cost_mode);

  std::optional<Reference> reference;
  if (fs::exists(root / "reference.json")) {
    reference = reference_from_json(json::parse(io::read_file((root / "reference.json").string())));
  }

  struct Loaded {
    std::uint64_t seed;
    json report;
    IterationTrace trace;
    std::vector<MeanPoint> means;
  };
  const auto schedules = all_schedules(config);
  std::map<std::string, std::vector<Loaded>> runs;
  json gaps = json::array();
  int flagged = 0;
  for (const auto& s : schedules) {
    const std::string name = schedule_name(s);
    for (auto seed : config.seeds) {
      const fs::path rd = run_dir(root, name, seed);
      if (!fs::exists(rd / "report.json")) {
        gaps.push_back({{"schedule", name}, {"seed", seed}, {"reason", "missing"}});
        continue;
      }
      Loaded l{seed, json::parse(io::read_file((rd / "report.json").string())), {}, {}};
      if (!l.report.value("all_tolerances_reached", false)) ++flagged;
      if (l.report.contains("error")) {
        gaps.push_back({{"schedule", name}, {"seed", seed}, {"reason", l.report["error"]}});
        continue;
      }
      l.trace = trace_from_csv(io::read_file((rd / "trace.csv").string()));
      if (fs::exists(rd / "means.csv")) l.means = means_from_csv(io::read_file((rd / "means.csv").string()));
      runs[name].push_back(std::move(l));
    }
  }

  const std::string baseline = schedule_name({config.levels()});
  json summary = {{"config_hash", hash}, {"cost_mode", to_string(config.cost_mode)}, {"gaps", gaps},
                  {"flagged_runs", flagged}, {"baseline", baseline}};
  if (reference) summary["reference_mean"] = io::vector_json(reference->mean);

  // Model cost quantiles per schedule.
  json per_schedule = json::object();
  for (const auto& [name, list] : runs) {
    std::vector<double> c, w;
    for (const auto& l : list) {
      c.push_back(l.report.at("model_cost").get<double>());
      w.push_back(l.report.at("wall_seconds").get<double>());
    }
    per_schedule[name] = {{"runs", list.size()},
                          {"model_cost", {{"min", quantile(c, 0)}, {"median", quantile(c, 0.5)}, {"max", quantile(c, 1)}}},
                          {"wall_seconds", {{"median", quantile(w, 0.5)}}}};
  }
  summary["schedules"] = per_schedule;

  // Cost to reach each tolerance, median over replicates.
  auto median_to = [&](const std::string& name, double tol, bool wall) -> std::pair<std::optional<double>, int> {
    std::vector<double> v;
    const auto it = runs.find(name);
    if (it == runs.end()) return {std::nullopt, 0};
    for (const auto& l : it->second) {
      const auto sw = l.report.at("switch_indices").get<std::vector<std::size_t>>();
      const auto c = wall ? wall_to_tolerance(l.trace, sw, tol) : cost_to_tolerance(l.trace, sw, tol);
      if (c) v.push_back(*c);
    }
    if (v.empty()) return {std::nullopt, 0};
    return {quantile(v, 0.5), static_cast<int>(v.size())};
  };
  std::ostringstream sp;
  sp << comment << "tolerance,schedule,reached,cost,baseline_cost,speedup,wall_seconds,baseline_wall_seconds,wall_speedup\n";
  json speedups = json::array();
  for (double tol : config.speedup_tolerances) {
    const auto [base_cost, base_n] = median_to(baseline, tol, false);
    const auto base_wall = median_to(baseline, tol, true).first;
    for (const auto& s : schedules) {
      const std::string name = schedule_name(s);
      if (name == baseline) continue;
      const auto [cost, n] = median_to(name, tol, false);
      const auto wall = median_to(name, tol, true).first;
      std::optional<double> ratio, wall_ratio;
      if (cost && base_cost && *cost > 0) ratio = *base_cost / *cost;
      if (wall && base_wall && *wall > 0) wall_ratio = *base_wall / *wall;
      sp << io::format_double(tol) << "," << name << "," << n << "," << csv_cell(cost) << "," << csv_cell(base_cost)
         << "," << csv_cell(ratio) << "," << csv_cell(wall) << "," << csv_cell(base_wall) << ","
         << csv_cell(wall_ratio) << "\n";
      speedups.push_back({{"tolerance", tol}, {"schedule", name}, {"reached", n}, {"cost", optional_json(cost)},
                          {"baseline_cost", optional_json(base_cost)}, {"speedup", optional_json(ratio)},
                          {"wall_speedup", optional_json(wall_ratio)}});
    }
  }
  io::write_file_atomic((root / "speedup.csv").string(), sp.str());
  summary["speedup"] = speedups;

  // Replicate-averaged error against the reference mean.
  if (reference) {
    std::map<std::string, std::vector<ErrorPoint>> curves;
    std::ostringstream ec;
    ec << comment << "schedule,cum_cost,mean_error\n";
    for (const auto& s : schedules) {
      const std::string name = schedule_name(s);
      const auto it = runs.find(name);
      if (it == runs.end() || it->second.size() != config.seeds.size()) continue;  // needs every replicate
      std::vector<std::vector<MeanPoint>> m;
      for (const auto& l : it->second) m.push_back(l.means);
      curves[name] = error_vs_cost(reference->mean, m);
      for (const auto& p : curves[name]) {
        ec << name << "," << io::format_double(p.cum_cost) << "," << io::format_double(p.mean_error) << "\n";
      }
    }
    io::write_file_atomic((root / "error_vs_cost.csv").string(), ec.str());

    std::ostringstream es;
    es << comment << "target,schedule,cost,baseline_cost,speedup\n";
    json errs = json::array();
    for (double target : config.error_targets) {
      std::optional<double> base_cost;
      if (curves.count(baseline)) base_cost = cost_to_error(curves[baseline], target);
      for (const auto& [name, curve] : curves) {
        if (name == baseline) continue;
        const auto cost = cost_to_error(curve, target);
        std::optional<double> ratio;
        if (cost && base_cost && *cost > 0) ratio = *base_cost / *cost;
        es << io::format_double(target) << "," << name << "," << csv_cell(cost) << "," << csv_cell(base_cost) << ","
           << csv_cell(ratio) << "\n";
        errs.push_back({{"target", target}, {"schedule", name}, {"cost", optional_json(cost)},
                        {"baseline_cost", optional_json(base_cost)}, {"speedup", optional_json(ratio)}});
      }
    }
    io::write_file_atomic((root / "error_speedup.csv").string(), es.str());
    summary["error_speedup"] = errs;
    json finals = json::object();
    for (const auto& [name, curve] : curves) {
      if (!curve.empty()) finals[name] = curve.back().mean_error;
    }
    summary["final_mean_error"] = finals;
  }

  io::write_file_atomic((root / "summary.json").string(), summary.dump(2) + "\n");
  return summary;
}

json RatesResult::to_json() const {
  json j = mlsvgd::to_json(report);
  j["kl_std_errors"] = kl_std_errors;
  return j;
}

RatesResult compute_rates(const ExperimentConfig& config) {
  RatesResult out;
  if (const auto* g = std::get_if<GaussianHierarchyProblem>(&config.problem)) {
    GaussianRateOptions opt;
    opt.particles = config.particles;
    opt.step_size = config.step_size;
    opt.bandwidth = config.bandwidth;
    opt.seed = config.seeds.front();
    out.report = fit_rates(*g, opt);
    out.kl_std_errors.assign(out.report.kls.size(), 0.0);
    return out;
  }

  const BuiltProblem built = make_hierarchy(config.problem);
  const CostCalibration costs = calibrate_costs(config, built.hierarchy);
  const int levels = config.levels();
  const int proxy_level = config.rates.proxy_level > 0 ? config.rates.proxy_level : levels + 1;
  const double fd_step = std::visit(
      [](const auto& p) {
        if constexpr (requires { p.fd_step; }) return p.fd_step;
        return kDefaultFdStep;
      },
      config.problem);
  const PosteriorLevel proxy(proxy_level, built.prior, built.likelihood, make_forward_model(config.problem, proxy_level),
                             fd_step);

  std::vector<int> level_ids;
  std::vector<double> kls;
  for (int l = 1; l <= levels; ++l) {
    const TargetLevel& target = *built.hierarchy[static_cast<std::size_t>(l - 1)];
    DramConfig dram;
    dram.initial_state = local_mode(target, config.initial.mean, config.reference.mode_search_step,
                                    config.reference.mode_search_steps);
    dram.initial_proposal_var = config.reference.initial_proposal_var;
    dram.burn_in = config.rates.burn_in;
    dram.samples = config.rates.samples;
    dram.stride = config.rates.stride;
    dram.seed = config.rates.seed + static_cast<std::uint64_t>(l);
    const Chain chain = dram_sample(target, dram);

    const Eigen::Index n = chain.samples.rows();
    Eigen::VectorXd log_p(n), log_q(n);
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd x = chain.samples.row(i).transpose();
      log_p(i) = safe_log_density(target, x);
      log_q(i) = safe_log_density(proxy, x);
    }
    const McEstimate kl = kl_unnormalized_estimate(log_p, log_q);
    level_ids.push_back(l);
    kls.push_back(kl.estimate);
    out.kl_std_errors.push_back(kl.std_error);
  }
  out.report = fit_rates(level_ids, costs.weights, kls, 2.0);
  return out;
}

}  // namespace mlsvgd
