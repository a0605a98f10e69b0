#include "mlsvgd/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "mlsvgd/beam.hpp"
#include "mlsvgd/diffusion_reaction.hpp"
#include "mlsvgd/errors.hpp"
#include "mlsvgd/io.hpp"

namespace mlsvgd {

using nlohmann::json;

std::string to_string(CostMode mode) { return mode == CostMode::Measured ? "measured" : "analytic"; }

CostMode cost_mode_from_string(const std::string& name) {
  if (name == "measured") return CostMode::Measured;
  if (name == "analytic") return CostMode::Analytic;
  throw ConfigError("cost_mode must be \"measured\" or \"analytic\", got \"" + name + "\"");
}

std::string problem_type(const ProblemSpec& problem) {
  if (std::holds_alternative<DiffusionReactionProblem>(problem)) return "diffusion-reaction";
  if (std::holds_alternative<BeamProblem>(problem)) return "beam";
  return "gaussian-hierarchy";
}

int ExperimentConfig::levels() const {
  return std::visit([](const auto& p) { return p.levels; }, problem);
}

Eigen::Index ExperimentConfig::dim() const {
  if (std::holds_alternative<DiffusionReactionProblem>(problem)) return 2;
  if (const auto* b = std::get_if<BeamProblem>(&problem)) return b->dim;
  return std::get<GaussianHierarchyProblem>(problem).dim;
}

double default_analytic_cost(const ProblemSpec& problem, int level) {
  if (std::holds_alternative<DiffusionReactionProblem>(problem)) return static_cast<double>(DrGrid(level).unknowns());
  if (std::holds_alternative<BeamProblem>(problem)) return static_cast<double>(BeamGrid::for_level(level).intervals());
  const auto& g = std::get<GaussianHierarchyProblem>(problem);
  return g.cost_scale * std::pow(g.base, g.gamma * level);
}

namespace {

/// Reads keys from an object, remembering which were consumed so leftovers
/// can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  void get_vector(const char* key, Eigen::VectorXd& out) {
    std::vector<double> v(out.data(), out.data() + out.size());
    get(key, v);
    out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  void get_vector2(const char* key, Eigen::Vector2d& out) {
    Eigen::VectorXd v = out;
    get_vector(key, v);
    if (v.size() != 2) throw ConfigError(where_ + "." + key + ": expected 2 entries");
    out = v;
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key \"" + key + "\"");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ProblemSpec problem_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw ConfigError("problem: expected an object with a string \"type\"");
  }
  const std::string type = j.at("type").get<std::string>();
  Reader r(j, "problem");
  std::string ignored;
  r.get("type", ignored);
  if (type == "diffusion-reaction") {
    DiffusionReactionProblem p;
    r.get("levels", p.levels);
    r.get_vector2("theta_true", p.theta_true);
    r.get_vector2("prior_mean", p.prior_mean);
    r.get_vector2("prior_var", p.prior_var);
    r.get("noise_fraction", p.noise_fraction);
    r.get("data_level_offset", p.data_level_offset);
    r.get("noise_seed", p.noise_seed);
    r.get("fd_step", p.fd_step);
    r.finish();
    return p;
  }
  if (type == "beam") {
    BeamProblem p;
    r.get("levels", p.levels);
    r.get("dim", p.dim);
    r.get("prior_mu", p.prior_mu);
    r.get("prior_sigma", p.prior_sigma);
    r.get("noise_fraction", p.noise_fraction);
    r.get("data_nodes", p.data_nodes);
    r.get("truth_seed", p.truth_seed);
    r.get("noise_seed", p.noise_seed);
    r.get("fd_step", p.fd_step);
    r.finish();
    return p;
  }
  if (type == "gaussian-hierarchy") {
    GaussianHierarchyProblem p;
    r.get("levels", p.levels);
    r.get("dim", p.dim);
    r.get("base", p.base);
    r.get("alpha", p.alpha);
    r.get("gamma", p.gamma);
    r.get("kl_scale", p.kl_scale);
    r.get("cost_scale", p.cost_scale);
    p.mean = Eigen::VectorXd::Zero(p.dim);
    p.variances = Eigen::VectorXd::Ones(p.dim);
    r.get_vector("mean", p.mean);
    r.get_vector("variances", p.variances);
    r.finish();
    return p;
  }
  throw ConfigError("problem.type must be diffusion-reaction, beam or gaussian-hierarchy, got \"" + type + "\"");
}

json problem_to_json(const ProblemSpec& problem) {
  if (const auto* p = std::get_if<DiffusionReactionProblem>(&problem)) {
    return {{"type", "diffusion-reaction"},
            {"levels", p->levels},
            {"theta_true", io::vector_json(p->theta_true)},
            {"prior_mean", io::vector_json(p->prior_mean)},
            {"prior_var", io::vector_json(p->prior_var)},
            {"noise_fraction", p->noise_fraction},
            {"data_level_offset", p->data_level_offset},
            {"noise_seed", p->noise_seed},
            {"fd_step", p->fd_step}};
  }
  if (const auto* p = std::get_if<BeamProblem>(&problem)) {
    return {{"type", "beam"},
            {"levels", p->levels},
            {"dim", p->dim},
            {"prior_mu", p->prior_mu},
            {"prior_sigma", p->prior_sigma},
            {"noise_fraction", p->noise_fraction},
            {"data_nodes", p->data_nodes},
            {"truth_seed", p->truth_seed},
            {"noise_seed", p->noise_seed},
            {"fd_step", p->fd_step}};
  }
  const auto& p = std::get<GaussianHierarchyProblem>(problem);
  return {{"type", "gaussian-hierarchy"},
          {"levels", p.levels},
          {"dim", p.dim},
          {"base", p.base},
          {"alpha", p.alpha},
          {"gamma", p.gamma},
          {"kl_scale", p.kl_scale},
          {"cost_scale", p.cost_scale},
          {"mean", io::vector_json(p.mean)},
          {"variances", io::vector_json(p.variances)}};
}

}  // namespace

ExperimentConfig default_config(const std::string& type) {
  ExperimentConfig c;
  c.name = type;
  if (type == "diffusion-reaction") {
    c.problem = DiffusionReactionProblem{};
    c.particles = 1000;
    c.step_size = 1e-4;
    c.bandwidth = 1e-2;
    c.tolerance = 1e-4;
    c.max_iterations = 200000;
    c.initial = {Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d::Constant(1e-4)};
    c.schedules = {{1, 2, 3}, {1, 3}};
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    c.speedup_tolerances = {1e-1, 1e-2, 1e-3, 1e-4};
    c.error_targets = {3e-3};
  } else if (type == "beam") {
    c.problem = BeamProblem{};
    c.particles = 500;
    c.step_size = 1e-2;
    c.bandwidth = 1e-5;
    c.tolerance = 5e-3;
    c.initial = {Eigen::VectorXd::Ones(9), Eigen::VectorXd::Constant(9, 4e-4)};
    c.schedules = {{1, 2, 3, 4, 5, 6}, {1, 3, 6}};
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    c.speedup_tolerances = {5e-2, 1e-2, 5e-3};
    c.error_targets = {3e-3};
  } else if (type == "gaussian-hierarchy") {
    GaussianHierarchyProblem g;
    c.problem = g;
    c.particles = 50;
    c.step_size = 0.1;
    c.bandwidth = 1.0;
    c.tolerance = 1e-3;
    c.initial = {Eigen::VectorXd::Constant(g.dim, 2.0), Eigen::VectorXd::Constant(g.dim, 0.25)};
    c.schedules = {{1, 2, 3, 4}, {1, 4}};
    c.seeds = {1, 2};
    c.cost_mode = CostMode::Analytic;
    c.speedup_tolerances = {1e-2, 1e-3};
    c.error_targets = {1e-1};
    c.reference.burn_in = 2000;
    c.reference.samples = 10000;
  } else {
    throw ConfigError("unknown problem type \"" + type + "\"");
  }
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (!j.contains("problem")) throw ConfigError("config: missing \"problem\"");
  const ProblemSpec problem = problem_from_json(j.at("problem"));
  ExperimentConfig c = default_config(problem_type(problem));
  c.problem = problem;
  if (c.initial.mean.size() != c.dim()) {
    c.initial = {Eigen::VectorXd::Ones(c.dim()), Eigen::VectorXd::Constant(c.dim(), 4e-4)};
  }

  Reader r(j, "config");
  r.sub("problem");
  r.get("name", c.name);
  r.get("particles", c.particles);
  r.get("step_size", c.step_size);
  r.get("bandwidth", c.bandwidth);
  r.get("tolerance", c.tolerance);
  r.get("max_iterations", c.max_iterations);
  if (const json* init = r.sub("initial")) {
    Reader ri(*init, "initial");
    ri.get_vector("mean", c.initial.mean);
    ri.get_vector("variance", c.initial.variance);
    ri.finish();
  }
  r.get("schedules", c.schedules);
  r.get("baseline", c.baseline);
  r.get("seeds", c.seeds);
  std::string mode = to_string(c.cost_mode);
  r.get("cost_mode", mode);
  c.cost_mode = cost_mode_from_string(mode);
  r.get("analytic_costs", c.analytic_costs);
  r.get("calibration_repeats", c.calibration_repeats);
  r.get("level_tolerances", c.level_tolerances);
  r.get("speedup_tolerances", c.speedup_tolerances);
  r.get("error_targets", c.error_targets);
  if (const json* ref = r.sub("reference")) {
    Reader rr(*ref, "reference");
    rr.get("enabled", c.reference.enabled);
    rr.get("burn_in", c.reference.burn_in);
    rr.get("samples", c.reference.samples);
    rr.get("stride", c.reference.stride);
    rr.get("initial_proposal_var", c.reference.initial_proposal_var);
    rr.get("seed", c.reference.seed);
    if (const json* s = rr.sub("initial_state"); s && !s->is_null()) {
      Eigen::VectorXd v(0);
      rr.get_vector("initial_state", v);
      c.reference.initial_state = v;
    }
    rr.get("mode_search_steps", c.reference.mode_search_steps);
    rr.get("mode_search_step", c.reference.mode_search_step);
    rr.get("write_samples", c.reference.write_samples);
    rr.finish();
  }
  if (const json* rates = r.sub("rates")) {
    Reader rr(*rates, "rates");
    rr.get("proxy_level", c.rates.proxy_level);
    rr.get("burn_in", c.rates.burn_in);
    rr.get("samples", c.rates.samples);
    rr.get("stride", c.rates.stride);
    rr.get("seed", c.rates.seed);
    rr.finish();
  }
  r.get("output_dir", c.output_dir);
  r.finish();
  validate(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json reference = {{"enabled", c.reference.enabled},
                    {"burn_in", c.reference.burn_in},
                    {"samples", c.reference.samples},
                    {"stride", c.reference.stride},
                    {"initial_proposal_var", c.reference.initial_proposal_var},
                    {"seed", c.reference.seed},
                    {"initial_state", nullptr},
                    {"mode_search_steps", c.reference.mode_search_steps},
                    {"mode_search_step", c.reference.mode_search_step},
                    {"write_samples", c.reference.write_samples}};
  if (c.reference.initial_state) reference["initial_state"] = io::vector_json(*c.reference.initial_state);
  return {{"name", c.name},
          {"problem", problem_to_json(c.problem)},
          {"particles", c.particles},
          {"step_size", c.step_size},
          {"bandwidth", c.bandwidth},
          {"tolerance", c.tolerance},
          {"max_iterations", c.max_iterations},
          {"initial", {{"mean", io::vector_json(c.initial.mean)}, {"variance", io::vector_json(c.initial.variance)}}},
          {"schedules", c.schedules},
          {"baseline", c.baseline},
          {"seeds", c.seeds},
          {"cost_mode", to_string(c.cost_mode)},
          {"analytic_costs", c.analytic_costs},
          {"calibration_repeats", c.calibration_repeats},
          {"level_tolerances", c.level_tolerances},
          {"speedup_tolerances", c.speedup_tolerances},
          {"error_targets", c.error_targets},
          {"reference", reference},
          {"rates",
           {{"proxy_level", c.rates.proxy_level},
            {"burn_in", c.rates.burn_in},
            {"samples", c.rates.samples},
            {"stride", c.rates.stride},
            {"seed", c.rates.seed}}},
          {"output_dir", c.output_dir}};
}

void validate(const ExperimentConfig& c) {
  const int levels = c.levels();
  if (levels < 1) throw ConfigError("problem.levels must be positive");
  if (c.particles < 1) throw ConfigError("particles must be positive");
  if (!(c.step_size > 0.0) || !std::isfinite(c.step_size)) throw ConfigError("step_size must be positive");
  if (!(c.bandwidth > 0.0) || !std::isfinite(c.bandwidth)) throw ConfigError("bandwidth must be positive");
  if (!(c.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (c.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (c.initial.mean.size() != c.dim() || c.initial.variance.size() != c.dim()) {
    throw ConfigError("initial.mean and initial.variance must have " + std::to_string(c.dim()) + " entries");
  }
  if (!(c.initial.variance.array() > 0.0).all()) throw ConfigError("initial.variance entries must be positive");
  if (c.seeds.empty()) throw ConfigError("seeds must list at least one replicate seed");
  for (const auto& s : c.schedules) {
    if (s.empty()) throw ConfigError("schedules: empty schedule");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 1 || s[i] > levels || (i > 0 && s[i] <= s[i - 1])) {
        throw ConfigError("schedules: levels must be strictly increasing within 1.." + std::to_string(levels));
      }
    }
    if (s.back() != levels) throw ConfigError("schedules: every schedule must end at level " + std::to_string(levels));
  }
  if (c.schedules.empty() && !c.baseline) throw ConfigError("nothing to run: no schedules and baseline disabled");
  if (!c.analytic_costs.empty() && c.analytic_costs.size() != static_cast<std::size_t>(levels)) {
    throw ConfigError("analytic_costs must have one entry per level");
  }
  for (double w : c.analytic_costs) {
    if (!(w > 0.0)) throw ConfigError("analytic_costs entries must be positive");
  }
  if (c.calibration_repeats < 1) throw ConfigError("calibration_repeats must be positive");
  if (!c.level_tolerances.empty() && c.level_tolerances.size() != static_cast<std::size_t>(levels)) {
    throw ConfigError("level_tolerances must have one entry per level");
  }
  for (double t : c.level_tolerances) {
    if (!(t > 0.0)) throw ConfigError("level_tolerances entries must be positive");
  }
  for (double t : c.speedup_tolerances) {
    if (!(t > 0.0)) throw ConfigError("speedup_tolerances entries must be positive");
  }
  for (double t : c.error_targets) {
    if (!(t > 0.0)) throw ConfigError("error_targets entries must be positive");
  }
  if (c.reference.burn_in < 0 || c.reference.samples < 1 || c.reference.stride < 1) {
    throw ConfigError("reference: burn_in >= 0, samples >= 1 and stride >= 1 required");
  }
  if (!(c.reference.initial_proposal_var > 0.0)) throw ConfigError("reference.initial_proposal_var must be positive");
  if (c.reference.initial_state && c.reference.initial_state->size() != c.dim()) {
    throw ConfigError("reference.initial_state has the wrong dimension");
  }
  if (c.reference.mode_search_steps < 0 || !(c.reference.mode_search_step > 0.0)) {
    throw ConfigError("reference: mode search needs steps >= 0 and a positive step");
  }
  if (c.rates.proxy_level < 0 || c.rates.burn_in < 0 || c.rates.samples < 1 || c.rates.stride < 1) {
    throw ConfigError("rates: invalid chain settings");
  }
  if (c.output_dir.empty()) throw ConfigError("output_dir must be nonempty");
  if (const auto* g = std::get_if<GaussianHierarchyProblem>(&c.problem)) {
    if (g->mean.size() != g->dim || g->variances.size() != g->dim) {
      throw ConfigError("problem.mean and problem.variances must have dim entries");
    }
    if (!(g->base > 1.0)) throw ConfigError("problem.base must exceed 1");
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config \"" + path + "\": " + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config \"" + path + "\" is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");  // where results go does not change them
  return fnv1a_hex(j.dump());
}

}  // namespace mlsvgd
