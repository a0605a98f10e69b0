#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mlsvgd/beam.hpp"
#include "mlsvgd/config.hpp"
#include "mlsvgd/diffusion_reaction.hpp"
#include "mlsvgd/divergence.hpp"
#include "mlsvgd/dram.hpp"
#include "mlsvgd/experiment.hpp"
#include "mlsvgd/io.hpp"
#include "mlsvgd/kernel.hpp"
#include "mlsvgd/mlsvgd.hpp"
#include "mlsvgd/rates.hpp"
#include "mlsvgd/svgd.hpp"
#include "test_util.hpp"

using namespace mlsvgd;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string details;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mlsvgd_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1: analytic kernel gradient against central differences.
Outcome kernel_gradient() {
  Rng rng(1);
  std::uniform_real_distribution<double> bw(0.2, 5.0);
  double worst = 0;
  int pairs = 0;
  for (int d : {1, 2, 9, 16}) {
    for (int t = 0; t < 250; ++t, ++pairs) {
      const RbfKernel<double> k(bw(rng) * d);
      const Eigen::VectorXd a = testutil::random_matrix(rng, d, 1);
      const Eigen::VectorXd b = testutil::random_matrix(rng, d, 1);
      const Eigen::VectorXd g = kernel_grad1(k, a, b);
      Eigen::VectorXd fd(d);
      const double h = 1e-6;
      for (int i = 0; i < d; ++i) {
        Eigen::VectorXd ap = a, am = a;
        ap(i) += h;
        am(i) -= h;
        fd(i) = (kernel_eval(k, ap, b) - kernel_eval(k, am, b)) / (2 * h);
      }
      worst = std::max(worst, (fd - g).norm() / std::max(g.norm(), 1e-300));
    }
  }
  return {worst <= 1e-6, std::to_string(pairs) + " pairs, max rel err " + fmt(worst)};
}

// 2: vectorized update and gradient-norm estimate against a naive triple loop.
Outcome brute_force_update() {
  Rng rng(2);
  std::uniform_int_distribution<int> n_dist(1, 5), d_dist(1, 3);
  std::uniform_real_distribution<double> bw(0.3, 3.0), step(1e-3, 0.5);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = n_dist(rng), d = d_dist(rng);
    const double sigma = bw(rng), delta = step(rng);
    ParticleEnsemble<double> e;
    e.particles = testutil::random_matrix(rng, n, d);
    const Eigen::MatrixXd s = testutil::random_matrix(rng, n, d);
    const auto fast = svgd_step(e, RbfKernel<double>(sigma), s, delta);
    const double fast_norm = gradient_norm_estimate(e, RbfKernel<double>(sigma), s);
    Eigen::MatrixXd slow = e.particles;
    double slow_norm = 0;
    for (int i = 0; i < n; ++i) {
      double sq_phi = 0;
      for (int c = 0; c < d; ++c) {
        double phi = 0;
        for (int j = 0; j < n; ++j) {
          double sq = 0;
          for (int m = 0; m < d; ++m) sq += (e.particles(j, m) - e.particles(i, m)) * (e.particles(j, m) - e.particles(i, m));
          const double kv = std::exp(-sq / (2 * sigma));
          phi += -(e.particles(j, c) - e.particles(i, c)) / sigma * kv + kv * s(j, c);
        }
        slow(i, c) += delta * phi / n;
        sq_phi += (phi / n) * (phi / n);
      }
      slow_norm += std::sqrt(sq_phi) / n;
    }
    const double disp = (slow - e.particles).norm();
    worst = std::max(worst, (fast.particles - slow).norm() / std::max(disp, 1e-300));
    worst = std::max(worst, std::abs(fast_norm - slow_norm) / std::max(slow_norm, 1e-300));
  }
  return {worst <= 1e-12, "100 instances, max rel err " + fmt(worst)};
}

// 3: one particle performs gradient ascent on the log-density.
Outcome single_particle() {
  Rng rng(3);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + t % 5;
    const GaussianTarget target(1, testutil::random_matrix(rng, d, 1), testutil::random_spd(rng, d));
    ParticleEnsemble<double> e;
    e.particles = testutil::random_matrix(rng, 1, d);
    Eigen::VectorXd x = e.particles.row(0).transpose();
    const RbfKernel<double> k(1.0);
    const double delta = 0.05;
    for (int s = 0; s < 100; ++s) {
      e = svgd_step(e, k, target.score(e.particles.row(0).transpose()).transpose(), delta);
      x += delta * target.score(x);
      worst = std::max(worst, (e.particles.row(0).transpose() - x).norm() / std::max(x.norm(), 1.0));
    }
  }
  return {worst <= 1e-12, "20 targets x 100 steps, max deviation " + fmt(worst)};
}

// 4: standard normal in one dimension.
Outcome gaussian_1d() {
  const GaussianTarget target(1, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  SvgdConfig c;
  c.step_size = 0.1;
  c.tolerance = 1e-3;
  c.max_iterations = 100000;
  const auto r = run_single_level(init_ensemble<double>(200, Eigen::VectorXd::Constant(1, 2.0),
                                                        Eigen::VectorXd::Constant(1, 0.01), 4),
                                  target, RbfKernel<double>(1.0), c);
  const Eigen::VectorXd x = r.ensemble.particles.col(0);
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / (x.size() - 1));
  const bool ok = r.tolerance_reached && std::abs(mean) <= 0.05 && sd >= 0.85 && sd <= 1.15;
  return {ok, std::to_string(r.iterations) + " iterations, mean " + fmt(mean) + ", std " + fmt(sd)};
}

GaussianDist<double> random_gaussian(Rng& rng, int d) {
  return GaussianDist<double>(testutil::random_matrix(rng, d, 1), testutil::random_spd(rng, d));
}

// 5: Hellinger bound and the KL triangle remainder.
Outcome divergences() {
  Rng rng(5);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const int d = 1 + t % 5;
    const auto p = random_gaussian(rng, d), q = random_gaussian(rng, d);
    if (2 * hellinger_squared_gaussian(p, q) > kl_gaussian(p, q) + 1e-12) ++violations;
  }
  int outside = 0;
  double worst_z = 0;
  for (int t = 0; t < 100; ++t) {
    const auto r0 = random_gaussian(rng, 1), r1 = random_gaussian(rng, 1), r2 = random_gaussian(rng, 1);
    const auto tr = kl_triangle_remainder(r0, r1, r2, 200000, 500 + t);
    const double z = std::abs(tr.lhs_minus_rhs - tr.remainder_estimate) / tr.std_error;
    worst_z = std::max(worst_z, z);
    if (z > 3) ++outside;
  }
  return {violations == 0 && outside == 0, "bound violations " + std::to_string(violations) + "/1000, triples outside 3 SE " +
                                               std::to_string(outside) + "/100 (max " + fmt(worst_z) + " SE)"};
}

// 6: second-order convergence of both forward solvers.
Outcome solver_orders() {
  const Eigen::Vector2d theta(-std::numbers::pi / 4, 3.0);
  auto dr_error = [&](int level) {
    const DrGrid grid(level);
    const auto sol = solve_dr(grid, theta, {}, false);
    const int m = grid.interior_per_side();
    double err = 0;
    for (int j = 1; j <= m; ++j) {
      for (int i = 1; i <= m; ++i) {
        const double x1 = i * grid.h(), x2 = j * grid.h();
        const double exact = 100.0 * std::sin(2 * std::numbers::pi * x1) * std::sin(2 * std::numbers::pi * x2) /
                             (8 * std::numbers::pi * std::numbers::pi);
        err = std::max(err, std::abs(sol.u((j - 1) * m + (i - 1)) - exact));
      }
    }
    return err;
  };
  auto beam_error = [](int level) {
    BeamGrid grid = BeamGrid::for_level(level);
    const Eigen::VectorXd u = solve_beam(grid, Eigen::VectorXd::Constant(grid.nodes(), 2.0));
    double err = 0;
    for (Eigen::Index k = 0; k < grid.nodes(); ++k) err = std::max(err, std::abs(u(k) - cantilever_deflection(grid.x(k), 1.0, 2.0)));
    return err;
  };
  const double d12 = std::log2(dr_error(1) / dr_error(2)), d23 = std::log2(dr_error(2) / dr_error(3));
  const double b1 = beam_error(1), b2 = beam_error(2), b4 = beam_error(4);
  const double o12 = std::log2(b1 / b2), o24 = std::log(b2 / b4) / std::log(3.0);
  const bool ok = std::abs(d12 - 2) <= 0.3 && std::abs(d23 - 2) <= 0.3 && std::abs(o12 - 2) <= 0.3 && std::abs(o24 - 2) <= 0.3;
  return {ok, "reaction-diffusion orders " + fmt(d12) + ", " + fmt(d23) + "; beam orders " + fmt(o12) + ", " + fmt(o24)};
}

struct BudgetExceeded {
  long iteration;
  int level;
  double grad_norm;
};

// 7: full-scale diffusion-reaction comparison, bounded by a wall-clock budget.
Outcome diffusion_reaction_full(double budget_seconds) {
  ExperimentConfig config = default_config("diffusion-reaction");
  config.seeds = {1};
  const BuiltProblem built = make_hierarchy(config.problem);
  const CostCalibration costs = calibrate_costs(config, built.hierarchy);
  for (std::size_t l = 0; l < built.hierarchy.size(); ++l) built.hierarchy[l]->set_cost_weight(costs.weights[l]);
  SvgdConfig svgd;
  svgd.step_size = config.step_size;
  svgd.tolerance = config.tolerance;
  svgd.max_iterations = config.max_iterations;
  const RbfKernel<double> kernel(config.bandwidth);
  const auto initial = init_ensemble<double>(config.particles, config.initial.mean, config.initial.variance, 1);
  const auto start = std::chrono::steady_clock::now();

  std::map<std::string, RunReport> reports;
  std::map<std::string, std::vector<MeanPoint>> means;
  for (const std::vector<int> schedule : {std::vector<int>{1, 2, 3}, std::vector<int>{3}}) {
    const std::string name = schedule_name(schedule);
    MlsvgdOptions options;
    options.observer = [&](const IterationRecord& it, const ParticleEnsemble<double>& e) {
      means[name].push_back({it.iteration, it.level, it.cum_cost, it.wall_seconds, e.particles.colwise().mean().transpose()});
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (elapsed > budget_seconds) throw BudgetExceeded{it.iteration, it.level, it.grad_norm};
    };
    try {
      reports[name] = run_mlsvgd(initial, built.hierarchy, LevelSchedule(schedule), kernel, svgd, options);
    } catch (const BudgetExceeded& b) {
      return {false, "schedule " + name + " stopped by the " + fmt(budget_seconds) + " s budget at iteration " +
                         std::to_string(b.iteration) + " (level " + std::to_string(b.level) + ", grad norm " +
                         fmt(b.grad_norm) + ", tolerance " + fmt(config.tolerance) + ")"};
    }
  }
  const auto& ml = reports["1-2-3"];
  const auto& sl = reports["3"];
  const auto ml_cost = cost_to_tolerance(ml.trace, ml.switch_indices, config.tolerance);
  const auto sl_cost = cost_to_tolerance(sl.trace, sl.switch_indices, config.tolerance);
  if (!ml_cost || !sl_cost) return {false, "tolerance not reached within max_iterations"};
  const double speedup = *sl_cost / *ml_cost;
  const Reference ref = compute_reference(config, built);
  const auto ml_curve = error_vs_cost(ref.mean, {means["1-2-3"]});
  const auto sl_curve = error_vs_cost(ref.mean, {means["3"]});
  const auto ml_err = cost_to_error(ml_curve, 3e-3), sl_err = cost_to_error(sl_curve, 3e-3);
  const double err_speedup = (ml_err && sl_err) ? *sl_err / *ml_err : 0.0;
  return {speedup >= 3 && err_speedup >= 5,
          "tolerance speedup " + fmt(speedup) + ", error-matched speedup " + fmt(err_speedup)};
}

// 8: beam hierarchy, single seed, measured costs.
Outcome beam_speedup() {
  ExperimentConfig config = default_config("beam");
  config.seeds = {1};
  config.reference.enabled = false;
  config.speedup_tolerances = {config.tolerance};
  config.output_dir = work_dir("beam").string();
  const json summary = run_experiment(config);
  std::map<std::string, double> speedup, cost;
  for (const auto& row : summary["speedup"]) {
    if (row["speedup"].is_null()) continue;
    speedup[row["schedule"]] = row["speedup"].get<double>();
    cost[row["schedule"]] = row["cost"].get<double>();
  }
  if (!speedup.count("1-2-3-4-5-6") || !speedup.count("1-3-6")) return {false, "a schedule did not reach the tolerance"};
  const double a = cost["1-2-3-4-5-6"], b = cost["1-3-6"];
  const double spread = std::max(a, b) / std::min(a, b);
  const bool ok = speedup["1-2-3-4-5-6"] >= 3 && speedup["1-3-6"] >= 3 && spread <= 1.5;
  return {ok, "speedup 1-2-3-4-5-6 " + fmt(speedup["1-2-3-4-5-6"]) + ", 1-3-6 " + fmt(speedup["1-3-6"]) +
                  ", cost ratio " + fmt(spread)};
}

// 9: every segment reaches its tolerance; switching levels raises the gradient norm.
Outcome level_switching() {
  ExperimentConfig config = default_config("diffusion-reaction");
  config.particles = 20;
  config.tolerance = 0.5;
  config.cost_mode = CostMode::Analytic;
  config.analytic_costs = {1, 8, 64};
  const RunRecord rec = run_one(config, {1, 2, 3}, 1, config.analytic_costs);
  const auto& r = rec.report;
  bool segments_ok = r.switch_indices.size() == 3;
  for (std::size_t s = 0; segments_ok && s < r.switch_indices.size(); ++s) {
    const std::size_t end = s + 1 < r.switch_indices.size() ? r.switch_indices[s + 1] : r.trace.size();
    segments_ok = r.tolerance_reached[s] && r.trace[end - 1].grad_norm <= config.tolerance;
  }
  int spikes = 0;
  std::string jumps;
  for (std::size_t s = 1; s < r.switch_indices.size(); ++s) {
    const std::size_t i = r.switch_indices[s];
    if (r.trace[i].grad_norm > r.trace[i - 1].grad_norm) ++spikes;
    jumps += " " + fmt(r.trace[i - 1].grad_norm) + "->" + fmt(r.trace[i].grad_norm);
  }
  return {segments_ok && spikes >= 1, "segments at tolerance: " + std::string(segments_ok ? "yes" : "no") +
                                          ", spikes " + std::to_string(spikes) + ":" + jumps};
}

// 10: planted exponents of the Gaussian hierarchy and a positive KL decay for the PDE hierarchy.
Outcome rates() {
  const auto g = fit_rates(GaussianHierarchyProblem{});
  const bool planted = std::abs(g.alpha - 2) <= 1e-6 && std::abs(g.gamma - 2) <= 1e-6;
  ExperimentConfig dr = default_config("diffusion-reaction");
  const auto r = compute_rates(dr);
  const bool pde = r.report.alpha > 0 && r.report.kl_fit.r_squared >= 0.9;
  return {planted && pde, "planted alpha " + fmt(g.alpha) + ", gamma " + fmt(g.gamma) + "; reaction-diffusion alpha " +
                              fmt(r.report.alpha) + ", R^2 " + fmt(r.report.kl_fit.r_squared)};
}

// 11: DRAM on a two-dimensional standard normal.
Outcome dram_gaussian() {
  DramConfig c;
  c.initial_state = Eigen::Vector2d(1.0, -1.0);
  c.initial_proposal_var = 1.0;
  c.burn_in = 5000;
  c.samples = 100000;
  c.stride = 1;
  c.seed = 11;
  auto log_target = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  const Chain a = dram_sample(log_target, c);
  const Chain b = dram_sample(log_target, c);
  const double mean_err = reference_mean(a).norm();
  const double cov_err = (sample_covariance(a) - Eigen::Matrix2d::Identity()).norm();
  const bool same = a.samples == b.samples;
  return {mean_err <= 0.05 && cov_err <= 0.1 && same, "mean error " + fmt(mean_err) + ", covariance error " +
                                                          fmt(cov_err) + ", repeat identical " + (same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  double budget = 1200;
  app.add_option("--criterion", only, "Run a single criterion (1-11)")->check(CLI::Range(1, 11));
  app.add_option("--budget", budget, "Wall-clock budget in seconds for criterion 7");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> checks{
      kernel_gradient, brute_force_update, single_particle, gaussian_1d, divergences, solver_orders,
      [budget] { return diffusion_reaction_full(budget); }, beam_speedup, level_switching, rates, dram_gaussian};
  bool all = true;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    Outcome o;
    try {
      o = checks[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.details << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
