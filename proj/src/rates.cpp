#include "mlsvgd/rates.hpp"

#include <cmath>
#include <stdexcept>

#include "mlsvgd/divergence.hpp"

namespace mlsvgd {

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 matching points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::invalid_argument("fit_line: non-finite data");
    design(i, 0) = 1.0;
    design(i, 1) = x[i];
    rhs(i) = y[i];
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
  LinearFit fit;
  fit.intercept = coef(0);
  fit.slope = coef(1);
  const Eigen::VectorXd resid = rhs - design * coef;
  fit.residuals.assign(resid.data(), resid.data() + n);
  const double total = (rhs.array() - rhs.mean()).square().sum();
  fit.r_squared = total > 0 ? 1.0 - resid.squaredNorm() / total : 1.0;
  return fit;
}

RateFitReport fit_rates(const std::vector<int>& levels, const std::vector<double>& costs,
                        const std::vector<double>& kls, double base) {
  if (levels.size() < 3) throw std::invalid_argument("fit_rates: need at least three levels");
  if (costs.size() != levels.size() || kls.size() != levels.size()) {
    throw std::invalid_argument("fit_rates: levels, costs and KL values must have equal length");
  }
  if (!(base > 1.0)) throw std::invalid_argument("fit_rates: base must exceed 1");
  std::vector<double> x, log_cost, log_kl;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(costs[i] > 0.0) || !(kls[i] > 0.0)) throw std::invalid_argument("fit_rates: costs and KL values must be positive");
    x.push_back(levels[i]);
    log_cost.push_back(std::log(costs[i]) / std::log(base));
    log_kl.push_back(std::log(kls[i]) / std::log(base));
  }
  RateFitReport report;
  report.base = base;
  report.levels = levels;
  report.costs = costs;
  report.kls = kls;
  report.cost_fit = fit_line(x, log_cost);
  report.kl_fit = fit_line(x, log_kl);
  report.gamma = report.cost_fit.slope;
  report.alpha = -report.kl_fit.slope;
  return report;
}

SvgdDecay svgd_kl_decay(const ParticleEnsemble<double>& initial, const GaussianTarget& target,
                        const RbfKernel<double>& kernel, double step_size, long steps, long stride) {
  if (steps < 1 || stride < 1) throw std::invalid_argument("svgd_kl_decay: steps and stride must be positive");
  const GaussianDist<double> limit(target.mean(), target.covariance());
  SvgdDecay decay;
  ParticleEnsemble<double> ensemble = initial;
  for (long k = 0; k <= steps; ++k) {
    if (k % stride == 0) {
      decay.times.push_back(static_cast<double>(k) * step_size);
      decay.kls.push_back(kl_gaussian(moment_match(ensemble.particles), limit));
    }
    if (k == steps) break;
    ensemble = svgd_step(ensemble, kernel, evaluate_scores(target, ensemble.particles), step_size);
  }
  return decay;
}

LinearFit fit_decay_rate(const SvgdDecay& decay, double floor_factor) {
  if (decay.kls.empty()) throw std::invalid_argument("fit_decay_rate: empty decay trace");
  const double floor = floor_factor * decay.kls.back();
  std::vector<double> t, log_kl;
  for (std::size_t i = 0; i < decay.kls.size() && decay.kls[i] > floor; ++i) {
    t.push_back(decay.times[i]);
    log_kl.push_back(std::log(decay.kls[i]));
  }
  if (t.size() < 3) throw std::invalid_argument("fit_decay_rate: fewer than three points above the plateau");
  return fit_line(t, log_kl);
}

RateFitReport fit_rates(const GaussianHierarchyProblem& problem, const GaussianRateOptions& options) {
  const auto limit = gaussian_hierarchy_level(problem, 0);
  const GaussianDist<double> limit_dist(limit->mean(), limit->covariance());
  std::vector<int> levels;
  std::vector<double> costs, kls;
  for (int l = 1; l <= problem.levels; ++l) {
    const auto level = gaussian_hierarchy_level(problem, l);
    levels.push_back(l);
    costs.push_back(level->cost_weight());
    kls.push_back(kl_gaussian(GaussianDist<double>(level->mean(), level->covariance()), limit_dist));
  }
  RateFitReport report = fit_rates(levels, costs, kls, problem.base);

  // Start well away from the limit so the decay is visible before the plateau.
  const Eigen::VectorXd start_mean = limit->mean().array() + 2.0;
  const Eigen::VectorXd start_var = Eigen::VectorXd::Constant(problem.dim, 0.25);
  const auto initial = init_ensemble<double>(options.particles, start_mean, start_var, options.seed);
  const SvgdDecay decay = svgd_kl_decay(initial, *limit, RbfKernel<double>(options.bandwidth), options.step_size,
                                        options.steps, options.stride);
  report.lambda_fit = fit_decay_rate(decay);
  report.lambda = -report.lambda_fit->slope;
  return report;
}

namespace {
nlohmann::json fit_json(const LinearFit& fit) {
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"residuals", fit.residuals}, {"r_squared", fit.r_squared}};
}
}  // namespace

nlohmann::json to_json(const RateFitReport& report) {
  nlohmann::json j = {{"base", report.base},
                      {"levels", report.levels},
                      {"costs", report.costs},
                      {"kl", report.kls},
                      {"gamma", report.gamma},
                      {"alpha", report.alpha},
                      {"cost_fit", fit_json(report.cost_fit)},
                      {"kl_fit", fit_json(report.kl_fit)}};
  if (report.lambda) {
    j["lambda"] = *report.lambda;
    j["lambda_fit"] = fit_json(*report.lambda_fit);
    j["lambda_note"] = "moment-matched Gaussian surrogate of the ensemble; approximation only";
  }
  return j;
}

}  // namespace mlsvgd
