#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlsvgd/bayes.hpp"
#include "mlsvgd/svgd.hpp"

namespace mlsvgd {

/// Least-squares line y = intercept + slope x.
struct LinearFit {
  double slope = 0;
  double intercept = 0;
  std::vector<double> residuals;
  double r_squared = 0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Empirical exponents of a level hierarchy with base s:
///   c_l ~ s^(gamma l),  KL(pi_l || pi) ~ s^(-alpha l),
/// and optionally the decay rate lambda of KL(mu_t || pi) ~ exp(-lambda t).
struct RateFitReport {
  double base = 2;
  std::vector<int> levels;
  std::vector<double> costs;
  std::vector<double> kls;
  double gamma = 0;
  double alpha = 0;
  LinearFit cost_fit;  // on log_s c_l
  LinearFit kl_fit;    // on log_s KL_l
  std::optional<double> lambda;
  std::optional<LinearFit> lambda_fit;  // on ln KL(mu_t || pi) against t
};

/// Fits gamma and alpha; at least three levels required.
RateFitReport fit_rates(const std::vector<int>& levels, const std::vector<double>& costs,
                        const std::vector<double>& kls, double base = 2.0);

/// KL of the moment-matched ensemble to a Gaussian target along a trace of
/// ensembles taken every `stride` SVGD steps.
struct SvgdDecay {
  std::vector<double> times;  // t = steps * delta
  std::vector<double> kls;
};

SvgdDecay svgd_kl_decay(const ParticleEnsemble<double>& initial, const GaussianTarget& target,
                        const RbfKernel<double>& kernel, double step_size, long steps, long stride);

/// ln KL against t over the points before KL first falls below
/// `floor_factor` times its final value (the finite-N plateau is excluded).
LinearFit fit_decay_rate(const SvgdDecay& decay, double floor_factor = 10.0);

/// Rates of the analytic Gaussian hierarchy: closed-form KL to the level-0
/// limit, the configured costs, and lambda from a single-level run on the limit.
struct GaussianRateOptions {
  Eigen::Index particles = 100;
  double step_size = 0.1;
  double bandwidth = 1.0;
  long steps = 400;
  long stride = 10;
  std::uint64_t seed = 1;
};

RateFitReport fit_rates(const GaussianHierarchyProblem& problem, const GaussianRateOptions& options = {});

nlohmann::json to_json(const RateFitReport& report);

}  // namespace mlsvgd
