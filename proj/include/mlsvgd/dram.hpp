#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlsvgd/ensemble.hpp"
#include "mlsvgd/target.hpp"

namespace mlsvgd {

struct DramConfig {
  Eigen::VectorXd initial_state;     // required; chain starts here
  double initial_proposal_var = 1e-2;  // diagonal of the first proposal covariance
  long burn_in = 10000;
  long samples = 20000;              // post-burn-in iterations
  long stride = 2;                   // every stride-th post-burn-in state is retained
  bool adapt = true;
  long adapt_start = 1000;           // first adaptation strictly after this iteration
  long adapt_interval = 100;
  double adapt_jitter = 1e-10;
  bool delayed_rejection = true;
  double dr_scale = 0.2;             // second-stage Cholesky factor multiplier
  long stall_limit = 1000;           // consecutive rejections that raise the warning
  bool record_log = false;
  std::uint64_t seed = 0;

  void validate() const;
  /// 2.4^2 / d
  double adapt_scale() const;
};

/// Source of the standard normal vectors and uniforms a chain consumes.
class DramDraws {
 public:
  virtual ~DramDraws() = default;
  virtual Eigen::VectorXd standard_normal(Eigen::Index dim) = 0;
  virtual double uniform() = 0;
};

class RngDraws : public DramDraws {
 public:
  explicit RngDraws(std::uint64_t seed) : rng_(seed) {}
  Eigen::VectorXd standard_normal(Eigen::Index dim) override;
  double uniform() override;

 private:
  Rng rng_;
};

/// One proposal as seen by the acceptance rule.
struct DramStep {
  long iteration = 0;  // 1-based
  int stage = 1;
  Eigen::VectorXd current;
  Eigen::VectorXd proposal;
  double log_alpha = 0;  // log acceptance probability
  double uniform = 0;
  bool accepted = false;
};

struct Chain {
  Eigen::MatrixXd samples;  // retained states, one per row
  std::vector<long> retained_iterations;
  long iterations = 0;
  long accepted_stage1 = 0;
  long stage2_attempts = 0;
  long accepted_stage2 = 0;
  long failed_evaluations = 0;  // proposals whose density evaluation threw; treated as rejected
  bool stall_warning = false;
  Eigen::MatrixXd proposal_covariance;                // final
  std::vector<Eigen::MatrixXd> covariance_history;    // initial, then after each adaptation
  std::vector<DramStep> log;                          // only with record_log

  double acceptance_stage1() const;
  double acceptance_stage2() const;
  double acceptance_total() const;
};

using LogTargetFn = std::function<double(const Eigen::VectorXd&)>;

/// Delayed-rejection adaptive Metropolis on an unnormalized log-density
/// (-infinity marks zero density).
Chain dram_sample(const LogTargetFn& log_target, const DramConfig& config, DramDraws& draws);
Chain dram_sample(const LogTargetFn& log_target, const DramConfig& config);
Chain dram_sample(const TargetLevel& target, const DramConfig& config);

/// Plain Metropolis log acceptance probability min(0, log pi(y) - log pi(x)).
double metropolis_log_alpha(double log_current, double log_proposal);

/// Second-stage log acceptance probability for symmetric Gaussian proposals
/// with first-stage covariance whose inverse quadratic form is `quad`.
double delayed_rejection_log_alpha(double log_x, double log_y1, double log_y2, double quad_y1_from_y2,
                                   double quad_y1_from_x);

Eigen::VectorXd reference_mean(const Chain& chain);
Eigen::MatrixXd sample_covariance(const Chain& chain);

/// (1/R) sum_i |reference - replicate_i|_2; R must equal `expected_count`.
double mean_error_metric(const Eigen::VectorXd& reference, const std::vector<Eigen::VectorXd>& replicate_means,
                         std::size_t expected_count = 10);

nlohmann::json chain_summary_json(const Chain& chain, const DramConfig& config);
nlohmann::json to_json(const DramConfig& config);
std::string chain_samples_csv(const Chain& chain);

}  // namespace mlsvgd
