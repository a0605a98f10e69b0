#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace mlsvgd {

/// One member of a hierarchy of target densities: unnormalized log-density,
/// its score, and the cost weight c_l charged per particle per iteration.
///
/// Evaluation counters are atomic so particles may be scored concurrently.
class TargetLevel {
 public:
  TargetLevel(int level, Eigen::Index dim, double cost_weight = 1.0);
  virtual ~TargetLevel() = default;

  TargetLevel(const TargetLevel&) = delete;
  TargetLevel& operator=(const TargetLevel&) = delete;

  int level() const { return level_; }
  Eigen::Index dim() const { return dim_; }

  double cost_weight() const { return cost_weight_; }
  void set_cost_weight(double weight);

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  Eigen::VectorXd score(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  long density_evaluations() const { return density_evals_.load(); }
  long score_evaluations() const { return score_evals_.load(); }
  void reset_counters();

  friend double measure_density_cost(const TargetLevel& target, const Eigen::VectorXd& theta, int repeats);

 protected:
  virtual double do_log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const = 0;
  virtual Eigen::VectorXd do_score(const Eigen::Ref<const Eigen::VectorXd>& theta) const = 0;

 private:
  int level_;
  Eigen::Index dim_;
  double cost_weight_;
  mutable std::atomic<long> density_evals_{0};
  mutable std::atomic<long> score_evals_{0};
};

using TargetPtr = std::shared_ptr<TargetLevel>;
using Hierarchy = std::vector<TargetPtr>;

/// Analytic Gaussian target N(mean, cov); exact score -cov^{-1}(theta - mean).
class GaussianTarget : public TargetLevel {
 public:
  GaussianTarget(int level, Eigen::VectorXd mean, const Eigen::MatrixXd& cov, double cost_weight = 1.0);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }

 protected:
  double do_log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  Eigen::VectorXd do_score(const Eigen::Ref<const Eigen::VectorXd>& theta) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd precision_;
  double log_norm_;
};

/// Median wall-clock seconds of one log-density evaluation at `theta`,
/// measured over `repeats` calls. The calls are not counted.
double measure_density_cost(const TargetLevel& target, const Eigen::VectorXd& theta, int repeats);

}  // namespace mlsvgd
