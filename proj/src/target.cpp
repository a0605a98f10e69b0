#include "mlsvgd/target.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mlsvgd/errors.hpp"
#include "mlsvgd/io.hpp"

namespace mlsvgd {

std::string describe_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  std::string out = "[";
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) out += ", ";
    out += io::format_double(v(k));
  }
  return out + "]";
}

TargetLevel::TargetLevel(int level, Eigen::Index dim, double cost_weight)
    : level_(level), dim_(dim), cost_weight_(cost_weight) {
  if (dim < 1) throw std::invalid_argument("TargetLevel: dimension must be positive");
  set_cost_weight(cost_weight);
}

void TargetLevel::set_cost_weight(double weight) {
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("TargetLevel: cost weight must be positive and finite");
  }
  cost_weight_ = weight;
}

double TargetLevel::log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  if (theta.size() != dim_) throw std::invalid_argument("TargetLevel::log_density: dimension mismatch");
  density_evals_.fetch_add(1, std::memory_order_relaxed);
  return do_log_density(theta);
}

Eigen::VectorXd TargetLevel::score(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  if (theta.size() != dim_) throw std::invalid_argument("TargetLevel::score: dimension mismatch");
  score_evals_.fetch_add(1, std::memory_order_relaxed);
  return do_score(theta);
}

void TargetLevel::reset_counters() {
  density_evals_.store(0);
  score_evals_.store(0);
}

GaussianTarget::GaussianTarget(int level, Eigen::VectorXd mean, const Eigen::MatrixXd& cov, double cost_weight)
    : TargetLevel(level, mean.size(), cost_weight), mean_(std::move(mean)), cov_(cov) {
  if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
    throw std::invalid_argument("GaussianTarget: covariance shape mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("GaussianTarget: covariance is not positive definite");
  }
  precision_ = llt.solve(Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols()));
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(mean_.size()) * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianTarget::do_log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const Eigen::VectorXd r = theta - mean_;
  return log_norm_ - 0.5 * r.dot(precision_ * r);
}

Eigen::VectorXd GaussianTarget::do_score(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  return -(precision_ * (theta - mean_));
}

double measure_density_cost(const TargetLevel& target, const Eigen::VectorXd& theta, int repeats) {
  if (repeats < 1) throw std::invalid_argument("measure_density_cost: repeats must be positive");
  std::vector<double> seconds;
  seconds.reserve(static_cast<std::size_t>(repeats));
  volatile double sink = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    sink = sink + target.do_log_density(theta);
    const auto stop = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(stop - start).count());
  }
  std::nth_element(seconds.begin(), seconds.begin() + repeats / 2, seconds.end());
  // Clock granularity can report zero for analytic targets.
  return std::max(seconds[static_cast<std::size_t>(repeats / 2)], 1e-9);
}

}  // namespace mlsvgd
