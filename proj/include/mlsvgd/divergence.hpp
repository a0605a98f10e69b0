#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsvgd/ensemble.hpp"

namespace mlsvgd {

/// N(mean, covariance) with the Cholesky factor cached.
template <typename Scalar = double>
class GaussianDist {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  GaussianDist(Vector mean, Matrix covariance) : mean_(std::move(mean)), cov_(std::move(covariance)) {
    if (mean_.size() < 1 || cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
      throw std::invalid_argument("GaussianDist: mean and covariance shapes disagree");
    }
    if (!(cov_ - cov_.transpose()).isZero(Scalar(1e-12) * (Scalar(1) + cov_.cwiseAbs().maxCoeff()))) {
      throw std::invalid_argument("GaussianDist: covariance is not symmetric");
    }
    llt_.compute(cov_);
    if (llt_.info() != Eigen::Success) throw std::invalid_argument("GaussianDist: covariance is not positive definite");
    log_det_ = Scalar(2) * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  static GaussianDist diagonal(Vector mean, const Vector& variances) {
    return GaussianDist(std::move(mean), Matrix(variances.asDiagonal()));
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const Eigen::LLT<Matrix>& llt() const { return llt_; }
  Scalar log_det() const { return log_det_; }

  Scalar log_pdf(const Vector& x) const {
    const Vector z = llt_.matrixL().solve(x - mean_);
    return Scalar(-0.5) * (z.squaredNorm() + log_det_ + Scalar(dim()) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>));
  }

  Vector sample(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(dim());
    for (Eigen::Index k = 0; k < dim(); ++k) z(k) = Scalar(normal(rng));
    return mean_ + llt_.matrixL() * z;
  }

 private:
  Vector mean_;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
  Scalar log_det_ = 0;
};

namespace detail {
template <typename Scalar>
void require_same_dim(const GaussianDist<Scalar>& p, const GaussianDist<Scalar>& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("Gaussian divergence: dimension mismatch");
}
}  // namespace detail

/// KL(p || q) in closed form.
template <typename Scalar>
Scalar kl_gaussian(const GaussianDist<Scalar>& p, const GaussianDist<Scalar>& q) {
  detail::require_same_dim(p, q);
  using Matrix = typename GaussianDist<Scalar>::Matrix;
  const Matrix a = q.llt().matrixL().solve(p.llt().matrixL().toDenseMatrix());
  const typename GaussianDist<Scalar>::Vector z = q.llt().matrixL().solve(p.mean() - q.mean());
  const Scalar value =
      Scalar(0.5) * (a.squaredNorm() + z.squaredNorm() - Scalar(p.dim()) + q.log_det() - p.log_det());
  return std::max(value, Scalar(0));
}

/// Squared Hellinger distance 1 - BC(p, q), i.e. (1/2) int (sqrt p - sqrt q)^2.
template <typename Scalar>
Scalar hellinger_squared_gaussian(const GaussianDist<Scalar>& p, const GaussianDist<Scalar>& q) {
  detail::require_same_dim(p, q);
  using Matrix = typename GaussianDist<Scalar>::Matrix;
  const Matrix avg = Scalar(0.5) * (p.covariance() + q.covariance());
  const Eigen::LLT<Matrix> llt(avg);
  const Scalar log_det_avg = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const typename GaussianDist<Scalar>::Vector z = llt.matrixL().solve(p.mean() - q.mean());
  const Scalar log_bc =
      Scalar(0.25) * (p.log_det() + q.log_det()) - Scalar(0.5) * log_det_avg - Scalar(0.125) * z.squaredNorm();
  return std::clamp(-std::expm1(std::min(log_bc, Scalar(0))), Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar hellinger_gaussian(const GaussianDist<Scalar>& p, const GaussianDist<Scalar>& q) {
  return std::sqrt(hellinger_squared_gaussian(p, q));
}

/// Sample mean with its standard error.
struct McEstimate {
  double estimate = 0;
  double std_error = 0;
  long samples = 0;
};

using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;
using SamplerFn = std::function<Eigen::VectorXd(Rng&)>;

/// Draws processed per independently seeded chunk; the estimate does not
/// depend on how chunks are scheduled across threads.
inline constexpr long kMcChunk = 1024;

/// E_p[f] by Monte Carlo with chunk c seeded from (seed, c).
McEstimate mc_expectation(const std::function<double(const Eigen::VectorXd&)>& f, const SamplerFn& sampler,
                          long n_samples, std::uint64_t seed);

/// KL(p || q) = E_p[log p - log q] for normalized log-densities.
McEstimate kl_mc_estimate(const LogDensityFn& log_p, const LogDensityFn& log_q, const SamplerFn& sample_p,
                          long n_samples, std::uint64_t seed);

/// KL(p || q) from draws of p when both densities are known only up to
/// constants: mean(D) + log mean(exp(-D)) with D = log p~ - log q~. The
/// standard error is the delta-method error of that expression.
McEstimate kl_unnormalized_estimate(const Eigen::VectorXd& log_p_at_samples, const Eigen::VectorXd& log_q_at_samples);

struct TriangleRemainder {
  double lhs_minus_rhs = 0;       // KL(r0||r2) - KL(r0||r1) - KL(r1||r2), closed form
  double remainder_estimate = 0;  // E_r0[log r1/r2] - E_r1[log r1/r2], Monte Carlo
  double std_error = 0;
};

/// The remainder term R = int (r0 - r1) log(r1 / r2) in closed form.
double triangle_remainder_closed_form(const GaussianDist<double>& r0, const GaussianDist<double>& r1,
                                      const GaussianDist<double>& r2);

/// Closed-form left side against a Monte Carlo remainder (independent draws
/// from r0 and r1, n_samples each).
TriangleRemainder kl_triangle_remainder(const GaussianDist<double>& r0, const GaussianDist<double>& r1,
                                        const GaussianDist<double>& r2, long n_samples, std::uint64_t seed);

/// Moment-matched Gaussian of an ensemble (sample mean, unbiased covariance
/// plus `jitter` on the diagonal).
GaussianDist<double> moment_match(const Eigen::MatrixXd& particles, double jitter = 1e-12);

struct DivergenceRow {
  std::string label;
  double kl = 0;
  double hellinger = 0;
};

/// "label,kl,hellinger" table.
std::string divergence_table_csv(const std::vector<DivergenceRow>& rows);

}  // namespace mlsvgd
