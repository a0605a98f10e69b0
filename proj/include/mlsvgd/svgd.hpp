#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsvgd/ensemble.hpp"
#include "mlsvgd/errors.hpp"
#include "mlsvgd/kernel.hpp"
#include "mlsvgd/target.hpp"

namespace mlsvgd {

struct SvgdConfig {
  double step_size = 0.1;
  double tolerance = 1e-4;
  long max_iterations = 50000;

  void validate() const;
};

struct IterationRecord {
  long iteration = 0;    // global step index, 1-based
  int level = 0;
  double grad_norm = 0;  // estimate computed from this step's scores
  double cum_cost = 0;   // sum of c_l * N over all steps so far
  double wall_seconds = 0;
};

using IterationTrace = std::vector<IterationRecord>;

/// Per-particle update direction
///   phi_i = (1/N) (sum_j grad_1 k(x_j, x_i) + sum_j k(x_j, x_i) s_j),
/// computed for all particles from the same snapshot.
///
/// With K the Gram matrix and r_i = sum_j K_ij, the repulsive sum is
/// (r_i x_i - (K X)_i) / bandwidth, so the whole update is two products.
template <typename DerivedX, typename DerivedS>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> svgd_direction(
    const RbfKernel<typename DerivedX::Scalar>& kernel, const Eigen::MatrixBase<DerivedX>& particles,
    const Eigen::MatrixBase<DerivedS>& scores) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (scores.rows() != particles.rows() || scores.cols() != particles.cols()) {
    throw std::invalid_argument("svgd_direction: scores must have the ensemble's shape");
  }
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (!scores.row(i).allFinite()) {
      throw RunError("non-finite score for particle " + std::to_string(i), static_cast<long>(i));
    }
  }
  const Matrix gram = gram_matrix(kernel, particles);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_sums = gram.rowwise().sum();
  // Translation invariant; centering limits cancellation in r_i x_i - (K X)_i.
  const Matrix centered = particles.rowwise() - particles.colwise().mean();
  Matrix direction = gram * scores;
  direction.noalias() += (row_sums.asDiagonal() * centered - gram * centered) / kernel.bandwidth();
  direction /= Scalar(particles.rows());
  return direction;
}

/// Mean Euclidean norm of the rows of an update direction.
template <typename Derived>
typename Derived::Scalar mean_row_norm(const Eigen::MatrixBase<Derived>& direction) {
  return direction.rowwise().norm().mean();
}

template <typename Scalar>
struct SvgdStepResult {
  ParticleEnsemble<Scalar> ensemble;
  Scalar grad_norm;
};

/// One forward-Euler SVGD step together with the gradient-norm estimate
/// built from the same sums.
template <typename Scalar, typename DerivedS>
SvgdStepResult<Scalar> svgd_step_with_norm(const ParticleEnsemble<Scalar>& ensemble,
                                           const RbfKernel<Scalar>& kernel,
                                           const Eigen::MatrixBase<DerivedS>& scores, Scalar step_size) {
  const auto direction = svgd_direction(kernel, ensemble.particles, scores);
  SvgdStepResult<Scalar> out{ensemble, mean_row_norm(direction)};
  out.ensemble.particles.noalias() += step_size * direction;
  out.ensemble.iteration += 1;
  return out;
}

template <typename Scalar, typename DerivedS>
ParticleEnsemble<Scalar> svgd_step(const ParticleEnsemble<Scalar>& ensemble, const RbfKernel<Scalar>& kernel,
                                   const Eigen::MatrixBase<DerivedS>& scores, Scalar step_size) {
  return svgd_step_with_norm(ensemble, kernel, scores, step_size).ensemble;
}

/// Ensemble average of the per-particle update-direction norms; the
/// stopping statistic of the adaptive level loop.
template <typename Scalar, typename DerivedS>
Scalar gradient_norm_estimate(const ParticleEnsemble<Scalar>& ensemble, const RbfKernel<Scalar>& kernel,
                              const Eigen::MatrixBase<DerivedS>& scores) {
  return mean_row_norm(svgd_direction(kernel, ensemble.particles, scores));
}

/// Scores of every particle, evaluated in parallel. Throws RunError naming
/// the lowest-index particle whose score is non-finite or whose evaluation failed.
Eigen::MatrixXd evaluate_scores(const TargetLevel& target, const Eigen::MatrixXd& particles);

/// Where a single-level segment sits inside a longer run.
struct SegmentContext {
  double base_cost = 0.0;
  std::chrono::steady_clock::time_point clock_start = std::chrono::steady_clock::now();
  std::function<void(const IterationRecord&, const ParticleEnsemble<double>&)> observer;
};

struct SingleLevelResult {
  ParticleEnsemble<double> ensemble;
  IterationTrace trace;
  long iterations = 0;
  bool tolerance_reached = false;
};

/// Repeats SVGD steps on one target until the gradient-norm estimate of a
/// step is at most the tolerance, or max_iterations steps were taken.
/// The check follows the update, so at least one step is always taken.
SingleLevelResult run_single_level(ParticleEnsemble<double> ensemble, const TargetLevel& target,
                                   const RbfKernel<double>& kernel, const SvgdConfig& config,
                                   const SegmentContext& context = {});

std::string trace_to_csv(const IterationTrace& trace);
IterationTrace trace_from_csv(const std::string& csv);

}  // namespace mlsvgd
