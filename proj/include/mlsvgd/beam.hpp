#pragma once

#include <Eigen/Dense>

#include "mlsvgd/forward_model.hpp"

namespace mlsvgd {

/// Smoothed piecewise-constant stiffness on [0, 1].
///
/// With d plateau values theta_1..theta_d and equidistant knots
/// alpha_i = (i - 1) / d, the field is
///   E(x) = theta_1 + sum_{i=2}^{d} (theta_i - theta_{i-1}) I(x, alpha_i),
///   I(x, a) = 1 / (1 + exp(-(x - a) / width)).
class StiffnessField {
 public:
  static constexpr double kDefaultWidth = 0.005;

  explicit StiffnessField(Eigen::VectorXd theta, double width = kDefaultWidth);

  Eigen::Index dim() const { return theta_.size(); }
  const Eigen::VectorXd& theta() const { return theta_; }
  double width() const { return width_; }
  double knot(Eigen::Index i) const;  // alpha_{i+1}, 0-based i = 0..d

  /// Smoothed value at x.
  double operator()(double x) const;

  /// Unsmoothed plateau value: theta_i on (alpha_i, alpha_{i+1}], theta_1 at x = 0.
  double piecewise_constant(double x) const;

 private:
  Eigen::VectorXd theta_;
  double width_;
};

double smooth_stiffness(const StiffnessField& field, double x);

/// Equidistant nodes x_k = k / intervals on [0, 1] with unit load by default.
class BeamGrid {
 public:
  /// Levels 1..6 have 51, 101, 201, 301, 401, 501 nodes (100 (l - 1) + 1 beyond level 1).
  static BeamGrid for_level(int level);
  static BeamGrid with_nodes(Eigen::Index nodes);

  Eigen::Index nodes() const { return intervals_ + 1; }
  Eigen::Index intervals() const { return intervals_; }
  double spacing() const { return 1.0 / static_cast<double>(intervals_); }
  double x(Eigen::Index k) const { return static_cast<double>(k) * spacing(); }

  /// Nodal load values; default f = 1.
  const Eigen::VectorXd& load() const { return load_; }
  void set_load(Eigen::VectorXd load);

 private:
  explicit BeamGrid(Eigen::Index intervals);
  Eigen::Index intervals_;
  Eigen::VectorXd load_;
};

/// Cantilever solve of (E u'')'' = f with u(0) = u'(0) = 0 and
/// u''(1) = (E u'')'(1) = 0 via ghost nodes. `stiffness` holds nodal values
/// of E. Returns the nodal displacement including u(0) = 0.
///
/// The ghost-node scheme is symmetric once the clamped-end moment and the
/// free-end equation are halved, so it is solved as B^T W B u = f with a
/// pentadiagonal Cholesky factorization.
Eigen::VectorXd solve_beam(const BeamGrid& grid, const Eigen::VectorXd& stiffness);
Eigen::VectorXd solve_beam(const BeamGrid& grid, const StiffnessField& field);

/// Linear interpolation of nodal values at x_j = j / 40, j = 0..40.
Eigen::VectorXd observe_beam(const Eigen::VectorXd& displacement, const BeamGrid& grid);

/// Closed-form deflection of a uniform cantilever under uniform load q.
double cantilever_deflection(double x, double load, double stiffness);

/// G_l for the beam problem.
class BeamModel : public ForwardModel {
 public:
  BeamModel(int level, Eigen::Index parameter_dim);

  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return 41; }
  Eigen::VectorXd observe(const Eigen::VectorXd& theta) const override;

  const BeamGrid& grid() const { return grid_; }

 private:
  BeamGrid grid_;
  Eigen::Index dim_;
};

}  // namespace mlsvgd
