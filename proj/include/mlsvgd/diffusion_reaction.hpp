#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mlsvgd/forward_model.hpp"

namespace mlsvgd {

/// Newton iteration controls for the nonlinear diffusion-reaction solve.
struct NewtonConfig {
  double tolerance = 1e-10;  // on the infinity norm of the discrete residual
  int max_iterations = 50;
  double armijo_constant = 1e-4;
  double backtracking_factor = 0.5;
  int max_backtracks = 40;

  void validate() const;
};

struct ReactionValue {
  double value;  // g(u, theta)
  double du;     // dg/du
};

/// g(u, theta) = (0.1 sin(theta_1) + 2) exp(-2.7 theta_1^2) (exp(1.8 theta_2 u) - 1).
/// Throws RunError when the exponential overflows.
ReactionValue reaction(double u, const Eigen::Vector2d& theta);

/// Uniform grid on (0,1)^2 with homogeneous Dirichlet boundary.
/// Interior unknowns are numbered x1-fastest: p = (j - 1) m + (i - 1).
class DrGrid {
 public:
  /// Level l uses mesh width h = 2^-(l + 2).
  explicit DrGrid(int level);

  int level() const { return level_; }
  int intervals() const { return intervals_; }
  int interior_per_side() const { return intervals_ - 1; }
  Eigen::Index unknowns() const { return static_cast<Eigen::Index>(interior_per_side()) * interior_per_side(); }
  double h() const { return 1.0 / intervals_; }

  /// 100 sin(2 pi x1) sin(2 pi x2) at the interior nodes.
  const Eigen::VectorXd& forcing() const { return forcing_; }

 private:
  int level_;
  int intervals_;
  Eigen::VectorXd forcing_;
};

struct DrSolution {
  Eigen::VectorXd u;                     // interior nodal values
  int newton_iterations = 0;
  double residual_inf = 0;
  std::vector<double> residual_history;  // Euclidean residual norm at the start and after each accepted step
};

/// Discrete residual F(u) = A_h u + g(u, theta) - f with A_h the 5-point
/// negative Laplacian. `with_reaction = false` drops g.
Eigen::VectorXd dr_residual(const DrGrid& grid, const Eigen::VectorXd& u, const Eigen::Vector2d& theta,
                            bool with_reaction = true);

/// Newton with Armijo backtracking on 0.5 |F|^2, starting from u = 0.
/// Throws RunError carrying the final residual on non-convergence.
DrSolution solve_dr(const DrGrid& grid, const Eigen::Vector2d& theta, const NewtonConfig& config = {},
                    bool with_reaction = true);

/// Newton from a given initial field.
DrSolution solve_dr_from(const DrGrid& grid, const Eigen::Vector2d& theta, Eigen::VectorXd initial,
                         const NewtonConfig& config = {}, bool with_reaction = true);

/// Bilinear transfer of an interior field to another grid.
Eigen::VectorXd prolong_dr(const DrGrid& coarse, const Eigen::VectorXd& interior, const DrGrid& fine);

/// Nested iteration: solve on level 1 from zero, then on each finer level up
/// to `level` starting from the prolonged coarser solution.
DrSolution solve_dr_nested(int level, const Eigen::Vector2d& theta, const NewtonConfig& config = {});

/// Full (n+1) x (n+1) nodal field including the zero boundary; entry (i, j) is at (i h, j h).
Eigen::MatrixXd dr_nodal_field(const DrGrid& grid, const Eigen::VectorXd& interior);

/// Bilinear interpolation of a full nodal field at (x1, x2).
double bilinear_at(const Eigen::MatrixXd& nodal, double x1, double x2);

/// The 12 observations at (0.25 i, 0.2 j), i = 1..3, j = 1..4, i-major.
Eigen::VectorXd observe_dr(const Eigen::VectorXd& interior, const DrGrid& grid);

/// G_l for the diffusion-reaction problem.
class DiffusionReactionModel : public ForwardModel {
 public:
  explicit DiffusionReactionModel(int level, NewtonConfig config = {});

  Eigen::Index input_dim() const override { return 2; }
  Eigen::Index output_dim() const override { return 12; }
  Eigen::VectorXd observe(const Eigen::VectorXd& theta) const override;

  const DrGrid& grid() const { return grid_; }

 private:
  DrGrid grid_;
  NewtonConfig config_;
};

}  // namespace mlsvgd
