#include "mlsvgd/diffusion_reaction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>

#include <Eigen/Sparse>

#include "mlsvgd/errors.hpp"
#include "mlsvgd/io.hpp"

namespace mlsvgd {

void NewtonConfig::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("NewtonConfig: tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("NewtonConfig: max_iterations must be positive");
  if (!(armijo_constant > 0.0 && armijo_constant < 1.0)) {
    throw std::invalid_argument("NewtonConfig: Armijo constant must lie in (0, 1)");
  }
  if (!(backtracking_factor > 0.0 && backtracking_factor < 1.0)) {
    throw std::invalid_argument("NewtonConfig: backtracking factor must lie in (0, 1)");
  }
}

ReactionValue reaction(double u, const Eigen::Vector2d& theta) {
  const double amplitude = (0.1 * std::sin(theta(0)) + 2.0) * std::exp(-2.7 * theta(0) * theta(0));
  const double rate = 1.8 * theta(1);
  const double e = std::exp(rate * u);
  if (!std::isfinite(e)) {
    throw RunError("reaction term overflow at u = " + io::format_double(u) + ", theta = " + describe_vector(theta));
  }
  return {amplitude * std::expm1(rate * u), amplitude * rate * e};
}

DrGrid::DrGrid(int level) : level_(level) {
  if (level < 1 || level > 8) throw std::invalid_argument("DrGrid: level must be in 1..8");
  intervals_ = 1 << (level + 2);
  const int m = interior_per_side();
  const double h = 1.0 / intervals_;
  forcing_.resize(unknowns());
  for (int j = 1; j <= m; ++j) {
    for (int i = 1; i <= m; ++i) {
      forcing_((j - 1) * m + (i - 1)) =
          100.0 * std::sin(2.0 * std::numbers::pi * i * h) * std::sin(2.0 * std::numbers::pi * j * h);
    }
  }
}

namespace {

/// A_h u: 5-point negative Laplacian with zero boundary values.
Eigen::VectorXd apply_laplacian(const DrGrid& grid, const Eigen::VectorXd& u) {
  const int m = grid.interior_per_side();
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  Eigen::VectorXd out(u.size());
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const Eigen::Index p = static_cast<Eigen::Index>(j) * m + i;
      double s = 4.0 * u(p);
      if (i > 0) s -= u(p - 1);
      if (i + 1 < m) s -= u(p + 1);
      if (j > 0) s -= u(p - m);
      if (j + 1 < m) s -= u(p + m);
      out(p) = s * inv_h2;
    }
  }
  return out;
}

/// Newton Jacobian A_h + diag(g_u). The sparsity pattern is fixed per grid,
/// so the symbolic Cholesky analysis is done once per nonlinear solve.
class JacobianSolver {
 public:
  explicit JacobianSolver(const DrGrid& grid) : m_(grid.interior_per_side()), n_(grid.unknowns()) {
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(5 * n_));
    for (Eigen::Index p = 0; p < n_; ++p) {
      entries.emplace_back(p, p, 4.0 * inv_h2);
      if (p % m_ != 0) entries.emplace_back(p, p - 1, -inv_h2);
      if (p % m_ != m_ - 1) entries.emplace_back(p, p + 1, -inv_h2);
      if (p >= m_) entries.emplace_back(p, p - m_, -inv_h2);
      if (p + m_ < n_) entries.emplace_back(p, p + m_, -inv_h2);
    }
    laplacian_.resize(n_, n_);
    laplacian_.setFromTriplets(entries.begin(), entries.end());
    jacobian_ = laplacian_;
    for (Eigen::Index p = 0; p < n_; ++p) diagonal_.push_back(&jacobian_.coeffRef(p, p));
    llt_.analyzePattern(jacobian_);
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& reaction_du, const Eigen::VectorXd& rhs) {
    const double center = laplacian_.coeff(0, 0);
    for (Eigen::Index p = 0; p < n_; ++p) *diagonal_[p] = center + reaction_du(p);
    llt_.factorize(jacobian_);
    if (llt_.info() == Eigen::Success) return llt_.solve(rhs);

    // Indefinite Jacobian (strongly negative reaction slope): general sparse LU.
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(jacobian_);
    if (lu.info() != Eigen::Success) throw RunError("diffusion-reaction: singular Newton Jacobian");
    return lu.solve(rhs);
  }

 private:
  int m_;
  Eigen::Index n_;
  Eigen::SparseMatrix<double> laplacian_;
  Eigen::SparseMatrix<double> jacobian_;
  std::vector<double*> diagonal_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

/// One analyzed solver per level and thread.
JacobianSolver& cached_jacobian(const DrGrid& grid) {
  thread_local std::map<int, std::unique_ptr<JacobianSolver>> cache;
  auto& slot = cache[grid.level()];
  if (!slot) slot = std::make_unique<JacobianSolver>(grid);
  return *slot;
}

}  // namespace

Eigen::VectorXd dr_residual(const DrGrid& grid, const Eigen::VectorXd& u, const Eigen::Vector2d& theta,
                            bool with_reaction) {
  if (u.size() != grid.unknowns()) throw std::invalid_argument("dr_residual: field size mismatch");
  Eigen::VectorXd r = apply_laplacian(grid, u) - grid.forcing();
  if (with_reaction) {
    for (Eigen::Index p = 0; p < u.size(); ++p) r(p) += reaction(u(p), theta).value;
  }
  return r;
}

DrSolution solve_dr(const DrGrid& grid, const Eigen::Vector2d& theta, const NewtonConfig& config,
                    bool with_reaction) {
  return solve_dr_from(grid, theta, Eigen::VectorXd::Zero(grid.unknowns()), config, with_reaction);
}

DrSolution solve_dr_from(const DrGrid& grid, const Eigen::Vector2d& theta, Eigen::VectorXd initial,
                         const NewtonConfig& config, bool with_reaction) {
  config.validate();
  if (!theta.allFinite()) throw RunError("diffusion-reaction: non-finite parameter " + describe_vector(theta));

  const Eigen::Index n = grid.unknowns();
  if (initial.size() != n) throw std::invalid_argument("solve_dr_from: initial guess size mismatch");
  DrSolution sol;
  sol.u = std::move(initial);
  JacobianSolver& jacobian = cached_jacobian(grid);
  Eigen::VectorXd residual = dr_residual(grid, sol.u, theta, with_reaction);
  double merit = 0.5 * residual.squaredNorm();
  sol.residual_history.push_back(residual.norm());

  Eigen::VectorXd slope(n);
  for (int it = 0; it <= config.max_iterations; ++it) {
    sol.residual_inf = residual.lpNorm<Eigen::Infinity>();
    if (sol.residual_inf <= config.tolerance) {
      sol.newton_iterations = it;
      return sol;
    }
    if (it == config.max_iterations) break;

    for (Eigen::Index p = 0; p < n; ++p) slope(p) = with_reaction ? reaction(sol.u(p), theta).du : 0.0;
    const Eigen::VectorXd step = jacobian.solve(slope, -residual);

    // Armijo on 0.5 |F|^2; the Newton direction has slope -|F|^2 = -2 merit.
    double t = 1.0;
    bool accepted = false;
    for (int b = 0; b <= config.max_backtracks; ++b, t *= config.backtracking_factor) {
      Eigen::VectorXd trial = sol.u + t * step;
      Eigen::VectorXd trial_residual;
      try {
        trial_residual = dr_residual(grid, trial, theta, with_reaction);
      } catch (const RunError&) {
        continue;  // overflow on an overlong step: shorten it
      }
      const double trial_merit = 0.5 * trial_residual.squaredNorm();
      if (trial_merit <= (1.0 - 2.0 * config.armijo_constant * t) * merit) {
        sol.u = std::move(trial);
        residual = std::move(trial_residual);
        merit = trial_merit;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw RunError("diffusion-reaction: line search failed at theta = " + describe_vector(theta) +
                     ", residual = " + io::format_double(residual.lpNorm<Eigen::Infinity>()));
    }
    sol.residual_history.push_back(residual.norm());
  }
  throw RunError("diffusion-reaction: Newton did not converge in " + std::to_string(config.max_iterations) +
                 " iterations at theta = " + describe_vector(theta) +
                 ", residual = " + io::format_double(sol.residual_inf));
}

Eigen::MatrixXd dr_nodal_field(const DrGrid& grid, const Eigen::VectorXd& interior) {
  const int m = grid.interior_per_side();
  if (interior.size() != grid.unknowns()) throw std::invalid_argument("dr_nodal_field: field size mismatch");
  Eigen::MatrixXd nodal = Eigen::MatrixXd::Zero(grid.intervals() + 1, grid.intervals() + 1);
  for (int j = 1; j <= m; ++j) {
    for (int i = 1; i <= m; ++i) nodal(i, j) = interior((j - 1) * m + (i - 1));
  }
  return nodal;
}

double bilinear_at(const Eigen::MatrixXd& nodal, double x1, double x2) {
  const Eigen::Index n = nodal.rows() - 1;
  if (n < 1 || nodal.cols() != nodal.rows()) throw std::invalid_argument("bilinear_at: need a square nodal grid");
  const double s1 = x1 * static_cast<double>(n);
  const double s2 = x2 * static_cast<double>(n);
  const Eigen::Index i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(s1)), 0, n - 1);
  const Eigen::Index j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(s2)), 0, n - 1);
  const double a = s1 - static_cast<double>(i);
  const double b = s2 - static_cast<double>(j);
  return (1 - a) * (1 - b) * nodal(i, j) + a * (1 - b) * nodal(i + 1, j) + (1 - a) * b * nodal(i, j + 1) +
         a * b * nodal(i + 1, j + 1);
}

Eigen::VectorXd observe_dr(const Eigen::VectorXd& interior, const DrGrid& grid) {
  const Eigen::MatrixXd nodal = dr_nodal_field(grid, interior);
  Eigen::VectorXd obs(12);
  int k = 0;
  for (int i = 1; i <= 3; ++i) {
    for (int j = 1; j <= 4; ++j) obs(k++) = bilinear_at(nodal, 0.25 * i, 0.2 * j);
  }
  return obs;
}

Eigen::VectorXd prolong_dr(const DrGrid& coarse, const Eigen::VectorXd& interior, const DrGrid& fine) {
  const Eigen::MatrixXd nodal = dr_nodal_field(coarse, interior);
  const int m = fine.interior_per_side();
  Eigen::VectorXd out(fine.unknowns());
  for (int j = 1; j <= m; ++j) {
    for (int i = 1; i <= m; ++i) out((j - 1) * m + (i - 1)) = bilinear_at(nodal, i * fine.h(), j * fine.h());
  }
  return out;
}

DrSolution solve_dr_nested(int level, const Eigen::Vector2d& theta, const NewtonConfig& config) {
  DrGrid grid(1);
  DrSolution sol = solve_dr(grid, theta, config);
  for (int l = 2; l <= level; ++l) {
    DrGrid fine(l);
    Eigen::VectorXd guess = prolong_dr(grid, sol.u, fine);
    sol = solve_dr_from(fine, theta, std::move(guess), config);
    grid = std::move(fine);
  }
  return sol;
}

DiffusionReactionModel::DiffusionReactionModel(int level, NewtonConfig config) : grid_(level), config_(config) {
  config_.validate();
}

Eigen::VectorXd DiffusionReactionModel::observe(const Eigen::VectorXd& theta) const {
  if (theta.size() != 2) throw std::invalid_argument("DiffusionReactionModel: theta must be 2-dimensional");
  return observe_dr(solve_dr_nested(grid_.level(), theta, config_).u, grid_);
}

}  // namespace mlsvgd
