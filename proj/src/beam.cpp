#include "mlsvgd/beam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlsvgd/banded.hpp"
#include "mlsvgd/errors.hpp"

namespace mlsvgd {

StiffnessField::StiffnessField(Eigen::VectorXd theta, double width) : theta_(std::move(theta)), width_(width) {
  if (theta_.size() < 1) throw std::invalid_argument("StiffnessField: need at least one parameter");
  if (!(width > 0.0)) throw std::invalid_argument("StiffnessField: smoothing width must be positive");
}

double StiffnessField::knot(Eigen::Index i) const {
  return static_cast<double>(i) / static_cast<double>(theta_.size());
}

double StiffnessField::operator()(double x) const {
  double value = theta_(0);
  for (Eigen::Index i = 1; i < theta_.size(); ++i) {
    const double sigmoid = 1.0 / (1.0 + std::exp(-(x - knot(i)) / width_));
    value += (theta_(i) - theta_(i - 1)) * sigmoid;
  }
  return value;
}

double StiffnessField::piecewise_constant(double x) const {
  const auto d = theta_.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (x <= knot(i + 1)) return theta_(i);
  }
  return theta_(d - 1);
}

double smooth_stiffness(const StiffnessField& field, double x) { return field(x); }

BeamGrid::BeamGrid(Eigen::Index intervals) : intervals_(intervals), load_(Eigen::VectorXd::Ones(intervals + 1)) {}

BeamGrid BeamGrid::for_level(int level) {
  if (level < 1) throw std::invalid_argument("BeamGrid: level must be positive");
  return BeamGrid(level == 1 ? 50 : 100 * static_cast<Eigen::Index>(level - 1));
}

BeamGrid BeamGrid::with_nodes(Eigen::Index nodes) {
  if (nodes < 5) throw std::invalid_argument("BeamGrid: need at least 5 nodes");
  return BeamGrid(nodes - 1);
}

void BeamGrid::set_load(Eigen::VectorXd load) {
  if (load.size() != nodes()) throw std::invalid_argument("BeamGrid: load size must equal node count");
  load_ = std::move(load);
}

Eigen::VectorXd solve_beam(const BeamGrid& grid, const Eigen::VectorXd& stiffness) {
  const Eigen::Index m = grid.intervals();  // unknowns u_1..u_m
  if (stiffness.size() != grid.nodes()) throw std::invalid_argument("solve_beam: stiffness size mismatch");
  if (!(stiffness.array() > 0.0).all() || !stiffness.allFinite()) {
    throw RunError("solve_beam: stiffness must be positive and finite at every node");
  }
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());

  // Curvature rows of B (over u_1..u_m, column c <-> u_{c+1}) weighted by W.
  BandedCholesky<double> a(m, 2);
  auto add_row = [&](double weight, std::initializer_list<std::pair<Eigen::Index, double>> row) {
    for (const auto& [ci, vi] : row) {
      for (const auto& [cj, vj] : row) {
        if (cj <= ci) a.lower(ci, cj) += weight * vi * vj;
      }
    }
  };
  // Clamped end: ghost u_{-1} = u_1 and u_0 = 0 give kappa_0 = 2 u_1 / h^2; weight E_0 / 2.
  add_row(0.5 * stiffness(0), {{0, 2.0 * inv_h2}});
  for (Eigen::Index k = 1; k < m; ++k) {
    // kappa_k = (u_{k-1} - 2 u_k + u_{k+1}) / h^2, u_0 = 0 dropped.
    if (k == 1) {
      add_row(stiffness(k), {{0, -2.0 * inv_h2}, {1, inv_h2}});
    } else {
      add_row(stiffness(k), {{k - 2, inv_h2}, {k - 1, -2.0 * inv_h2}, {k, inv_h2}});
    }
  }
  // kappa_m = 0 (free end) contributes nothing.

  Eigen::VectorXd rhs = grid.load().segment(1, m);
  rhs(m - 1) *= 0.5;
  if (!a.factorize()) throw RunError("solve_beam: singular stiffness system");
  a.solve_in_place(rhs);

  Eigen::VectorXd u(grid.nodes());
  u(0) = 0.0;
  u.tail(m) = rhs;
  return u;
}

Eigen::VectorXd solve_beam(const BeamGrid& grid, const StiffnessField& field) {
  Eigen::VectorXd stiffness(grid.nodes());
  for (Eigen::Index k = 0; k < grid.nodes(); ++k) stiffness(k) = field(grid.x(k));
  return solve_beam(grid, stiffness);
}

Eigen::VectorXd observe_beam(const Eigen::VectorXd& displacement, const BeamGrid& grid) {
  if (displacement.size() != grid.nodes()) throw std::invalid_argument("observe_beam: field size mismatch");
  const auto m = grid.intervals();
  Eigen::VectorXd obs(41);
  for (int j = 0; j <= 40; ++j) {
    const double s = (j / 40.0) * static_cast<double>(m);
    const Eigen::Index k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(s)), 0, m - 1);
    const double w = s - static_cast<double>(k);
    obs(j) = (1.0 - w) * displacement(k) + w * displacement(k + 1);
  }
  return obs;
}

double cantilever_deflection(double x, double load, double stiffness) {
  return load * x * x * (6.0 - 4.0 * x + x * x) / (24.0 * stiffness);
}

BeamModel::BeamModel(int level, Eigen::Index parameter_dim)
    : grid_(BeamGrid::for_level(level)), dim_(parameter_dim) {
  if (parameter_dim < 1) throw std::invalid_argument("BeamModel: parameter dimension must be positive");
}

Eigen::VectorXd BeamModel::observe(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim_) throw std::invalid_argument("BeamModel: parameter dimension mismatch");
  return observe_beam(solve_beam(grid_, StiffnessField(theta)), grid_);
}

}  // namespace mlsvgd
