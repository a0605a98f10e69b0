#pragma once

#include <Eigen/Dense>

namespace mlsvgd {

/// Parameter-to-observable map G_l of one discretization level.
/// Implementations must be safe to call concurrently.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Eigen::VectorXd observe(const Eigen::VectorXd& theta) const = 0;
};

}  // namespace mlsvgd
