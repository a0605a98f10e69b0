#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace mlsvgd {

/// Gaussian RBF kernel k(a, b) = exp(-|a - b|^2 / (2 * bandwidth)).
///
/// The bandwidth enters unsquared: it plays the role of a variance, not a
/// length scale. It is fixed for the lifetime of the kernel.
template <typename Scalar = double>
class RbfKernel {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit RbfKernel(Scalar bandwidth) : bandwidth_(bandwidth) {
    if (!(bandwidth > Scalar(0)) || !std::isfinite(static_cast<double>(bandwidth))) {
      throw std::invalid_argument("RbfKernel: bandwidth must be positive and finite");
    }
  }

  Scalar bandwidth() const { return bandwidth_; }

  /// Kernel value from a precomputed squared distance.
  Scalar from_squared_distance(Scalar sq_dist) const {
    using std::exp;
    return exp(-sq_dist / (Scalar(2) * bandwidth_));
  }

 private:
  Scalar bandwidth_;
};

namespace detail {
template <typename DerivedA, typename DerivedB>
void check_same_size(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("kernel: dimension mismatch between arguments");
  }
}
}  // namespace detail

template <typename Scalar, typename DerivedA, typename DerivedB>
Scalar kernel_eval(const RbfKernel<Scalar>& kernel, const Eigen::MatrixBase<DerivedA>& a,
                   const Eigen::MatrixBase<DerivedB>& b) {
  detail::check_same_size(a, b);
  return kernel.from_squared_distance((a - b).squaredNorm());
}

/// Gradient of k(a, b) with respect to a: -(a - b) / bandwidth * k(a, b).
template <typename Scalar, typename DerivedA, typename DerivedB>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> kernel_grad1(const RbfKernel<Scalar>& kernel,
                                                      const Eigen::MatrixBase<DerivedA>& a,
                                                      const Eigen::MatrixBase<DerivedB>& b) {
  detail::check_same_size(a, b);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> diff = a - b;
  const Scalar k = kernel.from_squared_distance(diff.squaredNorm());
  return -(k / kernel.bandwidth()) * diff;
}

/// Symmetric Gram matrix K(i, j) = k(x_i, x_j) over the rows of `points`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> gram_matrix(
    const RbfKernel<typename Derived::Scalar>& kernel, const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    gram(j, j) = Scalar(1);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      // Explicit differences; the |a|^2 + |b|^2 - 2ab expansion loses digits
      // for tightly clustered ensembles.
      const Scalar k = kernel.from_squared_distance((points.row(i) - points.row(j)).squaredNorm());
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }
  return gram;
}

}  // namespace mlsvgd
