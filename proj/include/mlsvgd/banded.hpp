#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace mlsvgd {

/// Symmetric banded matrix with in-place Cholesky factorization.
///
/// Row i stores the lower-band entries A(i, i - bw .. i) contiguously, so the
/// inner products of the factorization run over contiguous memory.
template <typename Scalar = double>
class BandedCholesky {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BandedCholesky(Eigen::Index n, Eigen::Index bandwidth)
      : n_(n), bw_(bandwidth), band_(Band::Zero(n, bandwidth + 1)) {
    if (n < 1 || bandwidth < 0) throw std::invalid_argument("BandedCholesky: bad shape");
  }

  Eigen::Index size() const { return n_; }
  Eigen::Index bandwidth() const { return bw_; }

  void set_zero() { band_.setZero(); factorized_ = false; }

  /// Lower-triangle entry A(i, j), j <= i <= j + bandwidth.
  Scalar& lower(Eigen::Index i, Eigen::Index j) { return band_(i, j - i + bw_); }
  Scalar lower(Eigen::Index i, Eigen::Index j) const { return band_(i, j - i + bw_); }

  /// Adds `value` to A(i, j) and, off the diagonal, to A(j, i).
  void add(Eigen::Index i, Eigen::Index j, Scalar value) {
    if (j > i) std::swap(i, j);
    if (i - j > bw_) throw std::out_of_range("BandedCholesky: entry outside band");
    lower(i, j) += value;
  }

  /// A x for the stored (unfactorized) matrix.
  Vector multiply(const Vector& x) const {
    if (factorized_) throw std::logic_error("BandedCholesky: matrix already factorized");
    Vector y = Vector::Zero(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Eigen::Index j0 = std::max<Eigen::Index>(0, i - bw_);
      for (Eigen::Index j = j0; j < i; ++j) {
        y(i) += lower(i, j) * x(j);
        y(j) += lower(i, j) * x(i);
      }
      y(i) += lower(i, i) * x(i);
    }
    return y;
  }

  /// Overwrites the band with its Cholesky factor L. Returns false if a
  /// nonpositive pivot shows the matrix is not positive definite.
  bool factorize() {
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Eigen::Index k0 = std::max<Eigen::Index>(0, i - bw_);
      for (Eigen::Index j = k0; j <= i; ++j) {
        const Eigen::Index len = j - k0;
        Scalar s = lower(i, j);
        if (len > 0) {
          s -= band_.row(i).segment(k0 - i + bw_, len).dot(band_.row(j).segment(k0 - j + bw_, len));
        }
        if (j == i) {
          if (!(s > Scalar(0))) return false;
          lower(i, i) = std::sqrt(s);
        } else {
          lower(i, j) = s / lower(j, j);
        }
      }
    }
    factorized_ = true;
    return true;
  }

  void solve_in_place(Vector& x) const {
    if (!factorized_) throw std::logic_error("BandedCholesky: factorize() first");
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Eigen::Index k0 = std::max<Eigen::Index>(0, i - bw_);
      const Eigen::Index len = i - k0;
      Scalar s = x(i);
      if (len > 0) s -= band_.row(i).segment(k0 - i + bw_, len).dot(x.segment(k0, len));
      x(i) = s / lower(i, i);
    }
    for (Eigen::Index i = n_ - 1; i >= 0; --i) {
      x(i) /= lower(i, i);
      const Eigen::Index k0 = std::max<Eigen::Index>(0, i - bw_);
      for (Eigen::Index k = k0; k < i; ++k) x(k) -= lower(i, k) * x(i);
    }
  }

 private:
  using Band = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Index n_;
  Eigen::Index bw_;
  Band band_;
  bool factorized_ = false;
};

}  // namespace mlsvgd
