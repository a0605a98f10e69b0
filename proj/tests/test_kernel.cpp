#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mlsvgd/ensemble.hpp"
#include "mlsvgd/kernel.hpp"

using namespace mlsvgd;

namespace {

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(d);
  for (Eigen::Index k = 0; k < d; ++k) v(k) = normal(rng);
  return v;
}

}  // namespace

TEST(Kernel, IdenticalPointsGiveOne) {
  const RbfKernel<double> k(0.7);
  const Eigen::Vector3d a(1, -2, 3);
  EXPECT_EQ(kernel_eval(k, a, a), 1.0);
  EXPECT_EQ(kernel_grad1(k, a, a), Eigen::Vector3d::Zero());
}

TEST(Kernel, ScalarExamples) {
  EXPECT_NEAR(kernel_eval(RbfKernel<double>(0.5), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)), std::exp(-1.0),
              1e-15);
  const Eigen::VectorXd g = kernel_grad1(RbfKernel<double>(1.0), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(g(0), -std::exp(-0.5), 1e-15);
}

TEST(Kernel, MatchesLongDoubleReevaluation) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd a = random_vector(rng, 2), b = random_vector(rng, 2);
    const double bw = 0.1 + std::abs(random_vector(rng, 1)(0));
    long double r2 = 0;
    for (int k = 0; k < 2; ++k) r2 += (static_cast<long double>(a(k)) - b(k)) * (static_cast<long double>(a(k)) - b(k));
    const long double expected = std::exp(-r2 / (2.0L * bw));
    EXPECT_NEAR(kernel_eval(RbfKernel<double>(bw), a, b), static_cast<double>(expected), 1e-15);
  }
}

TEST(Kernel, SymmetryAndAntisymmetry) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd a = random_vector(rng, 4), b = random_vector(rng, 4);
    const RbfKernel<double> k(1.3);
    EXPECT_EQ(kernel_eval(k, a, b), kernel_eval(k, b, a));
    EXPECT_EQ(kernel_grad1(k, a, b), -kernel_grad1(k, b, a));
  }
}

TEST(Kernel, GradientMatchesCentralDifferences) {
  Rng rng(11);
  const double step = 1e-6;
  for (Eigen::Index d : {1, 2, 5, 9, 16}) {
    for (int trial = 0; trial < 50; ++trial) {
      const RbfKernel<double> k(0.5 * static_cast<double>(d));
      const Eigen::VectorXd a = random_vector(rng, d), b = random_vector(rng, d);
      const Eigen::VectorXd g = kernel_grad1(k, a, b);
      Eigen::VectorXd fd(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::VectorXd ap = a, am = a;
        ap(i) += step;
        am(i) -= step;
        fd(i) = (kernel_eval(k, ap, b) - kernel_eval(k, am, b)) / (2 * step);
      }
      EXPECT_LE((g - fd).norm(), 1e-6 * std::max(g.norm(), 1e-3)) << "d=" << d;
    }
  }
}

TEST(Kernel, RejectsBadBandwidthAndShapes) {
  EXPECT_THROW(RbfKernel<double>(0.0), std::invalid_argument);
  EXPECT_THROW(RbfKernel<double>(-1.0), std::invalid_argument);
  EXPECT_THROW(RbfKernel<double>(std::nan("")), std::invalid_argument);
  const RbfKernel<double> k(1.0);
  EXPECT_THROW(kernel_eval(k, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Kernel, GramMatrixIsSymmetricWithUnitDiagonal) {
  Rng rng(2);
  Eigen::MatrixXd pts(6, 3);
  for (Eigen::Index i = 0; i < 6; ++i) pts.row(i) = random_vector(rng, 3).transpose();
  const Eigen::MatrixXd g = gram_matrix(RbfKernel<double>(1.0), pts);
  EXPECT_TRUE(g.isApprox(g.transpose(), 0.0));
  EXPECT_TRUE(g.diagonal().isOnes());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff(), 0.0);
}

TEST(Ensemble, SeedsAreReproducible) {
  const Eigen::VectorXd mean = Eigen::VectorXd::Ones(3), var = Eigen::VectorXd::Constant(3, 0.5);
  EXPECT_EQ(init_ensemble<double>(50, mean, var, 9), init_ensemble<double>(50, mean, var, 9));
  EXPECT_NE(init_ensemble<double>(50, mean, var, 9).particles, init_ensemble<double>(50, mean, var, 10).particles);
}

TEST(Ensemble, TinyVarianceCollapsesToMean) {
  const Eigen::Vector2d mean(1, 1);
  const auto e = init_ensemble<double>(20, Eigen::VectorXd(mean), Eigen::VectorXd::Constant(2, 1e-300), 1);
  for (Eigen::Index i = 0; i < e.count(); ++i) EXPECT_TRUE(e.particles.row(i).transpose().isApprox(mean, 1e-12));
}

TEST(Ensemble, MomentsObeyClt) {
  const Eigen::Index n = 100000;
  const Eigen::Vector2d mean(1, -2), var(1e-4, 4.0);
  const auto e = init_ensemble<double>(n, Eigen::VectorXd(mean), Eigen::VectorXd(var), 77);
  const Eigen::VectorXd m = e.particles.colwise().mean();
  for (int k = 0; k < 2; ++k) EXPECT_LE(std::abs(m(k) - mean(k)), 4 * std::sqrt(var(k) / n));
  const Eigen::MatrixXd centered = e.particles.rowwise() - m.transpose();
  const Eigen::VectorXd v = centered.colwise().squaredNorm() / static_cast<double>(n - 1);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(v(k) / var(k), 1.0, 0.03);
}

TEST(Ensemble, RejectsInvalidInput) {
  EXPECT_THROW(init_ensemble<double>(0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 1), std::invalid_argument);
  EXPECT_THROW(init_ensemble<double>(2, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(1), 1), std::invalid_argument);
  EXPECT_THROW(init_ensemble<double>(2, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1), std::invalid_argument);
}
