#include <cmath>

#include <gtest/gtest.h>

#include "mlsvgd/bayes.hpp"
#include "mlsvgd/rates.hpp"

using namespace mlsvgd;

TEST(Rates, ExactLogLinearData) {
  std::vector<int> levels{1, 2, 3, 4, 5};
  std::vector<double> costs, kls;
  for (int l : levels) {
    costs.push_back(std::pow(4.0, l));
    kls.push_back(std::pow(2.0, -2.0 * l));
  }
  const auto r = fit_rates(levels, costs, kls, 2.0);
  EXPECT_NEAR(r.alpha, 2.0, 2e-6);
  EXPECT_NEAR(r.gamma, 2.0, 2e-6);
  EXPECT_NEAR(r.kl_fit.r_squared, 1.0, 1e-12);
}

TEST(Rates, BaseChangesExponents) {
  std::vector<int> levels{1, 2, 3};
  std::vector<double> costs{8, 64, 512}, kls{1.0 / 8, 1.0 / 64, 1.0 / 512};
  const auto r = fit_rates(levels, costs, kls, 8.0);
  EXPECT_NEAR(r.gamma, 1.0, 1e-12);
  EXPECT_NEAR(r.alpha, 1.0, 1e-12);
}

TEST(Rates, NeedsThreeLevels) {
  EXPECT_THROW(fit_rates({1, 2}, {1, 2}, {1, 0.5}), std::invalid_argument);
}

TEST(Rates, LineFitResiduals) {
  const auto f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7.5});
  double sum = 0;
  for (double r : f.residuals) sum += r;
  EXPECT_NEAR(sum, 0.0, 1e-12);
  EXPECT_GT(f.r_squared, 0.99);
  EXPECT_LT(f.r_squared, 1.0);
}

TEST(Rates, PlantedGaussianHierarchy) {
  GaussianHierarchyProblem p;
  p.levels = 5;
  const auto r = fit_rates(p);
  EXPECT_NEAR(r.alpha, 2.0, 1e-6);
  EXPECT_NEAR(r.gamma, 2.0, 1e-6);
  ASSERT_TRUE(r.lambda.has_value());
  EXPECT_GT(*r.lambda, 0.0);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("lambda_note"));
}

TEST(Rates, DecayFitExcludesPlateau) {
  SvgdDecay d;
  for (int k = 0; k < 40; ++k) {
    d.times.push_back(k * 0.5);
    d.kls.push_back(std::max(std::exp(-0.8 * k * 0.5), 1e-6));
  }
  EXPECT_NEAR(fit_decay_rate(d).slope, -0.8, 1e-9);
}
