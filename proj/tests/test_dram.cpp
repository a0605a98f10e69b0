#include <cmath>
#include <deque>
#include <limits>

#include <gtest/gtest.h>

#include "mlsvgd/dram.hpp"
#include "mlsvgd/errors.hpp"

using namespace mlsvgd;

namespace {

class ScriptedDraws : public DramDraws {
 public:
  ScriptedDraws(std::deque<double> normals, std::deque<double> uniforms)
      : normals_(std::move(normals)), uniforms_(std::move(uniforms)) {}
  Eigen::VectorXd standard_normal(Eigen::Index dim) override {
    Eigen::VectorXd z(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      z(k) = normals_.front();
      normals_.pop_front();
    }
    return z;
  }
  double uniform() override {
    const double u = uniforms_.front();
    uniforms_.pop_front();
    return u;
  }

 private:
  std::deque<double> normals_, uniforms_;
};

double std_normal_log(const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); }

DramConfig base_config(Eigen::VectorXd start) {
  DramConfig c;
  c.initial_state = std::move(start);
  c.burn_in = 1000;
  c.samples = 4000;
  c.stride = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Dram, HandComputedMetropolisTrace) {
  DramConfig c;
  c.initial_state = Eigen::VectorXd::Zero(1);
  c.initial_proposal_var = 1e-2;
  c.burn_in = 0;
  c.samples = 5;
  c.stride = 1;
  c.adapt = false;
  c.delayed_rejection = false;
  c.record_log = true;
  ScriptedDraws draws({1, -2, 3, 0.5, -1}, {0.5, 0.9, 0.1, 0.99, 0.3});
  const Chain chain = dram_sample(std_normal_log, c, draws);
  // x: 0 -> 0.1 (a=-0.005) -> -0.1 (a=0) -> 0.2 (a=-0.015) -> 0.2 (reject 0.25, a=-0.01125 < log 0.99) -> 0.1
  const double expected[5] = {0.1, -0.1, 0.2, 0.2, 0.1};
  const bool accepted[5] = {true, true, true, false, true};
  const double log_alpha[5] = {-0.005, 0.0, -0.015, -0.01125, 0.0};
  ASSERT_EQ(chain.samples.rows(), 5);
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(chain.samples(k, 0), expected[k], 1e-15);
    EXPECT_EQ(chain.log[k].accepted, accepted[k]);
    EXPECT_NEAR(chain.log[k].log_alpha, log_alpha[k], 1e-15);
  }
  EXPECT_EQ(chain.accepted_stage1, 4);
  EXPECT_EQ(chain.stage2_attempts, 0);
}

TEST(Dram, ReplayedAcceptanceSatisfiesMetropolisAndDrRatios) {
  auto target = [](const Eigen::VectorXd& x) { return -0.5 * (x(0) * x(0) / 4.0 + x(1) * x(1)) - 0.3 * x(0) * x(1); };
  DramConfig c = base_config(Eigen::Vector2d(0.5, 0.5));
  c.adapt = false;
  c.initial_proposal_var = 4.0;  // large steps so the second stage is exercised
  c.record_log = true;
  c.burn_in = 0;
  c.samples = 2000;
  c.stride = 1;
  const Chain chain = dram_sample(target, c);
  const double v = c.initial_proposal_var;
  int stage2 = 0;
  for (std::size_t i = 0; i < chain.log.size(); ++i) {
    const auto& s = chain.log[i];
    const double lx = target(s.current), ly = target(s.proposal);
    if (s.stage == 1) {
      EXPECT_NEAR(s.log_alpha, std::min(0.0, ly - lx), 1e-12);
    } else {
      ++stage2;
      const auto& first = chain.log[i - 1];
      ASSERT_EQ(first.stage, 1);
      const Eigen::VectorXd& y1 = first.proposal;
      const double ly1 = target(y1);
      const double a_fwd = std::min(1.0, std::exp(ly1 - lx));
      const double a_rev = std::min(1.0, std::exp(ly1 - ly));
      const double q_rev = std::exp(-0.5 * (y1 - s.proposal).squaredNorm() / v);
      const double q_fwd = std::exp(-0.5 * (y1 - s.current).squaredNorm() / v);
      const double ratio = a_rev >= 1.0 ? 0.0 : std::exp(ly - lx) * q_rev * (1 - a_rev) / (q_fwd * (1 - a_fwd));
      EXPECT_NEAR(std::exp(s.log_alpha), std::min(1.0, ratio), 1e-9);
    }
    EXPECT_EQ(s.accepted, std::log(s.uniform) < s.log_alpha);
  }
  EXPECT_GT(stage2, 100);
}

TEST(Dram, ThinningAndCounts) {
  const Chain chain = dram_sample(std_normal_log, base_config(Eigen::VectorXd::Zero(2)));
  ASSERT_EQ(chain.samples.rows(), 2000);
  ASSERT_EQ(chain.retained_iterations.size(), 2000u);
  for (std::size_t k = 0; k < chain.retained_iterations.size(); ++k) {
    EXPECT_EQ(chain.retained_iterations[k], 1000 + 2 * static_cast<long>(k));
  }
  for (double a : {chain.acceptance_stage1(), chain.acceptance_stage2(), chain.acceptance_total()}) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  EXPECT_EQ(chain.iterations, 5000);
  // Adaptation every 100 iterations strictly after iteration 1000.
  EXPECT_EQ(chain.covariance_history.size(), 1u + 40u);
}

TEST(Dram, SymmetricTargetCentered) {
  DramConfig c = base_config(Eigen::Vector2d(3.0, -3.0));
  c.burn_in = 10000;
  c.samples = 20000;
  const Chain chain = dram_sample(std_normal_log, c);
  const Eigen::VectorXd m = reference_mean(chain);
  EXPECT_LT(m.norm(), 0.1);
  EXPECT_LT((sample_covariance(chain) - Eigen::Matrix2d::Identity()).norm(), 0.15);
}

TEST(Dram, Deterministic) {
  const auto c = base_config(Eigen::VectorXd::Zero(3));
  EXPECT_EQ(dram_sample(std_normal_log, c).samples, dram_sample(std_normal_log, c).samples);
}

TEST(Dram, FailedEvaluationsAreRejected) {
  auto target = [](const Eigen::VectorXd& x) -> double {
    if (x(0) > 0.5) throw RunError("solver failure");
    return -0.5 * x.squaredNorm();
  };
  const Chain chain = dram_sample(target, base_config(Eigen::VectorXd::Zero(1)));
  EXPECT_GT(chain.failed_evaluations, 0);
  EXPECT_LE(chain.samples.maxCoeff(), 0.5);
}

TEST(Dram, StallWarningAndInvalidStart) {
  auto spike = [](const Eigen::VectorXd& x) {
    return x.norm() == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  DramConfig c = base_config(Eigen::VectorXd::Zero(1));
  c.burn_in = 0;
  c.samples = 1500;
  EXPECT_TRUE(dram_sample(spike, c).stall_warning);
  EXPECT_FALSE(dram_sample(std_normal_log, c).stall_warning);
  c.initial_state = Eigen::VectorXd::Ones(1);
  EXPECT_THROW(dram_sample(spike, c), RunError);
  c.stride = 0;
  EXPECT_THROW(dram_sample(std_normal_log, c), std::invalid_argument);
}

TEST(Dram, DelayedRejectionFormulaEdgeCases) {
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(delayed_rejection_log_alpha(0.0, -1.0, ninf, 0.0, 0.0), ninf);
  // y1 at least as probable as y2: the reverse first stage would accept surely.
  EXPECT_EQ(delayed_rejection_log_alpha(0.0, -1.0, -2.0, 0.0, 0.0), ninf);
  EXPECT_EQ(metropolis_log_alpha(0.0, 1.0), 0.0);
}

TEST(Dram, MeanErrorMetric) {
  const Eigen::Vector2d ref(1, 1);
  std::vector<Eigen::VectorXd> means(10, Eigen::Vector2d(1, 2));
  EXPECT_DOUBLE_EQ(mean_error_metric(ref, means), 1.0);
  means.pop_back();
  EXPECT_THROW(mean_error_metric(ref, means), std::invalid_argument);
  EXPECT_DOUBLE_EQ(mean_error_metric(ref, means, 9), 1.0);
}

TEST(Dram, SummaryJsonAndCsv) {
  const auto c = base_config(Eigen::VectorXd::Zero(2));
  const Chain chain = dram_sample(std_normal_log, c);
  const auto j = chain_summary_json(chain, c);
  EXPECT_EQ(j["retained"].get<long>(), 2000);
  EXPECT_EQ(j["config"]["rng"], "mt19937_64");
  EXPECT_EQ(chain_samples_csv(chain).substr(0, 15), "theta_1,theta_2");
}
