#include <gtest/gtest.h>

#include "mlsvgd/bayes.hpp"
#include "mlsvgd/mlsvgd.hpp"
#include "test_util.hpp"

using namespace mlsvgd;

namespace {

/// Gaussian hierarchy N(shift_l, 1) in 2D with cost weight 4^l.
Hierarchy shifted_hierarchy(int levels, bool identical = false) {
  Hierarchy h;
  for (int l = 1; l <= levels; ++l) {
    const double shift = identical ? 0.0 : std::pow(2.0, -l);
    h.push_back(std::make_shared<GaussianTarget>(l, Eigen::VectorXd::Constant(2, shift), Eigen::MatrixXd::Identity(2, 2),
                                                 std::pow(4.0, l)));
  }
  return h;
}

ParticleEnsemble<double> start(std::uint64_t seed = 1) {
  return init_ensemble<double>(30, Eigen::VectorXd::Constant(2, 1.5), Eigen::VectorXd::Constant(2, 0.1), seed);
}

SvgdConfig config(double tol = 1e-3) {
  SvgdConfig c;
  c.step_size = 0.2;
  c.tolerance = tol;
  c.max_iterations = 5000;
  return c;
}

}  // namespace

TEST(LevelSchedule, Validation) {
  EXPECT_THROW(LevelSchedule({}), std::invalid_argument);
  EXPECT_THROW(LevelSchedule({0, 1}), std::invalid_argument);
  EXPECT_THROW(LevelSchedule({2, 2}), std::invalid_argument);
  EXPECT_THROW(LevelSchedule({3, 1}), std::invalid_argument);
  EXPECT_THROW(LevelSchedule({1, 2}).check_against(3), std::invalid_argument);
  EXPECT_NO_THROW(LevelSchedule({1, 3}).check_against(3));
  EXPECT_EQ(LevelSchedule({1, 2, 3}).to_string(), "1-2-3");
}

TEST(CostLedger, Arithmetic) {
  EXPECT_EQ(cost_of_run(CostLedger{}), 0.0);
  CostLedger one;
  one.particle_count = 10;
  one.levels.push_back({1, 2.0, 5, 50, 0});
  EXPECT_EQ(cost_of_run(one), 100.0);
}

TEST(Mlsvgd, SingleLevelScheduleEqualsSingleLevelRun) {
  const auto h = shifted_hierarchy(3);
  const RbfKernel<double> k(1.0);
  const auto ml = run_mlsvgd(start(), h, LevelSchedule({3}), k, config());
  const auto sl = run_single_level(start(), *h[2], k, config());
  EXPECT_EQ(ml.ensemble, sl.ensemble);
  ASSERT_EQ(ml.trace.size(), sl.trace.size());
  for (std::size_t i = 0; i < ml.trace.size(); ++i) {
    EXPECT_EQ(ml.trace[i].grad_norm, sl.trace[i].grad_norm);
    EXPECT_EQ(ml.trace[i].cum_cost, sl.trace[i].cum_cost);
  }
}

TEST(Mlsvgd, IdenticalLevelsStopAfterOneIteration) {
  const auto h = shifted_hierarchy(3, true);
  const auto r = run_mlsvgd(start(), h, LevelSchedule({1, 2, 3}), RbfKernel<double>(1.0), config());
  ASSERT_EQ(r.ledger.levels.size(), 3u);
  EXPECT_GT(r.ledger.levels[0].iterations, 1);
  EXPECT_EQ(r.ledger.levels[1].iterations, 1);
  EXPECT_EQ(r.ledger.levels[2].iterations, 1);
}

TEST(Mlsvgd, SegmentsReachToleranceAndCostsAdd) {
  const auto h = shifted_hierarchy(4);
  const auto r = run_mlsvgd(start(), h, LevelSchedule({1, 2, 4}), RbfKernel<double>(1.0), config());
  EXPECT_TRUE(r.all_tolerances_reached());
  ASSERT_EQ(r.switch_indices.size(), 3u);
  const int kLevels[3] = {1, 2, 4};
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t end = s + 1 < 3 ? r.switch_indices[s + 1] : r.trace.size();
    EXPECT_LE(r.trace[end - 1].grad_norm, 1e-3);
    for (std::size_t i = r.switch_indices[s]; i < end; ++i) EXPECT_EQ(r.trace[i].level, kLevels[s]);
  }
  EXPECT_EQ(r.trace.back().cum_cost, cost_of_run(r.ledger));
  EXPECT_EQ(r.ledger.cumulative_cost, cost_of_run(r.ledger));
  double sum = 0;
  for (const auto& l : r.ledger.levels) {
    sum += l.cost_weight * 30 * static_cast<double>(l.iterations);
    EXPECT_EQ(l.score_evaluations, l.iterations * 30);
  }
  EXPECT_DOUBLE_EQ(sum, cost_of_run(r.ledger));
}

TEST(Mlsvgd, IncomingEnsembleIsPreviousFinal) {
  const auto h = shifted_hierarchy(3);
  std::vector<ParticleEnsemble<double>> snapshots;
  MlsvgdOptions opt;
  opt.observer = [&](const IterationRecord&, const ParticleEnsemble<double>& e) { snapshots.push_back(e); };
  const RbfKernel<double> k(1.0);
  const auto r = run_mlsvgd(start(), h, LevelSchedule({1, 2, 3}), k, config(), opt);
  ASSERT_EQ(snapshots.size(), r.trace.size());
  for (std::size_t s = 1; s < r.switch_indices.size(); ++s) {
    const std::size_t i = r.switch_indices[s];
    const auto& before = snapshots[i - 1];
    const Eigen::MatrixXd scores = evaluate_scores(*h[static_cast<std::size_t>(r.trace[i].level - 1)], before.particles);
    EXPECT_EQ(svgd_step(before, k, scores, 0.2).particles, snapshots[i].particles);
  }
}

TEST(Mlsvgd, DeterministicAndFlagsExhaustedLevels) {
  const auto h1 = shifted_hierarchy(3), h2 = shifted_hierarchy(3);
  SvgdConfig c = config(1e-9);
  c.max_iterations = 20;
  const auto a = run_mlsvgd(start(4), h1, LevelSchedule({1, 3}), RbfKernel<double>(1.0), c);
  const auto b = run_mlsvgd(start(4), h2, LevelSchedule({1, 3}), RbfKernel<double>(1.0), c);
  EXPECT_EQ(a.ensemble, b.ensemble);
  EXPECT_EQ(a.tolerance_reached, (std::vector<bool>{false, false}));
  EXPECT_EQ(a.trace.size(), 40u);
  EXPECT_FALSE(a.all_tolerances_reached());
}

TEST(Mlsvgd, PerLevelTolerances) {
  const auto h = shifted_hierarchy(3);
  MlsvgdOptions opt;
  opt.level_tolerances = {1e-1, 1e-2, 1e-3};
  const auto r = run_mlsvgd(start(), h, LevelSchedule({1, 2, 3}), RbfKernel<double>(1.0), config(), opt);
  EXPECT_LE(r.trace[r.switch_indices[1] - 1].grad_norm, 1e-1);
  EXPECT_GT(r.trace[r.switch_indices[1] - 1].grad_norm, 1e-2);
  opt.level_tolerances = {1e-1};
  EXPECT_THROW(run_mlsvgd(start(), h, LevelSchedule({1, 2, 3}), RbfKernel<double>(1.0), config(), opt),
               std::invalid_argument);
}

TEST(Mlsvgd, ReportJsonCarriesLedger) {
  const auto h = shifted_hierarchy(2);
  const auto r = run_mlsvgd(start(), h, LevelSchedule({1, 2}), RbfKernel<double>(1.0), config());
  const auto j = to_json(r);
  EXPECT_EQ(j["ledger"]["levels"].size(), 2u);
  EXPECT_EQ(j["model_cost"].get<double>(), cost_of_run(r.ledger));
  EXPECT_EQ(j["switch_indices"].size(), 2u);
}
