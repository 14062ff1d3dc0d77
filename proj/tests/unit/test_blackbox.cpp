#include "oracles.hpp"
#include "umaxent/blackbox.hpp"
#include "umaxent/generators.hpp"

#include <gtest/gtest.h>

using namespace umaxent;

namespace {

ObservationModel symmetric_channel() {
  Eigen::MatrixXd c(2, 2);
  c << 0.8, 0.2, 0.2, 0.8;
  return ObservationModel(c);
}

ConfusionModel confusion_of(const Eigen::MatrixXd& channel) {
  return {channel, std::vector<std::size_t>(static_cast<std::size_t>(channel.rows()), 1)};
}

}  // namespace

TEST(EstimateConfusion, PerfectPredictorGivesIdentity) {
  std::vector<PredictionRecord> records;
  for (std::size_t x = 0; x < 3; ++x) records.push_back({x, Simplex::point_mass(3, static_cast<Eigen::Index>(x))});
  const ConfusionModel m = estimate_confusion(records);
  EXPECT_EQ(m.channel, Eigen::MatrixXd::Identity(3, 3));
  EXPECT_TRUE(m.unestimated().empty());
}

TEST(EstimateConfusion, AveragesRows) {
  const std::vector<PredictionRecord> records = {{0, Simplex({0.9, 0.1})}, {0, Simplex({0.7, 0.3})}};
  const ConfusionModel m = estimate_confusion(records);
  EXPECT_NEAR(m.channel(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(m.channel(0, 1), 0.2, 1e-15);
  EXPECT_EQ(m.counts, (std::vector<std::size_t>{2, 0}));
  EXPECT_EQ(m.unestimated(), (std::vector<std::size_t>{1}));
  EXPECT_FALSE(m.estimated(1));
  try {
    (void)m.observation_model();
    FAIL() << "expected an error for the missing row";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(EstimateConfusion, RejectsBadInput) {
  EXPECT_THROW(estimate_confusion({}), InvalidInput);
  const std::vector<PredictionRecord> unlabeled = {{std::nullopt, Simplex({0.5, 0.5})}};
  EXPECT_THROW(estimate_confusion(unlabeled), InvalidInput);
  const std::vector<PredictionRecord> out_of_range = {{5, Simplex({0.5, 0.5})}};
  EXPECT_THROW(estimate_confusion(out_of_range), InvalidInput);
}

TEST(AggregatePredictions, Means) {
  EXPECT_THROW(aggregate_predictions({}), InvalidInput);
  const std::vector<PredictionRecord> one = {{std::nullopt, Simplex({0.3, 0.7})}};
  EXPECT_EQ(aggregate_predictions(one), Simplex({0.3, 0.7}));
  const std::vector<PredictionRecord> two = {{std::nullopt, Simplex({1, 0})}, {std::nullopt, Simplex({0, 1})}};
  EXPECT_EQ(aggregate_predictions(two), Simplex({0.5, 0.5}));
  const std::vector<PredictionRecord> three = {{std::nullopt, Simplex({0.5, 0.5})},
                                               {std::nullopt, Simplex({0.8, 0.2})},
                                               {std::nullopt, Simplex({0.2, 0.8})}};
  EXPECT_NEAR(aggregate_predictions(three)[0], 0.5, 1e-15);
}

TEST(SolveBlackbox, IdentityConfusionMatchesMaxEnt) {
  const Simplex ptilde({0.5, 0.2, 0.3});
  const FeatureMap ind = FeatureMap::indicators(3);
  const UMaxEntResult r =
      solve_umaxent_blackbox(ptilde, confusion_of(Eigen::MatrixXd::Identity(3, 3)), ind, {});
  EXPECT_LT(jsd(r.posterior, solve_maxent(ptilde, ind, {}).posterior), 1e-6);
}

TEST(SolveBlackbox, SymmetricConfusionSharpens) {
  const Simplex ptilde({0.7, 0.3});
  const UMaxEntResult r = solve_umaxent_blackbox(ptilde, confusion_of(symmetric_channel().channel()),
                                                 FeatureMap::indicators(2), {});
  EXPECT_GT(r.posterior[0], ptilde[0] + 0.1);
  // The only Pr(X) with marginal (0.7, 0.3): 0.8 p + 0.2 (1 - p) = 0.7, p = 5/6.
  EXPECT_NEAR(r.posterior[0], 5.0 / 6.0, 1e-3);
}

TEST(SolveBlackbox, UniformConfusionGivesUniform) {
  const UMaxEntResult r = solve_umaxent_blackbox(
      Simplex({0.9, 0.05, 0.05}), confusion_of(Eigen::MatrixXd::Constant(3, 3, 1.0 / 3)),
      FeatureMap::indicators(3), {});
  EXPECT_LT(jsd(r.posterior, Simplex::uniform(3)), 1e-9);
}

TEST(SyntheticBlackBox, Examples) {
  SyntheticBlackBox id(ObservationModel::identity(3), 2.0, 1);
  EXPECT_EQ(id.predict(1), Simplex::point_mass(3, 1));
  SyntheticBlackBox sym(symmetric_channel(), 1.0, 1);
  EXPECT_NEAR(sym.predict(0)[0], 0.8, 1e-15);
  SyntheticBlackBox hot(symmetric_channel(), 1e9, 1);
  EXPECT_NEAR(hot.predict(0)[0], 0.5, 1e-9);
  EXPECT_THROW(SyntheticBlackBox(symmetric_channel(), 0.0, 1), InvalidInput);
}

TEST(SyntheticBlackBox, ConfusionConvergesToExpectedPrediction) {
  Rng gen_rng(7);
  const ObservationModel obs = gen_observation_model(2.0, 4, 8, gen_rng);
  SyntheticBlackBox box(obs, 2.0, 3);
  std::vector<PredictionRecord> labeled;
  for (std::size_t x = 0; x < 4; ++x) {
    for (int i = 0; i < 10000; ++i) labeled.push_back(box.draw(x, true).second);
  }
  const ConfusionModel m = estimate_confusion(labeled);
  for (Eigen::Index x = 0; x < 4; ++x) {
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(4);
    for (Eigen::Index w = 0; w < 8; ++w) expected += obs.channel()(x, w) * box.predict(static_cast<std::size_t>(w)).probs();
    EXPECT_LT((m.channel.row(x).transpose() - expected).lpNorm<1>(), 0.02);
  }
}

TEST(SyntheticBlackBox, PipelineBeatsAggregationOnSkewedTruth) {
  double umaxent_total = 0, aggregate_total = 0;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    Rng rng(mix_seed({77, rep}));
    const Simplex truth = gen_true_distribution(3.0, 10, rng);
    const ObservationModel obs = gen_observation_model(3.0, 10, 50, rng);
    SyntheticBlackBox box(obs, 2.0, rep);
    std::vector<PredictionRecord> labeled, unlabeled;
    for (int i = 0; i < 10000; ++i) labeled.push_back(box.draw(rng.index(10), true).second);
    const Dataset data = draw_dataset(truth, obs, 1 << 14, rng);
    for (auto w : data.omega) unlabeled.push_back({std::nullopt, box.predict(w)});
    const Simplex ptilde = aggregate_predictions(unlabeled);
    EmConfig em;
    em.restarts = 3;
    const UMaxEntResult r =
        solve_umaxent_blackbox(ptilde, estimate_confusion(labeled), FeatureMap::indicators(10), em);
    umaxent_total += jsd(r.posterior, truth);
    aggregate_total += jsd(ptilde, truth);
  }
  EXPECT_LT(umaxent_total, aggregate_total);
}
