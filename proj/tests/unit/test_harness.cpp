#include "oracles.hpp"
#include "umaxent/harness.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace umaxent;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.x_size = 4;
  c.omega_sizes = {6};
  c.alphas = {2};
  c.betas = {3};
  c.sample_schedule = {1, 4};
  c.repeats = 2;
  c.master_seed = 5;
  c.em.restarts = 2;
  c.em.max_em_iterations = 200;
  c.labeled_samples = 500;
  c.x_sizes = {3};
  return c;
}

std::string csv_of(const std::vector<TrialResult>& r) {
  std::ostringstream out;
  write_csv(out, r);
  return out.str();
}

}  // namespace

TEST(ExperimentConfig, DefaultsAndValidation) {
  const ExperimentConfig c;
  EXPECT_EQ(c.x_size, 10);
  EXPECT_EQ(c.omega_sizes, (std::vector<Eigen::Index>{10, 20, 50, 100, 150, 200, 300}));
  EXPECT_EQ(c.sample_schedule.front(), 1u);
  EXPECT_EQ(c.sample_schedule.back(), 1u << 18);
  EXPECT_EQ(c.repeats, 100);
  EXPECT_EQ(c.labeled_samples, 10000u);
  ExperimentConfig bad = tiny();
  bad.sample_schedule = {4, 4};
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = tiny();
  bad.repeats = 0;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = tiny();
  bad.variants = {"umaxent", "oracle"};
  EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(RandomModels, BlockStructure) {
  ExperimentConfig c = tiny();
  c.alphas = {1, 3};
  const auto results = run_random_models(c);
  const std::size_t variants = random_model_variants().size();
  EXPECT_EQ(results.size(), variants * 2 /*alphas*/ * 2 /*repeats*/ * 2 /*N*/);
  std::set<std::tuple<std::string, double, int, std::size_t>> cells;
  for (const auto& t : results) {
    EXPECT_TRUE(cells.emplace(t.variant, t.alpha, t.repeat, t.n_samples).second);
    EXPECT_GE(t.jsd_to_truth, 0.0);
    EXPECT_LE(t.jsd_to_truth, std::log(2.0));
  }
}

TEST(RandomModels, VariantSubset) {
  ExperimentConfig c = tiny();
  c.variants = {"true_x", "umaxent"};
  const auto results = run_random_models(c);
  EXPECT_EQ(results.size(), 2u * 2u * 2u);
  for (const auto& t : results) EXPECT_TRUE(t.variant == "true_x" || t.variant == "umaxent");
}

TEST(RandomModels, DeterministicAcrossRunsAndThreadCounts) {
  const ExperimentConfig c = tiny();
  const std::string once = csv_of(run_random_models(c, 1));
  EXPECT_EQ(once, csv_of(run_random_models(c, 1)));
  EXPECT_EQ(once, csv_of(run_random_models(c, 3)));
  ExperimentConfig other = c;
  other.master_seed = 6;
  EXPECT_NE(once, csv_of(run_random_models(other, 1)));
}

TEST(RandomModels, InstanceMatchesRunnerStream) {
  const ExperimentConfig c = tiny();
  RandomInstance a = random_instance(c, detail::Study::random_models, 0, 1);
  RandomInstance b = random_instance(c, detail::Study::random_models, 0, 1);
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_EQ(a.obs.channel(), b.obs.channel());
  for (const auto& t : run_random_models(c)) {
    if (t.repeat == 1) {
      EXPECT_EQ(t.seed, a.seed);
    }
  }
}

TEST(NegativeObs, RowsAndVariants) {
  const auto results = run_negative_obs(tiny());
  EXPECT_EQ(results.size(), 2u /*variants*/ * 2u /*repeats*/ * 2u /*N*/);
  for (const auto& t : results) {
    EXPECT_EQ(t.omega_size, 3);
    EXPECT_TRUE(t.variant == "umaxent" || t.variant == "ml_x");
  }
}

TEST(Blackbox, RowsAndDeterminism) {
  const ExperimentConfig c = tiny();
  const auto results = run_blackbox(c);
  EXPECT_EQ(results.size(), 3u * 2u * 2u);
  EXPECT_EQ(csv_of(results), csv_of(run_blackbox(c, 2)));
}

TEST(Harness, FailedTrialRecordedAsNonConverged) {
  const Simplex truth({0.7, 0.3});
  const TrialResult t = detail::run_variant("umaxent", {2, 1.0, 1.0}, 8, 0, 42, truth,
                                            []() -> detail::Outcome { throw Error("boom"); });
  EXPECT_FALSE(t.converged);
  EXPECT_NEAR(t.jsd_to_truth, jsd(Simplex::uniform(2), truth), 1e-15);
  EXPECT_EQ(t.seed, 42u);
}

TEST(Harness, IdentityChannelCollapsesVariants) {
  Rng rng(12);
  const Simplex truth = gen_true_distribution(3.0, 5, rng);
  const ObservationModel obs = ObservationModel::identity(5);
  const Dataset d = draw_dataset(truth, obs, 4096, rng);
  const FeatureMap ind = FeatureMap::indicators(5);
  const Simplex a = solve_maxent(d.empirical_x(4096), ind, {}).posterior;
  const Simplex b = solve_ml_x(d.empirical_omega(4096), obs, ind, {}).posterior;
  const Simplex c = solve_umaxent(d.empirical_omega(4096), obs, ind, {}).posterior;
  EXPECT_LT(jsd(a, b), 1e-6);
  EXPECT_LT(jsd(a, c), 1e-6);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw Error("x"); }), Error);
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Summarize, Examples) {
  EXPECT_THROW(summarize({}), InvalidInput);
  TrialResult t{"umaxent", 50, 3, 3, 16, 0, 0.1, 1.0, true, 3, 1};
  EXPECT_EQ(summarize({t})[0].std_jsd, 0.0);
  TrialResult u = t;
  u.repeat = 1;
  u.jsd_to_truth = 0.3;
  const auto rows = summarize({t, u});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].mean_jsd, 0.2, 1e-15);
  EXPECT_NEAR(rows[0].std_jsd, 0.1, 1e-15);
}

TEST(Summarize, PreservesTrialCount) {
  const auto results = run_random_models(tiny());
  std::size_t total = 0;
  for (const auto& row : summarize(results)) total += row.count;
  EXPECT_EQ(total, results.size());
}

TEST(Csv, HeaderAndFormatting) {
  TrialResult t{"ml_x", 50, 3, 2.5, 16, 4, 0.1, 1.25, false, 17, 123456789012345ull};
  const std::string csv = csv_of({t});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "variant,omega_size,alpha,beta,n_samples,repeat,jsd,entropy,converged,iterations,seed");
  EXPECT_EQ(csv.substr(csv.find('\n') + 1),
            "ml_x,50,3,2.5,16,4,0.10000000000000001,1.25,0,17,123456789012345\n");
}
