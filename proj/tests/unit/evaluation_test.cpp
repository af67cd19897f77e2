// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "locun/error.hpp"
#include "locun/evaluation/mia.hpp"
#include "locun/evaluation/report.hpp"
#include "support/oracles.hpp"
#include "support/test_models.hpp"

namespace locun::eval {
namespace {

using locun::testing::dense;
using locun::testing::make_view;

class ConstantAttacker : public Attacker {
 public:
  explicit ConstantAttacker(bool seen) : seen_(seen) {}
  void fit(const FeatureMatrix&, const std::vector<bool>&) override {}
  bool predicts_seen(const double*) const override { return seen_; }

 private:
  bool seen_;
};

FeatureMatrix column(std::vector<double> v) {
  FeatureMatrix f;
  f.rows = v.size();
  f.cols = 1;
  f.values = std::move(v);
  return f;
}

TEST(AccuracyTest, AllCorrectAndTieRule) {
  nn::Model id = nn::Model::build({nn::Shape{{3}}, {dense(3, false)}});
  for (std::size_t k = 0; k < 3; ++k) id.params()[k * 3 + k] = 1.0f;
  const auto view = make_view(nn::Shape{{3}}, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 1}, {0, 1, 2, 1});
  EXPECT_EQ(accuracy(id, view), 1.0);

  const nn::Model zero = nn::Model::build({nn::Shape{{3}}, {dense(4)}});
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) labels.push_back(i % 4);
  const auto balanced = make_view(nn::Shape{{3}}, 4, std::vector<float>(120, 0.5f), labels);
  EXPECT_EQ(accuracy(zero, balanced), 0.25);

  EXPECT_THROW(accuracy(id, data::DataView(view.dataset_ptr(), {})), ValidationError);
}

TEST(MiaTest, ConstantAttackersGiveExtremeScores) {
  const FeatureMatrix seen = column({0.9, 0.8}), unseen = column({0.1, 0.2}), forget = column({0.5, 0.6, 0.7});
  ConstantAttacker all_seen(true), all_unseen(false);
  const MIAResult a = mia_from_features(seen, unseen, forget, MiaFeature::confidence, all_seen);
  EXPECT_EQ(a.tn, 0u);
  EXPECT_EQ(a.score, 0.0);
  const MIAResult b = mia_from_features(seen, unseen, forget, MiaFeature::confidence, all_unseen);
  EXPECT_EQ(b.tn, 3u);
  EXPECT_EQ(b.score, 1.0);
}

TEST(MiaTest, HandThresholdFixture) {
  const FeatureMatrix seen = column({0.9, 0.95}), unseen = column({0.2, 0.3});
  const FeatureMatrix forget = column({0.25, 0.92, 0.1, 0.88});
  LinearSvm svm;
  const MIAResult r = mia_from_features(seen, unseen, forget, MiaFeature::confidence, svm);
  EXPECT_EQ(r.tn, 2u);
  EXPECT_EQ(r.score, 0.5);
  EXPECT_EQ(r.attacker_train_acc, 1.0);
  EXPECT_EQ(locun::testing::threshold_oracle_tn(seen.values, unseen.values, forget.values), 2u);
}

TEST(MiaTest, SvmMatchesExhaustiveThresholdOn1d) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    // Separable calibration with a gap; forget values lie inside the class ranges.
    const double lo = rng.uniform(0.0, 0.3), gap = rng.uniform(0.1, 0.4), hi = lo + gap;
    const bool seen_high = rng.index(2) == 0;
    std::vector<double> seen, unseen, forget;
    const std::size_t ns = 2 + rng.index(30), nu = 2 + rng.index(30), nf = 1 + rng.index(20);
    auto high = [&] { return rng.uniform(hi, 1.0); };
    auto low = [&] { return rng.uniform(0.0, lo); };
    for (std::size_t i = 0; i < ns; ++i) seen.push_back(seen_high ? high() : low());
    for (std::size_t i = 0; i < nu; ++i) unseen.push_back(seen_high ? low() : high());
    for (std::size_t i = 0; i < nf; ++i) forget.push_back(rng.index(2) ? high() : low());
    LinearSvm svm;
    const MIAResult r = mia_from_features(column(seen), column(unseen), column(forget), MiaFeature::confidence, svm);
    EXPECT_EQ(r.tn, locun::testing::threshold_oracle_tn(seen, unseen, forget)) << "trial " << trial;
    EXPECT_TRUE(svm.converged());
  }
}

TEST(MiaTest, IdenticalDistributionsWarn) {
  std::vector<double> v;
  for (int i = 0; i < 40; ++i) v.push_back((i % 4) * 0.25);
  LinearSvm svm;
  const MIAResult r = mia_from_features(column(v), column(v), column({0.5}), MiaFeature::confidence, svm);
  EXPECT_NEAR(r.attacker_train_acc, 0.5, 0.1);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(MiaTest, ConfidenceRefinesCorrectness) {
  // Both sets predict classes 0 and 1 equally often; only confidence differs.
  FeatureMatrix seen_c, unseen_c;
  seen_c.cols = unseen_c.cols = 2;
  std::vector<double> seen_p, unseen_p;
  for (int i = 0; i < 20; ++i) {
    const double one_hot[2] = {i % 2 == 0 ? 1.0 : 0.0, i % 2 == 0 ? 0.0 : 1.0};
    seen_c.values.insert(seen_c.values.end(), one_hot, one_hot + 2);
    unseen_c.values.insert(unseen_c.values.end(), one_hot, one_hot + 2);
    seen_p.push_back(0.9 + 0.004 * i);
    unseen_p.push_back(0.5 + 0.01 * i);
  }
  seen_c.rows = unseen_c.rows = 20;
  FeatureMatrix forget_c;
  forget_c.cols = 2;
  forget_c.rows = 1;
  forget_c.values = {1.0, 0.0};
  LinearSvm a, b;
  const MIAResult corr = mia_from_features(seen_c, unseen_c, forget_c, MiaFeature::correctness, a);
  const MIAResult conf = mia_from_features(column(seen_p), column(unseen_p), column({0.95}), MiaFeature::confidence, b);
  EXPECT_GE(conf.attacker_train_acc, corr.attacker_train_acc);
  EXPECT_EQ(conf.attacker_train_acc, 1.0);
}

TEST(MiaTest, EndToEndScoreIsBounded) {
  Rng rng(3);
  const nn::Model m = locun::testing::random_small_model(rng);
  auto view = [&](std::size_t n) {
    const auto b = locun::testing::random_batch(m, rng, n);
    return make_view(m.input_shape(), m.num_classes(), b.features, b.labels);
  };
  for (MiaFeature k : {MiaFeature::correctness, MiaFeature::confidence}) {
    const MIAResult r = mia_score(m, view(30), view(30), view(12), k);
    EXPECT_LE(r.tn, r.forget_size);
    EXPECT_EQ(r.forget_size, 12u);
    EXPECT_GE(r.score, 0.0);
    EXPECT_LE(r.score, 1.0);
  }
  const FeatureMatrix corr = mia_features(m, view(5), MiaFeature::correctness);
  EXPECT_EQ(corr.cols, m.num_classes());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(std::count(corr.row(i), corr.row(i) + corr.cols, 1.0), 1);
}

TEST(IntervalTest, StudentTForThreeSeeds) {
  const std::vector<double> v{1, 2, 3};
  const Interval i = mean_ci95(v);
  EXPECT_EQ(i.mean, 2.0);
  ASSERT_TRUE(i.half_width.has_value());
  // t(0.975, 2) = 4.302652729911275; sample sd = 1.
  EXPECT_NEAR(*i.half_width, 4.302652729911275 / std::sqrt(3.0), 1e-9);
}

TEST(IntervalTest, SingleAndIdenticalAndLarge) {
  EXPECT_FALSE(mean_ci95(std::vector<double>{4.0}).half_width.has_value());
  const Interval same = mean_ci95(std::vector<double>(5, 0.1));
  EXPECT_EQ(same.mean, 0.1);
  EXPECT_EQ(*same.half_width, 0.0);
  std::vector<double> many;
  for (int k = 0; k < 40; ++k) many.push_back(k % 2 == 0 ? 1.0 : -1.0);
  const double sd = std::sqrt(40.0 / 39.0);
  EXPECT_NEAR(*mean_ci95(many).half_width, 1.959963984540054 * sd / std::sqrt(40.0), 1e-12);
}

MetricsReport report(std::uint64_t seed, double forget, double test, double mia) {
  MetricsReport r;
  r.seed = seed;
  r.forget_acc = forget;
  r.retain_acc = 0.99;
  r.test_acc = test;
  r.mia_correctness.score = mia;
  r.mia_confidence.score = mia / 2;
  return r;
}

TEST(DeltaTest, PercentagePointsAndSign) {
  const DeltaReport d = delta_report({report(1, 0.8, 0.90, 0.3)}, {report(1, 0.6, 0.88, 0.3)});
  EXPECT_NEAR(d.per_seed.at("test")[0], 2.0, 1e-12);
  EXPECT_NEAR(d.per_seed.at("forget")[0], 20.0, 1e-12);
  const DeltaReport over = delta_report({report(1, 0.6, 0.9, 0.3)}, {report(1, 0.4, 0.9, 0.3)});
  EXPECT_GT(over.per_seed.at("forget")[0], 0.0);
  const DeltaReport under = delta_report({report(1, 0.6, 0.9, 0.3)}, {report(1, 0.7, 0.9, 0.3)});
  EXPECT_LT(under.per_seed.at("forget")[0], 0.0);
}

TEST(DeltaTest, SelfComparisonIsExactlyZero) {
  std::vector<MetricsReport> o{report(1, 0.71, 0.83, 0.37), report(2, 0.69, 0.81, 0.41), report(3, 0.7, 0.8, 0.4)};
  const DeltaReport d = delta_report(o, o);
  for (const char* m : kMetrics) {
    for (double v : d.per_seed.at(m)) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(d.summary.at(m).mean, 0.0);
    EXPECT_EQ(*d.summary.at(m).half_width, 0.0);
  }
}

TEST(DeltaTest, PairsBySeedAndRejectsMissing) {
  const DeltaReport d = delta_report({report(2, 0.5, 0.5, 0.5), report(1, 0.5, 0.5, 0.5)},
                                     {report(1, 0.4, 0.5, 0.5), report(2, 0.3, 0.5, 0.5)});
  EXPECT_EQ(d.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_NEAR(d.per_seed.at("forget")[0], 10.0, 1e-12);
  EXPECT_NEAR(d.per_seed.at("forget")[1], 20.0, 1e-12);
  EXPECT_THROW(delta_report({report(1, 0.5, 0.5, 0.5)}, {report(2, 0.5, 0.5, 0.5)}), ValidationError);
}

std::vector<RunRecord> grid() {
  std::vector<RunRecord> out;
  for (const char* s : {"del", "salloc"})
    for (const char* a : {"rft", "finetune"})
      for (double alpha : {0.1, 0.3})
        for (std::uint64_t seed : {1u, 2u, 3u}) {
          RunRecord r{s, a, alpha, seed, {}};
          for (const char* m : kMetrics) r.deltas[m] = static_cast<double>(seed) * alpha + (s[0] == 'd');
          out.push_back(r);
        }
  return out;
}

TEST(AggregateTest, RowCountAndOrderInvariance) {
  const auto records = grid();
  const auto rows = aggregate_runs(records);
  EXPECT_EQ(rows.size(), 2u * 2u * 2u * kMetrics.size());
  std::vector<RunRecord> shuffled = records;
  Rng rng(1);
  rng.shuffle(std::span<RunRecord>(shuffled));
  EXPECT_EQ(summary_csv(aggregate_runs(shuffled)), summary_csv(rows));
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(summary_csv(aggregate_runs(shuffled)), summary_csv(rows));
  EXPECT_EQ(summary_csv(rows).substr(0, 40), "strategy,algorithm,alpha,metric,mean,ci9");
}

TEST(AggregateTest, SingleRunAndIdenticalRuns) {
  RunRecord r{"del", "rft", 0.16, 1, {{"forget", 1.5}}};
  const auto one = aggregate_runs({r});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(summary_csv(one), "strategy,algorithm,alpha,metric,mean,ci95,n\ndel,rft,0.16,forget,1.500000,n/a,1\n");
  RunRecord r2 = r, r3 = r;
  r2.seed = 2;
  r3.seed = 3;
  const auto three = aggregate_runs({r, r2, r3});
  EXPECT_EQ(*three[0].stats.half_width, 0.0);
  EXPECT_THROW(aggregate_runs({r, r}), ValidationError);
}

TEST(ReportTest, JsonRoundTrip) {
  MetricsReport r = report(7, 0.25, 0.75, 0.125);
  r.run_id = "x/y";
  r.mia_correctness.tn = 3;
  r.mia_correctness.forget_size = 24;
  r.mia_confidence.feature_kind = MiaFeature::confidence;
  r.mia_confidence.warnings = {"w"};
  const MetricsReport back = metrics_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
}

}  // namespace
}  // namespace locun::eval
