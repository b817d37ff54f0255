#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "crtgee/harness.hpp"

using namespace crtgee;

namespace {

constexpr auto kIdx = [](VarianceKind k) { return static_cast<std::size_t>(k); };

ReplicateRecord fixture_record(std::size_t r, bool converged, double beta1, double se_mb, double p_robust) {
  const double esd = std::sqrt(0.0325);
  ModelOutcome m;
  m.converged = converged;
  m.beta1 = beta1;
  for (auto& e : m.estimators) e = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  m.estimators[kIdx(VarianceKind::MB)] = {se_mb, 0.5};
  m.estimators[kIdx(VarianceKind::Robust)] = {esd, p_robust};
  m.estimators[kIdx(VarianceKind::KC)] = {1.1 * esd, 0.5};
  ReplicateRecord rec;
  rec.replicate = r;
  rec.models.push_back(m);
  return rec;
}

Scenario small_scenario(std::size_t id, std::size_t reps) {
  Scenario s;
  s.id = id;
  s.n_clusters = 10;
  s.cluster_size = ClusterSizeSpec::fixed(20);
  s.pi0 = s.pi1 = 0.3;
  s.icc = 0.05;
  s.replicates = reps;
  s.seed = 555;
  return s;
}

}  // namespace

TEST(Aggregate, HandComputedFixture) {
  std::vector<ReplicateRecord> recs = {
      fixture_record(0, true, 0.10, 0.1, 0.01),  fixture_record(1, true, -0.20, 0.2, 0.20),
      fixture_record(2, true, 0.30, 0.3, 0.04),  fixture_record(3, true, 0.00, 0.2, 0.50),
      fixture_record(4, true, 0.05, 0.2, 0.90),  fixture_record(5, false, 9.0, 9.0, 0.0001),
  };
  const auto res = aggregate(small_scenario(1, 6), ModelSpec(Family::Poisson, Link::Log), recs, 0, 0.05);
  // mean 0.05; squared deviations .0025 .0625 .0625 .0025 0 sum to .13; .13 / 4 = .0325
  const double esd = std::sqrt(0.0325);
  EXPECT_EQ(res.n_replicates, 6u);
  EXPECT_EQ(res.n_converged, 5u);
  EXPECT_NEAR(res.convergence_rate, 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(res.esd, esd, 1e-15);

  const auto& robust = res.estimator(VarianceKind::Robust);
  EXPECT_NEAR(robust.percent_bias, 0.0, 1e-12);
  EXPECT_EQ(robust.rejections, 2u);
  EXPECT_NEAR(robust.type1_error, 0.4, 1e-15);
  EXPECT_FALSE(robust.acceptable);

  EXPECT_NEAR(res.estimator(VarianceKind::KC).percent_bias, 10.0, 1e-12);
  const auto& mb = res.estimator(VarianceKind::MB);
  EXPECT_NEAR(mb.mean_se, 0.2, 1e-15);
  EXPECT_NEAR(mb.percent_bias, (0.2 - esd) / esd * 100.0, 1e-12);
  EXPECT_EQ(mb.rejections, 0u);

  const auto& md = res.estimator(VarianceKind::MD);
  EXPECT_EQ(md.n_se, 0u);
  EXPECT_TRUE(std::isnan(md.mean_se));
  EXPECT_EQ(md.type1_error, 0.0);
}

TEST(Aggregate, TooFewConvergedLeavesMetricsMissing) {
  std::vector<ReplicateRecord> recs = {fixture_record(0, true, 0.1, 0.1, 0.01), fixture_record(1, false, 0, 0, 0)};
  const auto res = aggregate(small_scenario(1, 2), ModelSpec(Family::Poisson, Link::Log), recs, 0, 0.05);
  EXPECT_EQ(res.n_converged, 1u);
  EXPECT_TRUE(std::isnan(res.esd));
  EXPECT_TRUE(std::isnan(res.estimator(VarianceKind::Robust).percent_bias));
  EXPECT_EQ(res.estimator(VarianceKind::Robust).type1_error, 1.0);
}

TEST(TypeIBand, Edges) {
  EXPECT_TRUE(type1_acceptable(0.036));
  EXPECT_TRUE(type1_acceptable(0.064));
  EXPECT_TRUE(type1_acceptable(0.05));
  EXPECT_FALSE(type1_acceptable(0.0359));
  EXPECT_FALSE(type1_acceptable(0.0641));
  EXPECT_FALSE(type1_acceptable(std::numeric_limits<double>::quiet_NaN()));
}

TEST(RunReplicate, RecordsEveryModelDeterministically) {
  const auto s = small_scenario(3, 10);
  const auto& models = all_models();
  const auto a = run_replicate(s, 4, models, {});
  const auto b = run_replicate(s, 4, models, {});
  ASSERT_EQ(a.models.size(), 6u);
  EXPECT_TRUE(a.models[5].converged);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(a.models[k].converged, b.models[k].converged);
    if (!a.models[k].converged) continue;
    EXPECT_EQ(a.models[k].beta1, b.models[k].beta1);
    for (std::size_t e = 0; e < kAllVarianceKinds.size(); ++e) {
      EXPECT_EQ(a.models[k].estimators[e].se, b.models[k].estimators[e].se);
      EXPECT_TRUE(std::isfinite(a.models[k].estimators[e].se));
    }
  }
}

TEST(RunReplicate, ZeroEventArmIsRecordedNotThrown) {
  Scenario s = small_scenario(4, 1);
  s.pi0 = s.pi1 = 0.005;
  s.cluster_size = ClusterSizeSpec::fixed(5);
  s.icc = 0.0;
  const ModelSpec bl(Family::Binomial, Link::Log);
  bool saw_failure = false;
  for (std::size_t r = 0; r < 50 && !saw_failure; ++r) {
    const auto d = generate_trial(s, r);
    if (d.arm_summary(Arm::Intervention).events != 0) continue;
    const auto rec = run_replicate(s, r, std::span<const ModelSpec>(&bl, 1), {});
    EXPECT_FALSE(rec.models[0].converged);
    saw_failure = true;
  }
  EXPECT_TRUE(saw_failure);
}

TEST(RunScenario, IndependentOfThreadCount) {
  const auto s = small_scenario(5, 60);
  const auto& models = all_models();
  const auto one = run_scenario(s, models, {}, 1);
  const auto many = run_scenario(s, models, {}, 7);
  ASSERT_EQ(one.size(), many.size());
  for (std::size_t k = 0; k < one.size(); ++k) {
    EXPECT_EQ(one[k].n_converged, many[k].n_converged);
    EXPECT_EQ(one[k].esd, many[k].esd);
    for (std::size_t e = 0; e < kAllVarianceKinds.size(); ++e) {
      EXPECT_EQ(one[k].estimators[e].rejections, many[k].estimators[e].rejections);
      const double a = one[k].estimators[e].mean_se, b = many[k].estimators[e].mean_se;
      EXPECT_TRUE(a == b || (std::isnan(a) && std::isnan(b)));
    }
  }
}

TEST(FactorialGrid, DefaultExpandsToFullFactorial) {
  FactorialGrid g;
  const auto scenarios = g.expand();
  ASSERT_EQ(scenarios.size(), 300u);
  EXPECT_EQ(g.n_scenarios(), 300u);
  EXPECT_EQ(scenarios.front().id, 1u);
  EXPECT_EQ(scenarios.back().id, 300u);
  EXPECT_EQ(scenarios[1].icc, 0.05);
  EXPECT_EQ(scenarios[3].pi0, 0.05);
  EXPECT_EQ(scenarios.back().n_clusters, 50u);
  EXPECT_EQ(scenarios.back().cluster_size.mean, 100.0);
}

TEST(RunGrid, SingleReplicatePassthroughAndSkip) {
  FactorialGrid g;
  g.n_clusters = {10};
  g.cluster_sizes = {20};
  g.pi0 = {0.3, 0.5};
  g.icc = {0.05};
  g.replicates = 1;
  g.models = {ModelSpec(Family::Gaussian, Link::Identity)};
  std::vector<std::size_t> seen;
  const auto all = run_grid(g, 2, {}, [&](const std::vector<ScenarioResult>& r) { seen.push_back(r.front().scenario.id); });
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(all[0].n_replicates, 1u);
  EXPECT_EQ(all[0].n_converged, 1u);
  EXPECT_TRUE(std::isnan(all[0].esd));

  seen.clear();
  const auto rest = run_grid(g, 2, {1}, [&](const std::vector<ScenarioResult>& r) { seen.push_back(r.front().scenario.id); });
  ASSERT_EQ(rest.size(), 1u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{2}));
}
