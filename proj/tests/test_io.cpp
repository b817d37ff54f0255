#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "crtgee/errors.hpp"
#include "crtgee/io.hpp"
#include "oracles.hpp"

using namespace crtgee;
using namespace crtgee::io;

namespace {

std::string trial_csv(const TrialDataset& d) {
  std::ostringstream os;
  write_trial_csv(os, d);
  return os.str();
}

TrialDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_trial_csv(in);
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.line();
  }
  return 9999;
}

TrialDataset sample_trial(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_trial(rng, 10, 8, 20, 0.3, 0.45);
}

const EstimateReport& estimate(const AnalysisReport& r, VarianceKind kind) {
  for (const auto& e : r.estimates) {
    if (e.kind == kind) return e;
  }
  throw std::runtime_error("missing estimate");
}

}  // namespace

TEST(TrialCsv, LineNumberedErrors) {
  EXPECT_EQ(error_line("id,arm,outcome\na,0,1\n"), 1u);
  EXPECT_EQ(error_line("cluster_id,arm,outcome\na,0,1\nb,1\n"), 3u);
  EXPECT_EQ(error_line("cluster_id,arm,outcome\na,0,1\nb,2,0\n"), 3u);
  EXPECT_EQ(error_line("cluster_id,arm,outcome\na,0,1\nb,1,yes\n"), 3u);
  EXPECT_EQ(error_line("cluster_id,arm,outcome\na,0,1\nb,1,0\na,1,1\n"), 4u);
  EXPECT_EQ(error_line(""), 0u);
  EXPECT_EQ(error_line("cluster_id,arm,outcome\n"), 0u);
  EXPECT_THROW(parse("cluster_id,arm,outcome\na,0,1\nb,0,0\n"), UnsupportedDesign);
}

TEST(TrialCsv, ToleratesCrlfAndBlankLines) {
  const auto d = parse("cluster_id,arm,outcome\r\na,0,1\r\n\r\nb,1,0\r\nb,1,1\r\n");
  EXPECT_EQ(d.n_clusters(), 2u);
  EXPECT_EQ(d.n_observations(), 3u);
}

TEST(TrialCsv, RoundTrip) {
  const auto d = sample_trial(1);
  const auto back = parse(trial_csv(d));
  ASSERT_EQ(back.n_clusters(), d.n_clusters());
  EXPECT_EQ(back.n_observations(), d.n_observations());
  EXPECT_EQ(trial_csv(back), trial_csv(d));
}

TEST(TrialCsv, RowOrderDoesNotChangeEstimates) {
  const auto d = sample_trial(2);
  std::istringstream lines(trial_csv(d));
  std::string header, line;
  std::getline(lines, header);
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  std::mt19937_64 rng(3);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::string shuffled = header + "\n";
  for (const auto& r : rows) shuffled += r + "\n";

  for (const auto& spec : all_models()) {
    const auto a = analyze(parse(trial_csv(d)), spec);
    const auto b = analyze(parse(shuffled), spec);
    ASSERT_EQ(a.converged, b.converged);
    if (!a.converged) continue;
    EXPECT_NEAR(a.beta[1], b.beta[1], 1e-12);
    EXPECT_NEAR(a.icc, b.icc, 1e-12);
    for (std::size_t k = 0; k < a.estimates.size(); ++k) {
      EXPECT_NEAR(a.estimates[k].se, b.estimates[k].se, 1e-12);
    }
  }
}

TEST(Analyze, ReportContents) {
  const auto d = sample_trial(4);
  AnalyzeOptions opts;
  opts.kinds = {VarianceKind::KC, VarianceKind::MD, VarianceKind::AVG};
  const auto r = analyze(d, ModelSpec(Family::Poisson, Link::Log), opts);
  ASSERT_TRUE(r.converged);
  EXPECT_EQ(r.model, "poisson-log");
  EXPECT_EQ(r.effect_measure, "RR");
  EXPECT_EQ(r.control.clusters, 5u);
  EXPECT_EQ(r.control.events, d.arm_summary(Arm::Control).events);
  EXPECT_EQ(r.n_observations, d.n_observations());
  EXPECT_NEAR(r.estimate_effect, std::exp(r.beta[1]), 1e-15);
  ASSERT_EQ(r.estimates.size(), 3u);
  const double kc = estimate(r, VarianceKind::KC).variance;
  const double md = estimate(r, VarianceKind::MD).variance;
  EXPECT_NEAR(estimate(r, VarianceKind::AVG).variance, (kc + md) / 2, 1e-15);
  for (const auto& e : r.estimates) {
    EXPECT_EQ(e.df, 8.0);
    EXPECT_NEAR(e.se * e.se, e.variance, 1e-15);
  }
}

TEST(Analyze, IdenticalArmsGiveNullEffect) {
  using oracle::make_cluster;
  TrialDataset d({make_cluster("a", Arm::Control, {1, 0, 1}), make_cluster("b", Arm::Control, {0, 0, 1}),
                  make_cluster("c", Arm::Intervention, {1, 0, 1}), make_cluster("d", Arm::Intervention, {0, 0, 1})});
  const auto r = analyze(d, ModelSpec(Family::Binomial, Link::Identity));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.beta[1], 0.0, 1e-12);
  EXPECT_NEAR(estimate(r, VarianceKind::Robust).p_value, 1.0, 1e-10);
}

TEST(Analyze, NonConvergenceIsReported) {
  using oracle::make_cluster;
  TrialDataset d({make_cluster("a", Arm::Control, {1, 0, 1}), make_cluster("b", Arm::Control, {0, 0, 1}),
                  make_cluster("c", Arm::Intervention, {0, 0, 0}), make_cluster("d", Arm::Intervention, {0, 0, 0})});
  const auto r = analyze(d, ModelSpec(Family::Binomial, Link::Log));
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_TRUE(r.estimates.empty());
  EXPECT_EQ(r.control.events, 3u);
}

TEST(Report, SerializationRoundTripIsExact) {
  const auto r = analyze(sample_trial(5), ModelSpec(Family::Binomial, Link::Logit));
  const auto text = serialize_report(r);
  const auto back = parse_report(text);
  EXPECT_EQ(back.model, r.model);
  EXPECT_EQ(back.beta, r.beta);
  EXPECT_EQ(back.icc, r.icc);
  EXPECT_EQ(back.phi, r.phi);
  ASSERT_EQ(back.estimates.size(), r.estimates.size());
  for (std::size_t k = 0; k < r.estimates.size(); ++k) {
    EXPECT_EQ(back.estimates[k].kind, r.estimates[k].kind);
    EXPECT_EQ(back.estimates[k].se, r.estimates[k].se);
    EXPECT_EQ(back.estimates[k].p_value, r.estimates[k].p_value);
    EXPECT_EQ(back.estimates[k].ci_effect, r.estimates[k].ci_effect);
  }
  EXPECT_EQ(serialize_report(back), text);
}

TEST(GridConfig, ParsesAndValidates) {
  const auto cfg = parse_grid_config(R"({"n_clusters":[10,20],"cluster_sizes":[30],"cvs":[0,0.5],
      "pi0":[0.3],"icc":[0.05],"models":["poisson-log"],"replicates":10,"seed":7,"output":"out.csv","threads":3})");
  EXPECT_EQ(cfg.grid.n_scenarios(), 4u);
  EXPECT_EQ(cfg.grid.replicates, 10u);
  EXPECT_EQ(cfg.grid.seed, 7u);
  ASSERT_EQ(cfg.grid.models.size(), 1u);
  EXPECT_EQ(cfg.output, "out.csv");
  EXPECT_EQ(cfg.threads, 3u);

  auto key_of = [](const std::string& text) {
    try {
      parse_grid_config(text);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("none");
  };
  const std::string base = R"("cluster_sizes":[30],"pi0":[0.3],"icc":[0.05],"output":"o.csv")";
  EXPECT_EQ(key_of("{" + base + "}"), "n_clusters");
  EXPECT_EQ(key_of(R"({"n_clusters":[10],"colour":1,)" + base + "}"), "colour");
  EXPECT_EQ(key_of(R"({"n_clusters":[9],)" + base + "}"), "n_clusters");
  EXPECT_EQ(key_of(R"({"n_clusters":[10],"models":["poisson-logit"],)" + base + "}"), "models");
  EXPECT_EQ(key_of(R"({"n_clusters":[10],"replicates":0,)" + base + "}"), "replicates");
  EXPECT_EQ(key_of(R"({"n_clusters":[10],"cluster_sizes":[30],"pi0":[1.2],"icc":[0.05],"output":"o.csv"})"), "pi0");
  EXPECT_EQ(key_of("{not json"), "<document>");
  EXPECT_EQ(key_of(R"({"n_clusters":[10],)" + base + "}"), "none");
}

namespace {

std::vector<ResultRow> simulated_rows() {
  FactorialGrid g;
  g.n_clusters = {10};
  g.cluster_sizes = {10};
  g.pi0 = {0.3};
  g.icc = {0.05, 0.1};
  g.replicates = 20;
  g.models = {ModelSpec(Family::Poisson, Link::Log), ModelSpec(Family::Gaussian, Link::Identity)};
  std::vector<ResultRow> rows;
  for (const auto& res : run_grid(g, 2, {}, {})) {
    for (auto& r : to_rows(res)) rows.push_back(r);
  }
  return rows;
}

std::string results_text(const std::vector<ResultRow>& rows) {
  std::string s = results_header() + "\n";
  for (const auto& r : rows) s += format_row(r) + "\n";
  return s;
}

}  // namespace

TEST(Results, RoundTripAndCompleteness) {
  const auto rows = simulated_rows();
  ASSERT_EQ(rows.size(), 2u * 2u * 7u);
  EXPECT_EQ(results_columns().size(), 17u);
  const auto text = results_text(rows);
  std::istringstream in(text);
  const auto back = read_results(in);
  EXPECT_EQ(results_text(back), text);
  EXPECT_EQ(completed_scenarios(back, 14), (std::set<std::size_t>{1, 2}));
  std::vector<ResultRow> partial(back.begin(), back.begin() + 20);
  EXPECT_EQ(completed_scenarios(partial, 14), (std::set<std::size_t>{1}));
  for (const auto& r : back) EXPECT_EQ(r.acceptable, type1_acceptable(r.type1));
}

TEST(Results, SchemaErrors) {
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_results(in);
    } catch (const InputError& e) {
      return e.line();
    }
    return std::size_t{9999};
  };
  const auto rows = simulated_rows();
  const std::string header = results_header() + "\n";
  EXPECT_EQ(bad("scenario_id,n\n"), 1u);
  EXPECT_EQ(bad(header + "1,2,3\n"), 2u);
  auto row = format_row(rows[0]);
  row.replace(row.find("poisson"), 7, "weibull");
  EXPECT_EQ(bad(header + row + "\n"), 2u);
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "NA");
  EXPECT_TRUE(std::isnan(parse_number("NA")));
  EXPECT_EQ(parse_number(format_number(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Pivot, EstimatorGroupingOverOneScenarioIsPassthrough) {
  auto rows = simulated_rows();
  rows.resize(7);  // scenario 1, poisson-log
  std::istringstream table(pivot_results(rows, {"estimator"}));
  std::string line;
  std::getline(table, line);
  EXPECT_EQ(line, "estimator,family,link,n_rows,n_rep,n_conv,conv_rate,esd,mean_se,pct_bias,type1,acceptable_share");
  std::size_t k = 0;
  while (std::getline(table, line)) {
    ASSERT_LT(k, rows.size());
    const auto& r = rows[k++];
    EXPECT_EQ(line, r.estimator + "," + r.family + "," + r.link + ",1," + std::to_string(r.n_rep) + "," +
                        std::to_string(r.n_conv) + "," + format_number(r.conv_rate) + "," + format_number(r.esd) +
                        "," + format_number(r.mean_se) + "," + format_number(r.pct_bias) + "," +
                        format_number(r.type1) + "," + (r.acceptable ? "1" : "0"));
  }
  EXPECT_EQ(k, 7u);
}

TEST(Pivot, FigureLayoutAndConsistencyCheck) {
  auto rows = simulated_rows();
  const auto table = pivot_results(rows, {"icc", "n_clusters"});
  EXPECT_EQ(table.substr(0, table.find('\n')),
            "icc,n_clusters,family,link,estimator,n_rows,n_rep,n_conv,conv_rate,esd,mean_se,pct_bias,type1,"
            "acceptable_share");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1 + 2 * 2 * 7);
  EXPECT_THROW(pivot_results(rows, {"colour"}), InputError);
  rows[3].acceptable = !rows[3].acceptable;
  EXPECT_THROW(pivot_results(rows, {"estimator"}), InputError);
}
