#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crtgee/harness.hpp"
#include "crtgee/inference.hpp"
#include "crtgee/model.hpp"
#include "crtgee/sandwich.hpp"
#include "crtgee/trial.hpp"

namespace crtgee::io {

/// Malformed input. `line` is 1-based, 0 when not tied to a line.
class InputError : public std::runtime_error {
 public:
  InputError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid grid configuration; `key` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// ---------------------------------------------------------------------------
// Trial CSV: header `cluster_id,arm,outcome`, one row per individual.
// Clusters are ordered by id so row order never affects the fit.

TrialDataset parse_trial_csv(std::istream& in);
TrialDataset read_trial_csv(const std::string& path);
void write_trial_csv(std::ostream& out, const TrialDataset& data);

// ---------------------------------------------------------------------------
// Analysis report

struct ArmReport {
  std::size_t clusters = 0;
  std::size_t observations = 0;
  std::size_t events = 0;
  double proportion = 0.0;
};

struct EstimateReport {
  VarianceKind kind = VarianceKind::Robust;
  double se = 0.0;
  double variance = 0.0;
  double t_stat = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  std::pair<double, double> ci_link{};
  std::pair<double, double> ci_effect{};
  double q_max = 0.0;
  std::string error;  // non-empty when the estimator could not be computed
};

struct AnalysisReport {
  std::string model;
  std::string effect_measure;
  std::string reference = "t";  // "t" or "z"
  double level = 0.95;
  ArmReport control;
  ArmReport intervention;
  std::size_t n_clusters = 0;
  std::size_t n_observations = 0;
  bool converged = false;
  int iterations = 0;
  std::string failure;
  double icc = 0.0;
  double phi = 0.0;
  bool icc_clamped = false;
  std::vector<double> beta;
  double estimate_effect = 0.0;
  std::vector<EstimateReport> estimates;
};

struct AnalyzeOptions {
  std::vector<VarianceKind> kinds{kAllVarianceKinds.begin(), kAllVarianceKinds.end()};
  double level = 0.95;
  double fg_bound = 0.75;
  bool z_reference = false;
  FitOptions fit;
};

/// Fits the model and evaluates every requested estimator. Non-convergence
/// is reported in the returned document rather than thrown.
AnalysisReport analyze(const TrialDataset& data, const ModelSpec& spec, const AnalyzeOptions& opts = {});

/// JSON text; doubles keep full round-trip precision.
std::string serialize_report(const AnalysisReport& report);
AnalysisReport parse_report(const std::string& text);

// ---------------------------------------------------------------------------
// Grid configuration (JSON). Unknown keys are rejected.

struct GridConfig {
  FactorialGrid grid;
  std::string output;
  std::optional<unsigned> threads;
};

GridConfig parse_grid_config(const std::string& text);
GridConfig read_grid_config(const std::string& path);

// ---------------------------------------------------------------------------
// Long-format results: one row per (scenario, model, estimator).

struct ResultRow {
  std::size_t scenario_id = 0;
  std::size_t n_clusters = 0;
  double cluster_size = 0.0;
  double cv = 0.0;
  double pi0 = 0.0;
  double icc = 0.0;
  std::string family;
  std::string link;
  std::string estimator;
  std::size_t n_rep = 0;
  std::size_t n_conv = 0;
  double conv_rate = 0.0;
  double esd = 0.0;
  double mean_se = 0.0;
  double pct_bias = 0.0;
  double type1 = 0.0;
  bool acceptable = false;
};

const std::vector<std::string>& results_columns();
std::string results_header();
std::vector<ResultRow> to_rows(const ScenarioResult& result);
std::string format_row(const ResultRow& row);

/// Parses a results file, validating the header and every field.
std::vector<ResultRow> read_results(std::istream& in);

/// Scenario ids with exactly `rows_per_scenario` rows present.
std::set<std::size_t> completed_scenarios(const std::vector<ResultRow>& rows, std::size_t rows_per_scenario);

/// Numbers as written to results and report files: 17 significant digits,
/// "NA" for NaN.
std::string format_number(double value);
double parse_number(const std::string& text);

// ---------------------------------------------------------------------------
// Pivoted summaries

/// Columns that may appear in --by.
const std::vector<std::string>& groupable_columns();

/// Groups rows by `by` (family, link and estimator are always kept as keys)
/// and averages the metrics. Rows whose `acceptable` flag disagrees with
/// their type1 value are rejected with InputError.
std::string pivot_results(const std::vector<ResultRow>& rows, const std::vector<std::string>& by);

}  // namespace crtgee::io
