#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <vector>

#include "crtgee/datagen.hpp"
#include "crtgee/gee.hpp"
#include "crtgee/model.hpp"
#include "crtgee/sandwich.hpp"

namespace crtgee {

/// Binomial tolerance around 5% for 1000 replicates.
inline constexpr double kTypeIErrorLower = 0.036;
inline constexpr double kTypeIErrorUpper = 0.064;

bool type1_acceptable(double type1);

struct EstimatorOutcome {
  double se = 0.0;  // NaN when the estimator was unavailable for this fit
  double p_value = 0.0;
};

struct ModelOutcome {
  bool converged = false;
  double beta1 = 0.0;
  bool alpha_clamped = false;
  double q_max = 0.0;
  int correction_singularities = 0;
  std::array<EstimatorOutcome, kAllVarianceKinds.size()> estimators{};
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  std::vector<ModelOutcome> models;  // parallel to the specs passed in
};

struct AnalysisSettings {
  FitOptions fit;
  double fg_bound = 0.75;
  double alpha_level = 0.05;
};

/// One dataset, analysed by every model. Failures are recorded, not thrown.
ReplicateRecord run_replicate(const Scenario& scenario, std::size_t replicate, std::span<const ModelSpec> specs,
                              const AnalysisSettings& settings = {});

/// Analyses an already generated dataset; run_replicate is this plus generate_trial.
ModelOutcome analyze_dataset(const TrialDataset& data, const ModelSpec& spec, const AnalysisSettings& settings);

struct EstimatorSummary {
  VarianceKind kind = VarianceKind::Robust;
  std::size_t n_se = 0;  // converged replicates with a usable SE
  double mean_se = 0.0;
  double percent_bias = 0.0;
  std::size_t rejections = 0;
  double type1_error = 0.0;
  bool acceptable = false;
};

struct ScenarioDiagnostics {
  std::size_t alpha_clamps = 0;
  std::size_t correction_singularities = 0;
  std::size_t ordering_violations = 0;  // type1(Robust) >= type1(KC) >= type1(MD) failed
};

struct ScenarioResult {
  Scenario scenario;
  ModelSpec spec{Family::Poisson, Link::Log};
  std::size_t n_replicates = 0;
  std::size_t n_converged = 0;
  double convergence_rate = 0.0;
  double esd = 0.0;  // NaN when fewer than two converged replicates
  std::array<EstimatorSummary, kAllVarianceKinds.size()> estimators{};
  ScenarioDiagnostics diagnostics;

  const EstimatorSummary& estimator(VarianceKind kind) const;
};

/// Folds the records of one scenario into per-model summaries.
/// `model_index` selects which entry of ReplicateRecord::models to use.
ScenarioResult aggregate(const Scenario& scenario, const ModelSpec& spec, std::span<const ReplicateRecord> records,
                         std::size_t model_index, double alpha_level = 0.05);

struct FactorialGrid {
  std::vector<std::size_t> n_clusters{10, 20, 30, 40, 50};
  std::vector<double> cluster_sizes{10, 30, 50, 100};
  std::vector<double> cvs{0.0};
  std::vector<double> pi0{0.02, 0.05, 0.1, 0.3, 0.5};
  std::vector<double> icc{0.01, 0.05, 0.1};
  std::vector<ModelSpec> models;
  std::size_t replicates = 1000;
  std::uint64_t seed = 20240101;
  AnalysisSettings settings;

  /// Scenarios in expansion order N, size, cv, pi0, icc; ids 1-based.
  std::vector<Scenario> expand() const;
  std::size_t n_scenarios() const;
};

using ScenarioCallback = std::function<void(const std::vector<ScenarioResult>&)>;

/// Runs every scenario not listed in `skip` in id order. Replicates of a
/// scenario are spread over `threads` workers; each scenario's results are
/// handed to `on_scenario` as soon as it finishes. Output does not depend
/// on `threads`.
std::vector<ScenarioResult> run_grid(const FactorialGrid& grid, unsigned threads,
                                     const std::set<std::size_t>& skip = {},
                                     const ScenarioCallback& on_scenario = {});

/// Runs a single scenario for every model in `specs`.
std::vector<ScenarioResult> run_scenario(const Scenario& scenario, std::span<const ModelSpec> specs,
                                         const AnalysisSettings& settings, unsigned threads);

}  // namespace crtgee
