#include "crtgee/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "crtgee/errors.hpp"
#include "crtgee/inference.hpp"

namespace crtgee {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::size_t index_of(VarianceKind kind) { return static_cast<std::size_t>(kind); }

void record_estimate(ModelOutcome& out, const GeeFit& fit, const VarianceEstimate& v, double alpha_level) {
  auto& slot = out.estimators[index_of(v.kind)];
  slot.se = v.se(1);
  try {
    slot.p_value = wald_inference(fit, v, effect_measure_for(fit.spec.link()), alpha_level).p_value;
  } catch (const DegenerateVariance&) {
    slot.p_value = kNaN;
  }
}

}  // namespace

bool type1_acceptable(double type1) { return type1 >= kTypeIErrorLower && type1 <= kTypeIErrorUpper; }

ModelOutcome analyze_dataset(const TrialDataset& data, const ModelSpec& spec, const AnalysisSettings& settings) {
  ModelOutcome out;
  for (auto& e : out.estimators) e = {kNaN, kNaN};
  GeeFit fit;
  try {
    fit = fit_gee(data, spec, WorkingCorrelation::exchangeable(), settings.fit);
  } catch (const NonConvergence&) {
    out.beta1 = kNaN;
    return out;
  }
  out.converged = true;
  out.beta1 = fit.beta(1);
  out.alpha_clamped = fit.alpha_clamped;
  out.q_max = CorrectionContext(fit, settings.fg_bound).q_max();

  record_estimate(out, fit, model_based(fit), settings.alpha_level);

  std::optional<VarianceEstimate> kc;
  std::optional<VarianceEstimate> md;
  for (auto kind : {VarianceKind::Robust, VarianceKind::KC, VarianceKind::MD, VarianceKind::FG}) {
    try {
      const std::array<VarianceKind, 1> one = {kind};
      auto v = std::move(robust_sandwich(fit, one, settings.fg_bound).front());
      record_estimate(out, fit, v, settings.alpha_level);
      if (kind == VarianceKind::KC) kc = std::move(v);
      if (kind == VarianceKind::MD) md = std::move(v);
    } catch (const CorrectionSingularity&) {
      ++out.correction_singularities;
    }
  }
  try {
    record_estimate(out, fit, mbn(fit), settings.alpha_level);
  } catch (const UnsupportedDesign&) {
  }
  if (kc && md) record_estimate(out, fit, avg(*kc, *md), settings.alpha_level);
  return out;
}

ReplicateRecord run_replicate(const Scenario& scenario, std::size_t replicate, std::span<const ModelSpec> specs,
                              const AnalysisSettings& settings) {
  const TrialDataset data = generate_trial(scenario, replicate);
  ReplicateRecord rec;
  rec.replicate = replicate;
  rec.models.reserve(specs.size());
  for (const auto& spec : specs) rec.models.push_back(analyze_dataset(data, spec, settings));
  return rec;
}

const EstimatorSummary& ScenarioResult::estimator(VarianceKind kind) const { return estimators[index_of(kind)]; }

ScenarioResult aggregate(const Scenario& scenario, const ModelSpec& spec, std::span<const ReplicateRecord> records,
                         std::size_t model_index, double alpha_level) {
  ScenarioResult res;
  res.scenario = scenario;
  res.spec = spec;
  res.n_replicates = records.size();

  double sum_beta = 0.0;
  for (const auto& r : records) {
    const auto& m = r.models.at(model_index);
    if (!m.converged) continue;
    ++res.n_converged;
    sum_beta += m.beta1;
    res.diagnostics.alpha_clamps += m.alpha_clamped ? 1 : 0;
    res.diagnostics.correction_singularities += static_cast<std::size_t>(m.correction_singularities);
  }
  res.convergence_rate =
      res.n_replicates == 0 ? kNaN : static_cast<double>(res.n_converged) / static_cast<double>(res.n_replicates);

  res.esd = kNaN;
  if (res.n_converged >= 2) {
    const double mean = sum_beta / static_cast<double>(res.n_converged);
    double ss = 0.0;
    for (const auto& r : records) {
      const auto& m = r.models[model_index];
      if (m.converged) ss += (m.beta1 - mean) * (m.beta1 - mean);
    }
    res.esd = std::sqrt(ss / static_cast<double>(res.n_converged - 1));
  }

  for (auto kind : kAllVarianceKinds) {
    auto& s = res.estimators[index_of(kind)];
    s.kind = kind;
    double sum_se = 0.0;
    double sum_rel = 0.0;
    for (const auto& r : records) {
      const auto& m = r.models[model_index];
      if (!m.converged) continue;
      const auto& e = m.estimators[index_of(kind)];
      if (std::isfinite(e.se)) {
        ++s.n_se;
        sum_se += e.se;
        sum_rel += (e.se - res.esd) / res.esd;
      }
      if (std::isfinite(e.p_value) && e.p_value < alpha_level) ++s.rejections;
    }
    s.mean_se = s.n_se == 0 ? kNaN : sum_se / static_cast<double>(s.n_se);
    s.percent_bias = (s.n_se == 0 || !(res.esd > 0.0)) ? kNaN : 100.0 * sum_rel / static_cast<double>(s.n_se);
    s.type1_error =
        res.n_converged == 0 ? kNaN : static_cast<double>(s.rejections) / static_cast<double>(res.n_converged);
    s.acceptable = type1_acceptable(s.type1_error);
  }

  const double t_robust = res.estimator(VarianceKind::Robust).type1_error;
  const double t_kc = res.estimator(VarianceKind::KC).type1_error;
  const double t_md = res.estimator(VarianceKind::MD).type1_error;
  if (res.n_converged > 0 && !(t_robust >= t_kc && t_kc >= t_md)) res.diagnostics.ordering_violations = 1;
  return res;
}

std::vector<Scenario> FactorialGrid::expand() const {
  std::vector<Scenario> out;
  out.reserve(n_scenarios());
  std::size_t id = 0;
  for (auto n : n_clusters) {
    for (auto m : cluster_sizes) {
      for (auto cv : cvs) {
        for (auto p0 : pi0) {
          for (auto rho : icc) {
            Scenario s;
            s.id = ++id;
            s.n_clusters = n;
            s.cluster_size = cv > 0.0 ? ClusterSizeSpec::gamma(m, cv) : ClusterSizeSpec{m, 0.0};
            s.pi0 = p0;
            s.pi1 = p0;
            s.icc = rho;
            s.replicates = replicates;
            s.seed = seed;
            out.push_back(s);
          }
        }
      }
    }
  }
  return out;
}

std::size_t FactorialGrid::n_scenarios() const {
  return n_clusters.size() * cluster_sizes.size() * cvs.size() * pi0.size() * icc.size();
}

std::vector<ScenarioResult> run_scenario(const Scenario& scenario, std::span<const ModelSpec> specs,
                                         const AnalysisSettings& settings, unsigned threads) {
  scenario.validate();
  const std::size_t reps = scenario.replicates;
  std::vector<ReplicateRecord> records(reps);
  const unsigned workers = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, reps));

  if (workers == 1) {
    for (std::size_t r = 0; r < reps; ++r) records[r] = run_replicate(scenario, r, specs, settings);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
      for (std::size_t r = next++; r < reps; r = next++) {
        try {
          records[r] = run_replicate(scenario, r, specs, settings);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<ScenarioResult> out;
  out.reserve(specs.size());
  for (std::size_t k = 0; k < specs.size(); ++k) {
    out.push_back(aggregate(scenario, specs[k], records, k, settings.alpha_level));
  }
  return out;
}

std::vector<ScenarioResult> run_grid(const FactorialGrid& grid, unsigned threads, const std::set<std::size_t>& skip,
                                     const ScenarioCallback& on_scenario) {
  std::vector<ModelSpec> specs = grid.models;
  if (specs.empty()) specs.assign(all_models().begin(), all_models().end());
  std::vector<ScenarioResult> all;
  for (const auto& scenario : grid.expand()) {
    if (skip.contains(scenario.id)) continue;
    auto results = run_scenario(scenario, specs, grid.settings, threads);
    if (on_scenario) on_scenario(results);
    all.insert(all.end(), results.begin(), results.end());
  }
  return all;
}

}  // namespace crtgee
