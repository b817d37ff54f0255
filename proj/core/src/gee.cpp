#include "crtgee/gee.hpp"

#include <algorithm>
#include <cmath>

#include "crtgee/errors.hpp"

namespace crtgee {

namespace {

constexpr double kAlphaMargin = 1e-6;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct Workspace {
  std::vector<Eigen::MatrixXd> designs;
  std::vector<Eigen::VectorXd> outcomes;
};

Workspace make_workspace(const TrialDataset& data, MeanModel mean_model) {
  Workspace ws;
  ws.designs.reserve(data.n_clusters());
  ws.outcomes.reserve(data.n_clusters());
  for (const auto& c : data.clusters()) {
    ws.designs.push_back(design_matrix(c, mean_model));
    Eigen::VectorXd y(static_cast<Eigen::Index>(c.size()));
    for (std::size_t j = 0; j < c.size(); ++j) y(static_cast<Eigen::Index>(j)) = c.outcomes[j];
    ws.outcomes.push_back(std::move(y));
  }
  return ws;
}

// Returns false when any fitted mean leaves the family's range.
bool compute_means(const Workspace& ws, const ModelSpec& spec, const Eigen::VectorXd& beta,
                   std::vector<Eigen::VectorXd>& means) {
  means.resize(ws.designs.size());
  for (std::size_t i = 0; i < ws.designs.size(); ++i) {
    const Eigen::VectorXd eta = ws.designs[i] * beta;
    Eigen::VectorXd mu(eta.size());
    for (Eigen::Index j = 0; j < eta.size(); ++j) {
      mu(j) = link_inverse(spec.link(), eta(j));
      if (!mean_in_range(spec.family(), mu(j))) return false;
    }
    means[i] = std::move(mu);
  }
  return true;
}

struct Assembly {
  std::vector<ClusterTerms> terms;
  Eigen::MatrixXd bread;
  Eigen::VectorXd score;
};

Assembly assemble(const Workspace& ws, const ModelSpec& spec, const Eigen::VectorXd& beta,
                  const std::vector<Eigen::VectorXd>& means, double alpha) {
  const auto p = beta.size();
  Assembly out;
  out.bread = Eigen::MatrixXd::Zero(p, p);
  out.score = Eigen::VectorXd::Zero(p);
  out.terms.reserve(ws.designs.size());
  for (std::size_t i = 0; i < ws.designs.size(); ++i) {
    ClusterTerms t;
    t.design = ws.designs[i];
    t.mean = means[i];
    const auto m = t.mean.size();
    const Eigen::VectorXd eta = t.design * beta;
    t.deriv.resize(m, p);
    t.variance_sd.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      t.deriv.row(j) = link_mu_deriv(spec.link(), eta(j)) * t.design.row(j);
      t.variance_sd(j) = std::sqrt(variance_function(spec.family(), t.mean(j)));
    }
    t.residual = ws.outcomes[i] - t.mean;

    // V^{-1} M = A^{-1/2} R^{-1} A^{-1/2} M
    const ExchangeableInverse rinv(alpha, static_cast<std::size_t>(m));
    const Eigen::ArrayXd inv_sd = t.variance_sd.array().inverse();
    Eigen::MatrixXd scaled_d = inv_sd.matrix().asDiagonal() * t.deriv;
    Eigen::MatrixXd vinv_d = inv_sd.matrix().asDiagonal() * rinv.apply(scaled_d);
    t.information = t.deriv.transpose() * vinv_d;
    t.score = vinv_d.transpose() * t.residual;

    out.bread += t.information;
    out.score += t.score;
    out.terms.push_back(std::move(t));
  }
  return out;
}

}  // namespace

AlphaBounds alpha_bounds(std::size_t max_cluster_size) {
  if (max_cluster_size < 2) return {0.0, 0.0};
  return {-1.0 / static_cast<double>(max_cluster_size - 1) + kAlphaMargin, 1.0 - kAlphaMargin};
}

ExchangeableInverse::ExchangeableInverse(double alpha, std::size_t size)
    : inv_perp_(1.0 / (1.0 - alpha)),
      inv_mean_(1.0 / (1.0 + (static_cast<double>(size) - 1.0) * alpha)),
      size_(size) {}

// R has eigenvalue 1 + (m-1) alpha along the ones vector and 1 - alpha on its
// complement; applying each part separately avoids cancellation near the
// lower bound of alpha.
Eigen::VectorXd ExchangeableInverse::apply(const Eigen::VectorXd& v) const {
  const double mean = v.mean();
  return (inv_perp_ * (v.array() - mean) + inv_mean_ * mean).matrix();
}

Eigen::MatrixXd ExchangeableInverse::apply(const Eigen::MatrixXd& m) const {
  const Eigen::RowVectorXd col_means = m.colwise().mean();
  const Eigen::MatrixXd spread = m.rowwise() - col_means;
  return inv_perp_ * spread + inv_mean_ * Eigen::VectorXd::Ones(m.rows()) * col_means;
}

Eigen::MatrixXd ExchangeableInverse::dense() const {
  const auto n = static_cast<Eigen::Index>(size_);
  const double k = 1.0 / static_cast<double>(size_);
  const Eigen::MatrixXd avg = Eigen::MatrixXd::Constant(n, n, k);
  return inv_perp_ * (Eigen::MatrixXd::Identity(n, n) - avg) + inv_mean_ * avg;
}

double GeeFit::score_norm() const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(beta.size());
  for (const auto& t : clusters) total += t.score;
  return total.size() == 0 ? 0.0 : total.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd design_matrix(const Cluster& cluster, MeanModel mean_model) {
  const auto m = static_cast<Eigen::Index>(cluster.size());
  if (mean_model == MeanModel::InterceptOnly) return Eigen::MatrixXd::Ones(m, 1);
  Eigen::MatrixXd x(m, 2);
  x.col(0).setOnes();
  x.col(1).setConstant(cluster.arm == Arm::Intervention ? 1.0 : 0.0);
  return x;
}

Eigen::VectorXd initialize_beta(const TrialDataset& data, const ModelSpec& spec) {
  const double n = static_cast<double>(data.n_observations());
  const bool raw = spec.family() == Family::Gaussian;
  auto start = [&](double prop) {
    if (!raw) prop = std::clamp(prop, 0.5 / n, 1.0 - 0.5 / n);
    return link_apply(spec.link(), prop);
  };
  if (spec.mean_model() == MeanModel::InterceptOnly) {
    Eigen::VectorXd beta(1);
    beta(0) = start(data.pooled_summary().proportion());
    return beta;
  }
  const double g0 = start(data.arm_summary(Arm::Control).proportion());
  const double g1 = start(data.arm_summary(Arm::Intervention).proportion());
  Eigen::VectorXd beta(2);
  beta << g0, g1 - g0;
  return beta;
}

AlphaPhi estimate_alpha_phi(const TrialDataset& data, std::span<const Eigen::VectorXd> means, Family family,
                            std::size_t n_params, CorrelationKind kind) {
  const auto& clusters = data.clusters();
  const double p = static_cast<double>(n_params);
  double sum_sq = 0.0;
  double sum_cross = 0.0;
  double n_obs = 0.0;
  double n_pairs = 0.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    double s = 0.0;
    double ss = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double mu = means[i](static_cast<Eigen::Index>(j));
      const double e = (c.outcomes[j] - mu) / std::sqrt(variance_function(family, mu));
      s += e;
      ss += e * e;
    }
    sum_sq += ss;
    sum_cross += 0.5 * (s * s - ss);
    const double m = static_cast<double>(c.size());
    n_obs += m;
    n_pairs += 0.5 * m * (m - 1.0);
  }

  AlphaPhi out;
  out.phi = sum_sq / std::max(n_obs - p, 1.0);
  if (kind == CorrelationKind::Independence || n_pairs == 0.0) return out;

  const double pair_denominator = n_pairs - p;
  if (pair_denominator > 0.0 && out.phi > 0.0) {
    out.alpha_unclamped = (sum_cross / pair_denominator) / out.phi;
  }
  const auto bounds = alpha_bounds(data.max_cluster_size());
  out.alpha = std::clamp(out.alpha_unclamped, bounds.lower, bounds.upper);
  out.clamped = out.alpha != out.alpha_unclamped;
  return out;
}

GeeFit fit_gee(const TrialDataset& data, const ModelSpec& spec, WorkingCorrelation corr, const FitOptions& opts) {
  const Workspace ws = make_workspace(data, spec.mean_model());
  Eigen::VectorXd beta = initialize_beta(data, spec);
  std::vector<Eigen::VectorXd> means;
  if (!compute_means(ws, spec, beta, means)) {
    throw NonConvergence(FailureReason::StepHalvingExhausted, 0, to_std(beta));
  }

  constexpr double kMinInformationRcond = 1e-10;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    const AlphaPhi ap = estimate_alpha_phi(data, means, spec.family(), spec.n_params(), corr.kind);
    const Assembly a = assemble(ws, spec, beta, means, ap.alpha);
    const Eigen::LLT<Eigen::MatrixXd> llt(a.bread);
    if (llt.info() != Eigen::Success || !a.bread.allFinite() || llt.rcond() < kMinInformationRcond) {
      throw NonConvergence(FailureReason::SingularInformation, iter, to_std(beta));
    }
    Eigen::VectorXd step = llt.solve(a.score);
    if (!step.allFinite()) throw NonConvergence(FailureReason::SingularInformation, iter, to_std(beta));

    Eigen::VectorXd proposal = beta + step;
    int halvings = 0;
    while (!compute_means(ws, spec, proposal, means)) {
      if (++halvings > opts.max_step_halvings) {
        throw NonConvergence(FailureReason::StepHalvingExhausted, iter, to_std(beta));
      }
      step *= 0.5;
      proposal = beta + step;
    }
    beta = proposal;

    if (step.cwiseAbs().maxCoeff() >= opts.beta_tol) continue;

    const AlphaPhi final_ap = estimate_alpha_phi(data, means, spec.family(), spec.n_params(), corr.kind);
    Assembly final_a = assemble(ws, spec, beta, means, final_ap.alpha);
    if (final_a.score.cwiseAbs().maxCoeff() >= opts.score_tol) continue;

    GeeFit fit;
    fit.spec = spec;
    fit.corr = corr;
    fit.beta = beta;
    fit.alpha = final_ap.alpha;
    fit.phi = final_ap.phi;
    fit.alpha_clamped = final_ap.clamped;
    fit.converged = true;
    fit.iterations = iter;
    fit.n_clusters = data.n_clusters();
    fit.n_observations = data.n_observations();
    fit.clusters = std::move(final_a.terms);
    fit.bread = std::move(final_a.bread);
    return fit;
  }
  throw NonConvergence(FailureReason::IterationLimit, opts.max_iter, to_std(beta));
}

}  // namespace crtgee
