#include "crtgee/sandwich.hpp"

#include <algorithm>
#include <cmath>

#include "crtgee/errors.hpp"

namespace crtgee {

namespace {

constexpr double kMinCorrectionEigenvalue = 1e-12;

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

Eigen::LLT<Eigen::MatrixXd> factor_bread(const GeeFit& fit) {
  Eigen::LLT<Eigen::MatrixXd> llt(fit.bread);
  if (fit.bread.size() == 0 || llt.info() != Eigen::Success) {
    throw SingularityError("bread matrix sum D'V^{-1}D is not positive definite");
  }
  return llt;
}

Eigen::MatrixXd bread_inverse(const GeeFit& fit) {
  const auto llt = factor_bread(fit);
  const auto p = fit.bread.rows();
  return llt.solve(Eigen::MatrixXd::Identity(p, p));
}

bool is_multiplicative(VarianceKind kind) {
  return kind == VarianceKind::Robust || kind == VarianceKind::KC || kind == VarianceKind::MD ||
         kind == VarianceKind::FG;
}

}  // namespace

std::string_view to_string(VarianceKind kind) {
  switch (kind) {
    case VarianceKind::MB:
      return "MB";
    case VarianceKind::Robust:
      return "Robust";
    case VarianceKind::KC:
      return "KC";
    case VarianceKind::MD:
      return "MD";
    case VarianceKind::FG:
      return "FG";
    case VarianceKind::MBN:
      return "MBN";
    case VarianceKind::AVG:
      return "AVG";
  }
  return "?";
}

std::optional<VarianceKind> parse_variance_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  for (auto kind : kAllVarianceKinds) {
    std::string name(to_string(kind));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (name == lower) return kind;
  }
  return std::nullopt;
}

double VarianceEstimate::se(Eigen::Index j) const { return std::sqrt(std::max(cov(j, j), 0.0)); }

CorrectionContext::CorrectionContext(const GeeFit& fit, double fg_bound) : fg_bound_(fg_bound) {
  if (!(fg_bound > 0.0 && fg_bound <= 1.0)) throw UsageError("FG bound r must lie in (0, 1]");
  const auto llt = factor_bread(fit);
  chol_ = llt.matrixL();
  const auto p = fit.bread.rows();
  const Eigen::MatrixXd binv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const auto lower = chol_.triangularView<Eigen::Lower>();

  q_.reserve(fit.clusters.size());
  eigvecs_.reserve(fit.clusters.size());
  eigenvalues_.reserve(fit.clusters.size());
  for (const auto& t : fit.clusters) {
    q_.push_back(t.information * binv);
    // G = L^{-1} H L^{-T}
    Eigen::MatrixXd g = lower.solve(t.information);
    g = lower.solve(g.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(g));
    eigvecs_.push_back(eig.eigenvectors());
    eigenvalues_.push_back(eig.eigenvalues());
    q_max_ = std::max(q_max_, eig.eigenvalues().maxCoeff());
  }
}

Eigen::MatrixXd CorrectionContext::multiplier(std::size_t i, VarianceKind kind) const {
  const auto p = chol_.rows();
  switch (kind) {
    case VarianceKind::Robust:
      return Eigen::MatrixXd::Identity(p, p);
    case VarianceKind::FG: {
      Eigen::VectorXd d(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        d(j) = 1.0 / std::sqrt(1.0 - std::min(fg_bound_, q_[i](j, j)));
      }
      if (!d.allFinite()) throw CorrectionSingularity(i, "FG", 1.0 - fg_bound_);
      return d.asDiagonal();
    }
    case VarianceKind::KC:
    case VarianceKind::MD: {
      const double power = kind == VarianceKind::KC ? -0.5 : -1.0;
      const Eigen::VectorXd one_minus = (1.0 - eigenvalues_[i].array()).matrix();
      const double smallest = one_minus.minCoeff();
      if (smallest <= kMinCorrectionEigenvalue) {
        throw CorrectionSingularity(i, std::string(to_string(kind)), smallest);
      }
      const Eigen::VectorXd f = one_minus.array().pow(power).matrix();
      const Eigen::MatrixXd& u = eigvecs_[i];
      // L f(I - G) L^{-1}
      const Eigen::MatrixXd inner = u * f.asDiagonal() * u.transpose();
      const Eigen::MatrixXd left = chol_ * inner;
      return chol_.transpose().triangularView<Eigen::Upper>().solve(left.transpose()).transpose();
    }
    default:
      throw UsageError(std::string(to_string(kind)) + " is not a multiplicative correction");
  }
}

VarianceEstimate model_based(const GeeFit& fit) {
  VarianceEstimate v;
  v.kind = VarianceKind::MB;
  v.cov = symmetrize(fit.phi * bread_inverse(fit));
  return v;
}

std::vector<VarianceEstimate> robust_sandwich(const GeeFit& fit, std::span<const VarianceKind> kinds,
                                              double fg_bound) {
  for (auto kind : kinds) {
    if (!is_multiplicative(kind)) {
      throw UsageError(std::string(to_string(kind)) + " is not a sandwich correction");
    }
  }
  const CorrectionContext ctx(fit, fg_bound);
  const auto p = fit.bread.rows();
  const Eigen::MatrixXd binv = bread_inverse(fit);

  std::vector<VarianceEstimate> out;
  out.reserve(kinds.size());
  for (auto kind : kinds) {
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t i = 0; i < fit.clusters.size(); ++i) {
      const Eigen::VectorXd s = kind == VarianceKind::Robust ? fit.clusters[i].score
                                                             : (ctx.multiplier(i, kind) * fit.clusters[i].score).eval();
      meat.noalias() += s * s.transpose();
    }
    VarianceEstimate v;
    v.kind = kind;
    v.cov = symmetrize(binv * meat * binv);
    v.diagnostics.q_max = ctx.q_max();
    out.push_back(std::move(v));
  }
  return out;
}

VarianceEstimate mbn(const GeeFit& fit) {
  const double n_clusters = static_cast<double>(fit.n_clusters);
  if (fit.n_clusters <= 2) throw UnsupportedDesign("MBN correction needs at least 3 clusters");
  const double n_obs = static_cast<double>(fit.n_observations);
  const double p = static_cast<double>(fit.n_params());

  const Eigen::MatrixXd binv = bread_inverse(fit);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(binv.rows(), binv.cols());
  for (const auto& t : fit.clusters) meat.noalias() += t.score * t.score.transpose();

  const double c = ((n_obs - 1.0) / (n_obs - 2.0)) * (n_clusters / (n_clusters - 1.0));
  const double delta = std::min(0.5, 2.0 / (n_clusters - 2.0));
  // Ratio of the sandwich to the model-based covariance, both with the
  // dispersion folded into the working covariance.
  double inflation = 1.0;
  if (fit.phi > 0.0) inflation = std::max(1.0, (c * binv * meat).trace() / (p * fit.phi));

  VarianceEstimate v;
  v.kind = VarianceKind::MBN;
  const Eigen::MatrixXd robust = binv * meat * binv;
  v.cov = symmetrize(c * robust + delta * inflation * fit.phi * binv);
  v.diagnostics.mbn_phi = inflation;
  v.diagnostics.mbn_delta = delta;
  v.diagnostics.mbn_c = c;
  return v;
}

VarianceEstimate avg(const VarianceEstimate& kc, const VarianceEstimate& md) {
  if (kc.kind != VarianceKind::KC || md.kind != VarianceKind::MD) {
    throw UsageError("AVG needs a KC estimate and an MD estimate");
  }
  if (kc.cov.rows() != md.cov.rows() || kc.cov.cols() != md.cov.cols()) {
    throw UsageError("AVG inputs have different dimensions");
  }
  VarianceEstimate v;
  v.kind = VarianceKind::AVG;
  v.cov = (kc.cov + md.cov) / 2.0;
  v.diagnostics.q_max = std::max(kc.diagnostics.q_max, md.diagnostics.q_max);
  return v;
}

std::vector<VarianceEstimate> compute_variances(const GeeFit& fit, std::span<const VarianceKind> kinds,
                                                double fg_bound) {
  std::vector<VarianceEstimate> out;
  out.reserve(kinds.size());
  for (auto kind : kinds) {
    switch (kind) {
      case VarianceKind::MB:
        out.push_back(model_based(fit));
        break;
      case VarianceKind::MBN:
        out.push_back(mbn(fit));
        break;
      case VarianceKind::AVG: {
        constexpr std::array<VarianceKind, 2> pair = {VarianceKind::KC, VarianceKind::MD};
        auto both = robust_sandwich(fit, pair, fg_bound);
        out.push_back(avg(both[0], both[1]));
        break;
      }
      default: {
        const std::array<VarianceKind, 1> one = {kind};
        out.push_back(std::move(robust_sandwich(fit, one, fg_bound).front()));
      }
    }
  }
  return out;
}

}  // namespace crtgee
