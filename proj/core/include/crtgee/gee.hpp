#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "crtgee/model.hpp"
#include "crtgee/trial.hpp"

namespace crtgee {

enum class CorrelationKind { Exchangeable, Independence };

struct WorkingCorrelation {
  CorrelationKind kind = CorrelationKind::Exchangeable;

  static WorkingCorrelation exchangeable() { return {CorrelationKind::Exchangeable}; }
  static WorkingCorrelation independence() { return {CorrelationKind::Independence}; }
};

/// Admissible closed interval for alpha given the largest cluster, with the
/// 1e-6 margin that keeps every R_i(alpha) positive definite.
struct AlphaBounds {
  double lower;
  double upper;
};
AlphaBounds alpha_bounds(std::size_t max_cluster_size);

/// Inverse of the m x m exchangeable correlation matrix R(alpha), applied in
/// O(m) through its two eigenspaces.
class ExchangeableInverse {
 public:
  ExchangeableInverse(double alpha, std::size_t size);

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd dense() const;

 private:
  double inv_perp_;  // 1 / (1 - alpha)
  double inv_mean_;  // 1 / (1 + (m - 1) alpha)
  std::size_t size_;
};

struct FitOptions {
  int max_iter = 50;
  double beta_tol = 1e-8;
  double score_tol = 1e-6;
  int max_step_halvings = 10;
};

/// Per-cluster quantities at the solution. The working covariance is
/// V_i = A_i^{1/2} R_i(alpha) A_i^{1/2}; the dispersion is kept apart in
/// GeeFit::phi.
struct ClusterTerms {
  Eigen::MatrixXd design;       // X_i, M_i x p
  Eigen::VectorXd mean;         // mu_i
  Eigen::MatrixXd deriv;        // D_i = d mu_i / d beta', M_i x p
  Eigen::VectorXd residual;     // Y_i - mu_i
  Eigen::VectorXd variance_sd;  // sqrt(V(mu_ij)), diagonal of A_i^{1/2}
  Eigen::MatrixXd information;  // D_i' V_i^{-1} D_i
  Eigen::VectorXd score;        // D_i' V_i^{-1} (Y_i - mu_i)
};

struct GeeFit {
  ModelSpec spec{Family::Binomial, Link::Logit};
  WorkingCorrelation corr;
  Eigen::VectorXd beta;
  double alpha = 0.0;
  double phi = 1.0;
  bool alpha_clamped = false;
  bool converged = false;
  int iterations = 0;
  std::size_t n_clusters = 0;
  std::size_t n_observations = 0;
  std::vector<ClusterTerms> clusters;
  Eigen::MatrixXd bread;  // sum_i D_i' V_i^{-1} D_i (unnormalized)

  /// max_j |sum_i score_i|_j
  double score_norm() const;
  std::size_t n_params() const { return static_cast<std::size_t>(beta.size()); }
};

/// Rows of X_i for one cluster: (1, arm) or (1).
Eigen::MatrixXd design_matrix(const Cluster& cluster, MeanModel mean_model);

/// Starting values from clamped arm proportions on the link scale.
Eigen::VectorXd initialize_beta(const TrialDataset& data, const ModelSpec& spec);

struct AlphaPhi {
  double alpha = 0.0;
  double phi = 1.0;
  double alpha_unclamped = 0.0;
  bool clamped = false;
};

/// Moment estimators from Pearson residuals:
///   phi   = sum e^2 / (n - p)
///   alpha = [sum_i sum_{j<k} e_ij e_ik / (n_pairs - p)] / phi, clamped.
/// `means` holds mu_i for each cluster in `data` order.
AlphaPhi estimate_alpha_phi(const TrialDataset& data, std::span<const Eigen::VectorXd> means,
                            Family family, std::size_t n_params, CorrelationKind kind);

/// Fisher scoring with alpha and phi refreshed every iteration and
/// step-halving whenever a proposal leaves the family's mean range.
/// Throws NonConvergence on failure.
GeeFit fit_gee(const TrialDataset& data, const ModelSpec& spec,
               WorkingCorrelation corr = WorkingCorrelation::exchangeable(),
               const FitOptions& opts = {});

}  // namespace crtgee
