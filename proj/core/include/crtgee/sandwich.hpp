#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "crtgee/gee.hpp"

namespace crtgee {

enum class VarianceKind { MB, Robust, KC, MD, FG, MBN, AVG };

inline constexpr std::array<VarianceKind, 7> kAllVarianceKinds = {
    VarianceKind::MB, VarianceKind::Robust, VarianceKind::KC, VarianceKind::MD,
    VarianceKind::FG, VarianceKind::MBN,    VarianceKind::AVG};

std::string_view to_string(VarianceKind kind);
std::optional<VarianceKind> parse_variance_kind(std::string_view text);

struct VarianceDiagnostics {
  double q_max = 0.0;    // largest eigenvalue over all Q_i
  double mbn_phi = 0.0;  // inflation factor, MBN only
  double mbn_delta = 0.0;
  double mbn_c = 0.0;
};

struct VarianceEstimate {
  VarianceKind kind = VarianceKind::Robust;
  Eigen::MatrixXd cov;
  VarianceDiagnostics diagnostics;

  double se(Eigen::Index j) const;
};

/// Leverage-type matrices Q_i = D_i' V_i^{-1} D_i B^{-1} together with the
/// symmetric factorization used to take functions of (I - Q_i).
///
/// With B = L L', Q_i = L G_i L^{-1} where G_i = L^{-1} H_i L^{-T} is
/// symmetric positive semidefinite, so every Q_i has real eigenvalues in
/// [0, 1] and f(I - Q_i) = L f(I - G_i) L^{-1} is the principal branch.
class CorrectionContext {
 public:
  explicit CorrectionContext(const GeeFit& fit, double fg_bound = 0.75);

  std::size_t size() const { return q_.size(); }
  const Eigen::MatrixXd& q(std::size_t i) const { return q_[i]; }
  const Eigen::VectorXd& q_eigenvalues(std::size_t i) const { return eigenvalues_[i]; }
  double q_max() const { return q_max_; }
  double fg_bound() const { return fg_bound_; }

  /// C_i for a multiplicative correction kind (Robust, KC, MD, FG).
  /// Throws CorrectionSingularity when (I - Q_i) has no principal inverse root.
  Eigen::MatrixXd multiplier(std::size_t i, VarianceKind kind) const;

 private:
  Eigen::MatrixXd chol_;  // L
  std::vector<Eigen::MatrixXd> q_;
  std::vector<Eigen::MatrixXd> eigvecs_;  // of G_i
  std::vector<Eigen::VectorXd> eigenvalues_;
  double q_max_ = 0.0;
  double fg_bound_;
};

/// phi * B^{-1}. Throws SingularityError when B is not invertible.
VarianceEstimate model_based(const GeeFit& fit);

/// B^{-1} (sum_i s_i s_i') B^{-1} with s_i = C_i D_i' V_i^{-1} (Y_i - mu_i)
/// for each requested kind in {Robust, KC, MD, FG}. Other kinds in `kinds`
/// are rejected with UsageError.
std::vector<VarianceEstimate> robust_sandwich(const GeeFit& fit, std::span<const VarianceKind> kinds,
                                              double fg_bound = 0.75);

/// c V_robust + delta_N * phi_MBN * V_model. Requires N >= 3.
VarianceEstimate mbn(const GeeFit& fit);

/// Elementwise mean of a KC and an MD estimate.
VarianceEstimate avg(const VarianceEstimate& kc, const VarianceEstimate& md);

/// All requested kinds in request order; AVG pulls in KC and MD internally.
std::vector<VarianceEstimate> compute_variances(const GeeFit& fit, std::span<const VarianceKind> kinds,
                                                double fg_bound = 0.75);

}  // namespace crtgee
