#pragma once

// Independent reference computations used only by the tests. Nothing here
// shares code with the production variance path: matrices are built densely,
// inverted with LU, and matrix roots come from Eigen's general (Schur based)
// matrix square root.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "crtgee/gee.hpp"
#include "crtgee/trial.hpp"

namespace oracle {

template <typename T>
T mean_from_eta(crtgee::Link link, T eta) {
  switch (link) {
    case crtgee::Link::Log:
      return std::exp(eta);
    case crtgee::Link::Identity:
      return eta;
    case crtgee::Link::Logit:
      return T(1) / (T(1) + std::exp(-eta));
  }
  return eta;
}

template <typename T>
T dmu_deta(crtgee::Link link, T eta) {
  switch (link) {
    case crtgee::Link::Log:
      return std::exp(eta);
    case crtgee::Link::Identity:
      return T(1);
    case crtgee::Link::Logit: {
      const T m = T(1) / (T(1) + std::exp(-eta));
      return m * (T(1) - m);
    }
  }
  return T(1);
}

template <typename T>
T variance_of(crtgee::Family family, T mu) {
  switch (family) {
    case crtgee::Family::Binomial:
      return mu * (T(1) - mu);
    case crtgee::Family::Poisson:
      return mu;
    case crtgee::Family::Gaussian:
      return T(1);
  }
  return T(1);
}

struct DenseVariances {
  Eigen::MatrixXd mb, robust, kc, md, fg, mbn, avg;
  std::vector<Eigen::MatrixXd> q;
};

/// N-normalized textbook formulas with V_i = phi A^{1/2} R(alpha) A^{1/2}:
///   Sigma1 = N^-1 sum D'V^-1 D, Q_i = D_i'V_i^-1 D_i (N Sigma1)^-1,
///   Sigma0 = N^-1 sum C_i u_i u_i' C_i', V = Sigma1^-1 Sigma0 Sigma1^-1 / N.
/// Evaluated in extended precision by default.
template <typename T = long double>
DenseVariances dense_variances(const crtgee::TrialDataset& data, const crtgee::ModelSpec& spec,
                               const Eigen::VectorXd& beta_in, double alpha_in, double phi_in,
                               double fg_bound_in = 0.75) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  const Vec beta = beta_in.cast<T>();
  const T alpha = alpha_in, phi = phi_in, fg_bound = fg_bound_in;
  const auto p = beta.size();
  const T n = static_cast<T>(data.n_clusters());
  std::vector<Mat> h;
  std::vector<Vec> u;
  Mat sigma1 = Mat::Zero(p, p);
  T total_obs = 0;

  for (const auto& c : data.clusters()) {
    const auto m = static_cast<Eigen::Index>(c.size());
    total_obs += static_cast<T>(m);
    Mat x(m, p);
    Vec y(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      x(j, 0) = 1;
      if (p > 1) x(j, 1) = c.arm == crtgee::Arm::Intervention ? 1 : 0;
      y(j) = c.outcomes[static_cast<std::size_t>(j)];
    }
    const Vec eta = x * beta;
    Vec mu(m);
    Mat d(m, p);
    Mat a_half = Mat::Zero(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      mu(j) = mean_from_eta<T>(spec.link(), eta(j));
      d.row(j) = dmu_deta<T>(spec.link(), eta(j)) * x.row(j);
      a_half(j, j) = std::sqrt(variance_of<T>(spec.family(), mu(j)));
    }
    Mat r = Mat::Constant(m, m, alpha);
    r.diagonal().setOnes();
    const Mat v = phi * a_half * r * a_half;
    const Mat v_inv = v.fullPivLu().inverse();
    h.push_back(d.transpose() * v_inv * d);
    u.push_back(d.transpose() * v_inv * (y - mu));
    sigma1 += h.back() / n;
  }

  const Mat sigma1_inv = sigma1.fullPivLu().inverse();
  const Mat ns1_inv = (n * sigma1).fullPivLu().inverse();
  const Mat eye = Mat::Identity(p, p);

  auto sandwich = [&](const std::function<Mat(const Mat&)>& correction) {
    Mat sigma0 = Mat::Zero(p, p);
    for (std::size_t i = 0; i < h.size(); ++i) {
      const Mat ci = correction(h[i] * ns1_inv);
      const Vec s = ci * u[i];
      sigma0 += s * s.transpose() / n;
    }
    const Mat cov = sigma1_inv * sigma0 * sigma1_inv / n;
    return Mat(T(0.5) * (cov + cov.transpose()));
  };

  const Mat robust = sandwich([&](const Mat&) { return eye; });
  const Mat kc = sandwich([&](const Mat& q) {
    const Mat root = (eye - q).sqrt();
    return Mat(root.fullPivLu().inverse());
  });
  const Mat md = sandwich([&](const Mat& q) { return Mat((eye - q).fullPivLu().inverse()); });
  const Mat fg = sandwich([&](const Mat& q) {
    Mat c = Mat::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) c(j, j) = T(1) / std::sqrt(T(1) - std::min(fg_bound, q(j, j)));
    return c;
  });

  const T c = ((total_obs - 1) / (total_obs - 2)) * (n / (n - 1));
  const T delta = std::min(T(0.5), T(2) / (n - 2));
  Mat sigma0 = Mat::Zero(p, p);
  for (const auto& ui : u) sigma0 += ui * ui.transpose() / n;
  const T inflation = std::max(T(1), (c * sigma1_inv * sigma0).trace() / static_cast<T>(p));

  DenseVariances out;
  for (const auto& hi : h) out.q.push_back((hi * ns1_inv).template cast<double>());
  out.mb = (sigma1_inv / n).template cast<double>();
  out.robust = robust.template cast<double>();
  out.kc = kc.template cast<double>();
  out.md = md.template cast<double>();
  out.fg = fg.template cast<double>();
  out.mbn = (c * robust + delta * inflation * sigma1_inv / n).template cast<double>();
  out.avg = (T(0.5) * (kc + md)).template cast<double>();
  return out;
}

/// Largest |a_jk - b_jk| relative to max |b_jk|.
inline double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / (scale > 0.0 ? scale : 1.0);
}

inline double student_t_density(double t, double df) {
  const double log_norm = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) - 0.5 * std::log(df * M_PI);
  return std::exp(log_norm - (df + 1.0) / 2.0 * std::log1p(t * t / df));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 50);
}

/// 2 P(T > |t|) = 1 - 2 * integral_0^|t| f.
inline double t_two_sided_by_quadrature(double t, double df) {
  const double half = integrate([df](double x) { return student_t_density(x, df); }, 0.0, std::abs(t));
  return 1.0 - 2.0 * half;
}

/// A small trial with cluster sizes in [min_size, max_size], the first half
/// of clusters in control. Outcomes are independent Bernoulli(p_arm).
inline crtgee::TrialDataset random_trial(std::mt19937_64& rng, std::size_t n_clusters, std::size_t min_size,
                                         std::size_t max_size, double p0, double p1) {
  std::uniform_int_distribution<std::size_t> size_dist(min_size, max_size);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<crtgee::Cluster> clusters;
  for (std::size_t i = 0; i < n_clusters; ++i) {
    crtgee::Cluster c;
    c.id = "k" + std::to_string(i);
    c.arm = i < n_clusters / 2 ? crtgee::Arm::Control : crtgee::Arm::Intervention;
    const double p = c.arm == crtgee::Arm::Control ? p0 : p1;
    c.outcomes.resize(size_dist(rng));
    for (auto& y : c.outcomes) y = unif(rng) < p ? 1 : 0;
    clusters.push_back(std::move(c));
  }
  return crtgee::TrialDataset(std::move(clusters));
}

inline crtgee::Cluster make_cluster(std::string id, crtgee::Arm arm, std::vector<std::uint8_t> y) {
  crtgee::Cluster c;
  c.id = std::move(id);
  c.arm = arm;
  c.outcomes = std::move(y);
  return c;
}

}  // namespace oracle
