#include "crtgee/inference.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "crtgee/errors.hpp"

namespace crtgee {

namespace {

constexpr double kBetaRelTol = 1e-12;
constexpr int kBetaMaxTerms = 300;
constexpr double kTiny = 1e-300;

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxTerms; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kBetaRelTol) break;
  }
  return h;
}

// Smallest |t| bracket then bisection; f must be decreasing in t on [0, inf).
double invert_decreasing(const std::function<double(double)>& f, double target) {
  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

struct ArmCoefficient {
  double beta1;
  double se;
  double df;
};

ArmCoefficient check_arm_inputs(const GeeFit& fit, const VarianceEstimate& var, EffectMeasure measure) {
  if (fit.n_params() < 2) throw UsageError("Wald inference needs the intercept-plus-arm mean model");
  if (effect_measure_for(fit.spec.link()) != measure) {
    throw UsageError(std::string(to_string(measure)) + " is not the effect measure of the " +
                     std::string(to_string(fit.spec.link())) + " link");
  }
  if (var.cov.rows() != static_cast<Eigen::Index>(fit.n_params())) {
    throw UsageError("variance estimate does not match the fit's parameter count");
  }
  const double v = var.cov(1, 1);
  if (!(v > 0.0) || !std::isfinite(v)) throw DegenerateVariance("arm-coefficient variance is zero or undefined");
  return {fit.beta(1), std::sqrt(v), static_cast<double>(fit.n_clusters) - static_cast<double>(fit.n_params())};
}

InferenceResult finish(const GeeFit& fit, const VarianceEstimate& var, EffectMeasure measure, ArmCoefficient arm,
                       double p_value, double critical) {
  InferenceResult r;
  r.effect_measure = measure;
  r.estimator_kind = var.kind;
  r.estimate_link = arm.beta1;
  r.se = arm.se;
  r.df = arm.df;
  r.t_stat = arm.beta1 / arm.se;
  r.p_value = p_value;
  r.critical_value = critical;
  r.ci_link = {arm.beta1 - critical * arm.se, arm.beta1 + critical * arm.se};
  if (fit.spec.link() == Link::Identity) {
    r.estimate_effect = arm.beta1;
    r.ci_effect = r.ci_link;
  } else {
    r.estimate_effect = std::exp(arm.beta1);
    r.ci_effect = {std::exp(r.ci_link.first), std::exp(r.ci_link.second)};
  }
  return r;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta needs 0 <= x <= 1");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  if (!(df > 0.0)) throw DomainError("t distribution needs df > 0");
  if (std::isnan(t)) throw DomainError("t statistic is NaN");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t >= 0.0 ? tail : 1.0 - tail;
}

double student_t_two_sided(double t, double df) {
  return std::min(1.0, 2.0 * student_t_sf(std::fabs(t), df));
}

double student_t_isf(double q, double df) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  if (!(df > 0.0)) throw DomainError("t distribution needs df > 0");
  if (q == 0.5) return 0.0;
  if (q > 0.5) return -student_t_isf(1.0 - q, df);
  return invert_decreasing([df](double t) { return student_t_sf(t, df); }, q);
}

InferenceResult wald_inference(const GeeFit& fit, const VarianceEstimate& var, EffectMeasure measure,
                               double alpha_level) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw UsageError("alpha level must lie in (0, 1)");
  const ArmCoefficient arm = check_arm_inputs(fit, var, measure);
  if (!(arm.df > 0.0)) throw UnsupportedDesign("t reference needs N > p");
  const double p = student_t_two_sided(arm.beta1 / arm.se, arm.df);
  const double crit = student_t_isf(alpha_level / 2.0, arm.df);
  return finish(fit, var, measure, arm, p, crit);
}

InferenceResult wald_inference_z(const GeeFit& fit, const VarianceEstimate& var, EffectMeasure measure,
                                 double alpha_level) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw UsageError("alpha level must lie in (0, 1)");
  ArmCoefficient arm = check_arm_inputs(fit, var, measure);
  arm.df = std::numeric_limits<double>::infinity();
  const double p = std::min(1.0, 2.0 * normal_sf(std::fabs(arm.beta1 / arm.se)));
  const double crit = invert_decreasing(normal_sf, alpha_level / 2.0);
  return finish(fit, var, measure, arm, p, crit);
}

}  // namespace crtgee
