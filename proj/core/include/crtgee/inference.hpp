#pragma once

#include <utility>

#include "crtgee/gee.hpp"
#include "crtgee/model.hpp"
#include "crtgee/sandwich.hpp"

namespace crtgee {

/// Regularized incomplete beta I_x(a, b) by continued fraction
/// (relative tolerance 1e-12, at most 300 terms).
double incomplete_beta(double a, double b, double x);

/// P(T > t) for Student t with `df` degrees of freedom (df may be fractional).
double student_t_sf(double t, double df);

/// Two-sided p-value 2 P(T > |t|).
double student_t_two_sided(double t, double df);

/// t such that student_t_sf(t, df) = q, for q in (0, 1). Found by bracketed
/// bisection on the survival function.
double student_t_isf(double q, double df);

struct InferenceResult {
  EffectMeasure effect_measure = EffectMeasure::RR;
  VarianceKind estimator_kind = VarianceKind::Robust;
  double estimate_link = 0.0;
  double estimate_effect = 0.0;
  double se = 0.0;
  double df = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  double critical_value = 0.0;
  std::pair<double, double> ci_link{};
  std::pair<double, double> ci_effect{};
};

/// Wald t-test on the arm coefficient with df = N - p.
InferenceResult wald_inference(const GeeFit& fit, const VarianceEstimate& var, EffectMeasure measure,
                               double alpha_level = 0.05);

/// Normal-reference variant, kept only as a diagnostic.
InferenceResult wald_inference_z(const GeeFit& fit, const VarianceEstimate& var, EffectMeasure measure,
                                 double alpha_level = 0.05);

}  // namespace crtgee
