#pragma once

#include <array>
#include <span>
#include <string_view>

#include "donutrd/core.hpp"
#include "donutrd/local_fit.hpp"

namespace donutrd {

/// How the quadratic coefficient of the global fit becomes a curvature
/// bound: either the implied second derivative (2 * b2) or b2 itself.
enum class MInterpretation { second_derivative, raw_coefficient };

std::string_view to_string(MInterpretation mode);
MInterpretation parse_m_interpretation(std::string_view text);

struct HonestSettings {
  double scale_factor = 4.0;
  double alpha = 0.05;
  MInterpretation interpretation = MInterpretation::second_derivative;
};

/// Bound on |f''| used for the worst-case bias of the boundary estimators.
struct SmoothnessBound {
  double m = 0.0;
  double scale_factor = 4.0;
  MInterpretation interpretation = MInterpretation::second_derivative;
  std::array<double, 3> below_coefficients{};  // global quadratic, centered
  std::array<double, 3> above_coefficients{};

  /// Same global fits, different scale factor.
  SmoothnessBound rescaled(double new_scale) const;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const { return lower <= v && v <= upper; }
  bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
  double width() const { return upper - lower; }
  bool operator==(const Interval&) const = default;
};

struct HonestCI {
  double lower = 0.0;
  double upper = 0.0;
  double worst_case_bias = 0.0;
  double critical_value = 0.0;
  double t_ratio = 0.0;
  double alpha = 0.05;
  double m = 0.0;
  double scale_factor = 0.0;

  Interval interval() const { return {lower, upper}; }
};

/// Fits an unweighted quadratic in (age - threshold) separately on each side,
/// ignoring rows at age == threshold, and scales the larger curvature.
SmoothnessBound estimate_m(
    const Cohort& cohort, std::string_view outcome_key, double scale_factor,
    int threshold,
    MInterpretation interpretation = MInterpretation::second_derivative);

inline SmoothnessBound estimate_m(const Cohort& cohort,
                                  std::string_view outcome_key,
                                  double scale_factor) {
  return estimate_m(cohort, outcome_key, scale_factor, cohort.threshold);
}

/// Largest bias of the jump estimator over regression functions whose
/// second derivative is bounded by m on each side. A second-order Taylor
/// expansion at the threshold leaves a remainder of at most m/2 * x^2, and the
/// moment conditions on the weights remove the polynomial part.
double worst_case_bias(std::span<const EffectiveWeight> below,
                       std::span<const EffectiveWeight> above, double m);

/// Smallest c with P(|Z + t| <= c) >= 1 - alpha, Z standard normal.
double honest_cv(double t, double alpha);

double normal_two_sided_quantile(double alpha);

HonestCI honest_interval(double estimate, double se, double bias,
                         double alpha);

}  // namespace donutrd
