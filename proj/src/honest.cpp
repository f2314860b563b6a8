#include "donutrd/honest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>

namespace donutrd {

std::string_view to_string(MInterpretation mode) {
  return mode == MInterpretation::second_derivative ? "second_derivative"
                                                    : "raw_coefficient";
}

MInterpretation parse_m_interpretation(std::string_view text) {
  if (text == "second_derivative") return MInterpretation::second_derivative;
  if (text == "raw_coefficient") return MInterpretation::raw_coefficient;
  throw Error(ErrorKind::config,
              "unknown m interpretation '" + std::string(text) + "'");
}

namespace {

double curvature(const std::array<double, 3>& coef, MInterpretation mode) {
  const double factor = mode == MInterpretation::second_derivative ? 2.0 : 1.0;
  return std::abs(factor * coef[2]);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile_upper(double tail) {
  return boost::math::quantile(
      boost::math::complement(boost::math::normal_distribution<double>(),
                              tail));
}

}  // namespace

SmoothnessBound SmoothnessBound::rescaled(double new_scale) const {
  SmoothnessBound out = *this;
  out.scale_factor = new_scale;
  out.m = new_scale * std::max(curvature(below_coefficients, interpretation),
                               curvature(above_coefficients, interpretation));
  return out;
}

SmoothnessBound estimate_m(const Cohort& cohort, std::string_view outcome_key,
                           double scale_factor, int threshold,
                           MInterpretation interpretation) {
  if (!(scale_factor >= 0.0))
    throw Error(ErrorKind::config, "scale factor must be non-negative");
  std::vector<SidePoint> below, above;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& obs = cohort.observations[i];
    if (obs.age == threshold) continue;
    auto y = outcome_value(obs, outcome_key);
    if (!y) continue;
    (obs.age < threshold ? below : above).push_back({obs.age, *y, i});
  }
  RdSpec spec;
  spec.threshold = threshold;
  spec.donut_radius = 0;
  spec.scope = Scope::global;
  spec.order = 2;
  spec.outcome_key = std::string(outcome_key);

  SmoothnessBound bound;
  bound.interpretation = interpretation;
  const SideFit fb = fit_boundary(below, spec, Side::below);
  const SideFit fa = fit_boundary(above, spec, Side::above);
  std::copy_n(fb.coefficients.begin(), 3, bound.below_coefficients.begin());
  std::copy_n(fa.coefficients.begin(), 3, bound.above_coefficients.begin());
  return bound.rescaled(scale_factor);
}

double worst_case_bias(std::span<const EffectiveWeight> below,
                       std::span<const EffectiveWeight> above, double m) {
  double total = 0.0;
  for (const auto& w : below)
    total += std::abs(w.weight) * w.centered_age * w.centered_age;
  for (const auto& w : above)
    total += std::abs(w.weight) * w.centered_age * w.centered_age;
  return 0.5 * m * total;
}

double normal_two_sided_quantile(double alpha) {
  return normal_quantile_upper(alpha / 2.0);
}

double honest_cv(double t, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::config, "alpha must lie in (0, 1)");
  if (!(t >= 0.0) || !std::isfinite(t))
    throw Error(ErrorKind::degenerate_inference,
                "bias-to-se ratio must be finite and non-negative");
  const double z_two = normal_quantile_upper(alpha / 2.0);
  if (t == 0.0) return z_two;
  const double z_one = normal_quantile_upper(alpha);
  // Non-coverage alpha - P(|Z + t| > c) written with lower tails only so the
  // large-t regime keeps full precision. Decreasing in c.
  auto excess = [&](double c) {
    return alpha - std_normal_cdf(t - c) - std_normal_cdf(-t - c);
  };
  double lo = std::max(z_two, t + z_one);
  double hi = t + z_two;
  if (excess(lo) >= 0.0) return lo;
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(
      excess, lo, hi, excess(lo), excess(hi),
      boost::math::tools::eps_tolerance<double>(48), iters);
  return b;  // upper end of the bracket keeps coverage >= 1 - alpha
}

HonestCI honest_interval(double estimate, double se, double bias,
                         double alpha) {
  if (!(se >= 0.0) || !(bias >= 0.0))
    throw Error(ErrorKind::degenerate_inference, "negative se or bias");
  HonestCI ci;
  ci.alpha = alpha;
  ci.worst_case_bias = bias;
  if (se == 0.0) {
    // Exact fits leave a round-off sized bias from the estimated M.
    if (bias > 1e-12 * (1.0 + std::abs(estimate)))
      throw Error(ErrorKind::degenerate_inference,
                  "zero standard error with non-zero worst-case bias");
    ci.t_ratio = 0.0;
    ci.critical_value = honest_cv(0.0, alpha);
    ci.lower = ci.upper = estimate;
    return ci;
  }
  ci.t_ratio = bias / se;
  ci.critical_value = honest_cv(ci.t_ratio, alpha);
  ci.lower = estimate - ci.critical_value * se;
  ci.upper = estimate + ci.critical_value * se;
  return ci;
}

}  // namespace donutrd
