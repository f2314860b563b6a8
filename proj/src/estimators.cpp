#include "donutrd/estimators.hpp"

#include <cmath>
#include <sstream>

namespace donutrd {

Interval RdFit::conventional_ci(double alpha) const {
  const double z = normal_two_sided_quantile(alpha);
  return {jump - z * se, jump + z * se};
}

SplitSides split_sides(const Cohort& cohort, const RdSpec& spec) {
  SplitSides sides;
  const int c = spec.threshold;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& obs = cohort.observations[i];
    if (in_donut(obs.age, c, spec.donut_radius)) continue;
    if (spec.scope == Scope::local &&
        std::abs(obs.age - c) > spec.bandwidth)
      continue;
    auto y = outcome_value(obs, spec.outcome_key);
    if (!y) continue;
    (obs.age < c ? sides.below : sides.above).push_back({obs.age, *y, i});
  }
  return sides;
}

RdFit rd_from_sides(SideFit below, SideFit above, const RdSpec& spec) {
  RdFit fit;
  fit.jump = above.boundary_value - below.boundary_value;
  fit.se = std::sqrt(below.se * below.se + above.se * above.se);
  fit.below = std::move(below);
  fit.above = std::move(above);
  fit.spec_used = spec;
  return fit;
}

RdFit sharp_rd(const Cohort& cohort, const RdSpec& spec) {
  spec.validate();
  const SplitSides sides = split_sides(cohort, spec);
  SideFit below = fit_boundary(sides.below, spec, Side::below);
  SideFit above = fit_boundary(sides.above, spec, Side::above);
  return rd_from_sides(std::move(below), std::move(above), spec);
}

RdFit sharp_rd(const Cohort& cohort, const RdSpec& spec,
               const SmoothnessBound& bound, double alpha) {
  RdFit fit = sharp_rd(cohort, spec);
  attach_honest(fit, bound, alpha);
  return fit;
}

HonestCI honest_interval(const RdFit& fit, const SmoothnessBound& bound,
                         double alpha) {
  const double bias = worst_case_bias(fit.below.effective_weights,
                                      fit.above.effective_weights, bound.m);
  HonestCI ci = honest_interval(fit.jump, fit.se, bias, alpha);
  ci.m = bound.m;
  ci.scale_factor = bound.scale_factor;
  return ci;
}

void attach_honest(RdFit& fit, const SmoothnessBound& bound, double alpha) {
  fit.honest = honest_interval(fit, bound, alpha);
}

RdFit first_stage(const Cohort& cohort, RdSpec spec, double weak_floor) {
  spec.outcome_key = "treated";
  RdFit fit = sharp_rd(cohort, spec);
  if (!(fit.jump > weak_floor)) {
    std::ostringstream msg;
    msg << "weak first stage: jump " << fit.jump << " does not exceed floor "
        << weak_floor;
    fit.warnings.push_back(msg.str());
  }
  return fit;
}

FuzzyResult fuzzy_from_fits(RdFit reduced_form, RdFit first_stage,
                            const FuzzyOptions& options) {
  const double fs = first_stage.jump;
  if (!(fs > options.weak_floor)) {
    std::ostringstream msg;
    msg << "first stage " << fs << " does not exceed the weak-stage floor "
        << options.weak_floor;
    throw Error(ErrorKind::weak_instrument, msg.str());
  }
  const double rf = reduced_form.jump;
  FuzzyResult out;
  out.wald = rf / fs;
  const double var = reduced_form.se * reduced_form.se / (fs * fs) +
                     rf * rf * first_stage.se * first_stage.se /
                         (fs * fs * fs * fs);
  out.se = std::sqrt(var);
  const double z = normal_two_sided_quantile(options.alpha);
  out.conventional_ci = {out.wald - z * out.se, out.wald + z * out.se};

  if (reduced_form.honest) {
    out.honest_ci = Interval{reduced_form.honest->lower / fs,
                             reduced_form.honest->upper / fs};
    double bias = reduced_form.honest->worst_case_bias / fs;
    if (first_stage.honest)
      bias += std::abs(out.wald) * first_stage.honest->worst_case_bias / fs;
    HonestCI ci = honest_interval(out.wald, out.se, bias, options.alpha);
    ci.m = reduced_form.honest->m;
    ci.scale_factor = reduced_form.honest->scale_factor;
    out.delta_honest = ci;
  }
  out.reduced_form = std::move(reduced_form);
  out.first_stage = std::move(first_stage);
  return out;
}

FuzzyResult fuzzy_rd(const Cohort& cohort, const RdSpec& outcome_spec,
                     const RdSpec& stage_spec, const FuzzyOptions& options) {
  RdFit fs = first_stage(cohort, stage_spec, options.weak_floor);
  RdFit rf = sharp_rd(cohort, outcome_spec);
  return fuzzy_from_fits(std::move(rf), std::move(fs), options);
}

FuzzyResult fuzzy_rd(const Cohort& cohort, const RdSpec& outcome_spec,
                     const RdSpec& stage_spec,
                     const SmoothnessBound& outcome_bound,
                     const SmoothnessBound& stage_bound,
                     const FuzzyOptions& options) {
  RdFit fs = first_stage(cohort, stage_spec, options.weak_floor);
  attach_honest(fs, stage_bound, options.alpha);
  RdFit rf = sharp_rd(cohort, outcome_spec, outcome_bound, options.alpha);
  return fuzzy_from_fits(std::move(rf), std::move(fs), options);
}

}  // namespace donutrd
