#pragma once

#include <optional>
#include <string>
#include <vector>

#include "donutrd/core.hpp"
#include "donutrd/honest.hpp"
#include "donutrd/local_fit.hpp"

namespace donutrd {

inline constexpr double kDefaultWeakFloor = 0.10;

/// Boundary jump at the threshold: above.boundary_value - below.boundary_value.
struct RdFit {
  double jump = 0.0;
  double se = 0.0;
  SideFit below;
  SideFit above;
  std::optional<HonestCI> honest;
  RdSpec spec_used;
  std::vector<std::string> warnings;

  Interval conventional_ci(double alpha = 0.05) const;
  std::size_t n_below() const { return below.n_used; }
  std::size_t n_above() const { return above.n_used; }
};

/// Rows of `cohort` on each side of spec.threshold (outside the donut) with
/// a value for spec.outcome_key.
struct SplitSides {
  std::vector<SidePoint> below;
  std::vector<SidePoint> above;
};
SplitSides split_sides(const Cohort& cohort, const RdSpec& spec);

RdFit sharp_rd(const Cohort& cohort, const RdSpec& spec);
RdFit sharp_rd(const Cohort& cohort, const RdSpec& spec,
               const SmoothnessBound& bound, double alpha);

/// Combines two independently fitted sides. Errors from either side carry a
/// side tag in the message.
RdFit rd_from_sides(SideFit below, SideFit above, const RdSpec& spec);

HonestCI honest_interval(const RdFit& fit, const SmoothnessBound& bound,
                         double alpha);
void attach_honest(RdFit& fit, const SmoothnessBound& bound, double alpha);

/// Sharp RD on the 0/1 treatment indicator. Adds a warning when the jump does
/// not clear `weak_floor`.
RdFit first_stage(const Cohort& cohort, RdSpec spec,
                  double weak_floor = kDefaultWeakFloor);

struct FuzzyOptions {
  double weak_floor = kDefaultWeakFloor;
  double alpha = 0.05;
};

struct FuzzyResult {
  RdFit reduced_form;
  RdFit first_stage;
  double wald = 0.0;
  double se = 0.0;  // delta method, independent fits
  Interval conventional_ci;
  /// Reduced-form honest interval divided by the first-stage estimate.
  std::optional<Interval> honest_ci;
  /// Delta-method interval widened by the linearized worst-case bias of the
  /// ratio; reported alongside as a cross-check.
  std::optional<HonestCI> delta_honest;
};

/// Wald ratio from already fitted reduced form and first stage. Throws
/// Error{weak_instrument} when the first stage does not exceed the floor.
FuzzyResult fuzzy_from_fits(RdFit reduced_form, RdFit first_stage,
                            const FuzzyOptions& options = {});

FuzzyResult fuzzy_rd(const Cohort& cohort, const RdSpec& outcome_spec,
                     const RdSpec& stage_spec,
                     const FuzzyOptions& options = {});

/// As above, with honest intervals from precomputed smoothness bounds.
FuzzyResult fuzzy_rd(const Cohort& cohort, const RdSpec& outcome_spec,
                     const RdSpec& stage_spec,
                     const SmoothnessBound& outcome_bound,
                     const SmoothnessBound& stage_bound,
                     const FuzzyOptions& options = {});

}  // namespace donutrd
