#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "donutrd/core.hpp"

namespace donutrd {

double kernel_weight(double u, Kernel kernel);

/// One observation handed to a side fit. `row` is carried through to the
/// effective weights so callers can map weights back to cohort rows.
struct SidePoint {
  int age = 0;
  double y = 0.0;
  std::size_t row = 0;
};

struct EffectiveWeight {
  std::size_t row = 0;
  double centered_age = 0.0;  // age - threshold
  double weight = 0.0;
};

/// Polynomial fit on one side of the threshold.
///
/// `boundary_value` is the intercept in centered age, i.e. the limit of the
/// fitted regression function at the threshold. The estimator is linear in
/// the outcomes: boundary_value == sum(w.weight * y) over
/// `effective_weights`, which hold only the rows with positive kernel weight.
struct SideFit {
  Side side = Side::below;
  double boundary_value = 0.0;
  std::vector<double> coefficients;
  std::vector<EffectiveWeight> effective_weights;
  double se = 0.0;
  std::size_t n_used = 0;
};

SideFit fit_boundary(std::span<const SidePoint> side_data, const RdSpec& spec,
                     Side side);

/// First row of (X'WX)^-1 X'W: the weights that turn outcomes into the
/// intercept estimate. `design` must have full column rank on the rows with
/// positive weight.
Eigen::VectorXd effective_weights(const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& kernel_weights);

/// Per-age sufficient statistics for one outcome.
struct AgeCell {
  int age = 0;
  double count = 0.0;
  double sum = 0.0;
};

/// Boundary value from per-age counts and sums. Weighted least squares on
/// cell means with weights kernel * count has the same normal equations as
/// the observation-level fit, so this agrees with fit_boundary up to
/// rounding. Cells on the wrong side of the threshold or with zero count are
/// ignored.
double fit_grouped_boundary(std::span<const AgeCell> cells, const RdSpec& spec,
                            Side side);

}  // namespace donutrd
