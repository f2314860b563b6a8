#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "donutrd/core.hpp"
#include "donutrd/estimators.hpp"
#include "donutrd/parallel.hpp"

namespace donutrd {

enum class BaselineMode { boundary, window };

std::string_view to_string(BaselineMode mode);
BaselineMode parse_baseline_mode(std::string_view text);

/// Main-analysis specifications: local linear for OOP, local quadratic for
/// adherence and enrollment, triangular kernel, bandwidth 10, donut 0.
RdSpec default_spec(std::string_view outcome_key, int threshold = 65);

struct PedSpecs {
  RdSpec oop = default_spec("oop");
  RdSpec adherence = default_spec("adherence");
  RdSpec stage = default_spec("treated");
  BaselineMode baseline_mode = BaselineMode::boundary;
  int window = 5;  // years below the threshold used by BaselineMode::window
  double weak_floor = kDefaultWeakFloor;
  double alpha = 0.05;
};

struct Baselines {
  double q_pre = 0.0;  // adherence just below the threshold
  double p_pre = 0.0;  // OOP just below the threshold
};

Baselines baselines(const Cohort& cohort, const PedSpecs& specs);

double compute_ped(double delta_q, double q_pre, double delta_p, double p_pre);

struct PedPoint {
  double ped = 0.0;
  double q_pre = 0.0;
  double p_pre = 0.0;
  double delta_q = 0.0;
  double delta_p = 0.0;
};

/// Point estimate through the observation-level pipeline: fuzzy RD on OOP and
/// adherence, baselines, then the elasticity.
PedPoint ped_point(const Cohort& cohort, const PedSpecs& specs);

struct PedResult {
  double ped = 0.0;
  Interval ci;
  double q_pre = 0.0;
  double p_pre = 0.0;
  double delta_q = 0.0;
  double delta_p = 0.0;
  int replicates = 0;
  int failed_replicates = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  BaselineMode baseline_mode = BaselineMode::boundary;

  bool operator==(const PedResult&) const = default;
};

inline constexpr int kMinBootstrapReplicates = 200;
inline constexpr double kMaxFailedReplicateShare = 0.20;

/// Which per-replicate pipeline computes a bootstrap draw.
enum class BootstrapPath {
  grouped,    // per-age sufficient statistics, small dense solves
  reference,  // materialized resample through ped_point
};

/// Per-replicate elasticities (nullopt where the pipeline failed). Replicate r
/// draws n row indices with replacement from mt19937_64(stream_seed(seed, r)).
std::vector<std::optional<double>> bootstrap_draws(
    const Cohort& cohort, const PedSpecs& specs, int replicates,
    std::uint64_t seed, BootstrapPath path = BootstrapPath::grouped,
    Execution exec = Execution::parallel);

/// Percentile bootstrap. Throws Error{unstable_bootstrap} when more than 20%
/// of replicates fail.
PedResult bootstrap_ped(const Cohort& cohort, const PedSpecs& specs,
                        int replicates, std::uint64_t seed,
                        Execution exec = Execution::parallel);

/// Serial observation-level version of bootstrap_ped, kept as the reference
/// for the grouped kernel.
PedResult bootstrap_ped_reference(const Cohort& cohort, const PedSpecs& specs,
                                  int replicates, std::uint64_t seed);

/// Linear-interpolation sample quantile (type 7) of sorted values.
double sorted_quantile(const std::vector<double>& sorted, double prob);

}  // namespace donutrd
