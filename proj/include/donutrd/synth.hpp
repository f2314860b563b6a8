#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "donutrd/core.hpp"
#include "donutrd/elasticity.hpp"
#include "donutrd/honest.hpp"
#include "donutrd/parallel.hpp"

namespace donutrd {

enum class NoiseKind {
  normal,     // additive N(0, noise_sd^2), then clamped to the outcome range
  lognormal,  // multiplicative mean-one log-normal; noise_sd is the
              // coefficient of variation of the outcome around its mean
};

/// Mean of an outcome as a function of centered age (x = age - threshold):
/// polynomial(x) for the side plus complier_jump for treated units.
struct OutcomeModel {
  std::vector<double> below;  // polynomial coefficients in x, constant first
  std::vector<double> above;
  double complier_jump = 0.0;
  double noise_sd = 0.0;
  NoiseKind noise = NoiseKind::normal;

  double mean(double x, bool is_above, bool treated) const;
};

enum class CovariateKind { normal, bernoulli, poisson, uniform_int };

/// Smooth-in-age covariate generator. The location is
/// intercept + slope * x (+ jump above the threshold, for positive controls).
///  normal:      location + spread * N(0, 1)
///  bernoulli:   P(1) = location clamped to [0, 1]
///  poisson:     rate = max(location, 0)
///  uniform_int: uniform integer in [intercept, intercept + spread]
struct CovariateModel {
  std::string name;
  CovariateKind kind = CovariateKind::normal;
  double intercept = 0.0;
  double slope = 0.0;
  double spread = 1.0;
  double jump = 0.0;
};

struct CohortParams {
  std::size_t n = 1416;
  int age_lo = 50;
  int age_hi = 80;
  std::vector<double> age_weights;  // one per age in [age_lo, age_hi]; empty = uniform
  int threshold = 65;
  double p_below = 0.20;
  double p_above = 0.78;
  OutcomeModel oop;
  OutcomeModel adherence;
  std::vector<CovariateModel> covariates;
  std::uint64_t seed = 1;

  void validate() const;
};

/// The balance covariates: sex, Charlson index, prior 30-day OOP, diagnosis
/// year and month, all smooth in age.
std::vector<CovariateModel> default_covariates();

/// Calibration used throughout the tests: first stage 0.58, complier effects
/// of +$232 OOP and -0.063 adherence, boundary baselines q_pre = 0.9 and
/// p_pre = $66 just below the threshold.
CohortParams calibrated_params();

struct ClampStats {
  std::size_t adherence_clamped = 0;
  std::size_t oop_clamped = 0;
  std::size_t draws = 0;
  double adherence_fraction() const {
    return draws ? static_cast<double>(adherence_clamped) / draws : 0.0;
  }
};

struct SimulatedCohort {
  Cohort cohort;
  ClampStats clamps;
};

SimulatedCohort simulate(const CohortParams& params);
Cohort simulate_cohort(const CohortParams& params);

struct TrueEstimands {
  double first_stage = 0.0;
  double itt_oop = 0.0;
  double itt_adherence = 0.0;
  double complier_oop = 0.0;
  double complier_adherence = 0.0;
  double q_pre = 0.0;  // E[adherence | age -> c from below], before clamping
  double p_pre = 0.0;
  double ped = 0.0;  // NaN when the OOP effect is zero and adherence moves
};

TrueEstimands true_estimands(const CohortParams& params);

struct McSpecs {
  RdSpec oop = default_spec("oop");
  RdSpec adherence = default_spec("adherence");
  RdSpec stage = default_spec("treated");
  HonestSettings honest;
  double weak_floor = kDefaultWeakFloor;
};

struct EstimandSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double mean_bias = 0.0;
  double empirical_se = 0.0;
  double mean_se = 0.0;
  double conventional_coverage = 0.0;
  double honest_coverage = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

struct McSummary {
  std::vector<EstimandSummary> rows;  // first_stage, itt_*, fuzzy_*
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  double mean_adherence_clamp_fraction = 0.0;

  const EstimandSummary& row(std::string_view name) const;
};

/// Repeated simulate -> estimate. Replication r simulates with
/// stream_seed(seed, r), so the summary does not depend on `exec`.
McSummary monte_carlo(const CohortParams& params, const McSpecs& specs,
                      std::size_t replications, std::uint64_t seed,
                      Execution exec = Execution::parallel);

}  // namespace donutrd
