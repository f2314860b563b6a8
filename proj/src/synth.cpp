#include "donutrd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>

namespace donutrd {

namespace {

double polyval(const std::vector<double>& coef, double x) {
  double acc = 0.0;
  for (auto it = coef.rbegin(); it != coef.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double draw_covariate(const CovariateModel& m, double x, bool above,
                      std::mt19937_64& rng) {
  const double loc = m.intercept + m.slope * x + (above ? m.jump : 0.0);
  switch (m.kind) {
    case CovariateKind::normal:
      return loc + m.spread * std::normal_distribution<double>()(rng);
    case CovariateKind::bernoulli:
      return std::bernoulli_distribution(std::clamp(loc, 0.0, 1.0))(rng) ? 1.0
                                                                         : 0.0;
    case CovariateKind::poisson: {
      const double rate = std::max(loc, 0.0);
      if (rate == 0.0) return 0.0;
      return static_cast<double>(std::poisson_distribution<int>(rate)(rng));
    }
    case CovariateKind::uniform_int: {
      const auto lo = static_cast<long>(std::lround(loc));
      const auto hi = lo + static_cast<long>(std::lround(m.spread));
      return static_cast<double>(
          std::uniform_int_distribution<long>(lo, hi)(rng));
    }
  }
  return 0.0;
}

}  // namespace

double OutcomeModel::mean(double x, bool is_above, bool treated) const {
  return polyval(is_above ? above : below, x) +
         (treated ? complier_jump : 0.0);
}

void CohortParams::validate() const {
  if (n == 0) throw Error(ErrorKind::config, "n must be positive");
  if (age_lo > age_hi || age_lo < kMinPlausibleAge ||
      age_hi > kMaxPlausibleAge)
    throw Error(ErrorKind::config, "age range outside [40, 95]");
  if (!(threshold > age_lo && threshold < age_hi))
    throw Error(ErrorKind::config, "threshold must lie inside the age range");
  if (!age_weights.empty() &&
      age_weights.size() != static_cast<std::size_t>(age_hi - age_lo + 1))
    throw Error(ErrorKind::config, "age_weights needs one entry per age");
  if (!(0.0 <= p_below && p_below < p_above && p_above <= 1.0))
    throw Error(ErrorKind::config, "need 0 <= p_below < p_above <= 1");
  for (const auto* m : {&oop, &adherence}) {
    if (m->below.empty() || m->above.empty())
      throw Error(ErrorKind::config, "outcome baselines need coefficients");
    if (!(m->noise_sd >= 0.0))
      throw Error(ErrorKind::config, "noise_sd must be non-negative");
  }
}

std::vector<CovariateModel> default_covariates() {
  return {
      {"sex", CovariateKind::bernoulli, 0.45, 0.002, 0.0, 0.0},
      {"charlson", CovariateKind::poisson, 2.0, 0.04, 0.0, 0.0},
      {"prior_oop_30d", CovariateKind::normal, 120.0, 1.0, 40.0, 0.0},
      {"diagnosis_year", CovariateKind::uniform_int, 2011.0, 0.0, 4.0, 0.0},
      {"diagnosis_month", CovariateKind::uniform_int, 1.0, 0.0, 11.0, 0.0},
  };
}

CohortParams calibrated_params() {
  CohortParams p;
  // Untreated intercepts are set so that the mixed mean just below the
  // threshold (untreated + 20% early enrollees carrying the effect) equals
  // q_pre = 0.9 and p_pre = 66.
  p.oop.complier_jump = 232.0;
  p.oop.below = {66.0 - 232.0 * p.p_below, 0.6};
  p.oop.above = p.oop.below;
  p.oop.noise = NoiseKind::lognormal;
  p.oop.noise_sd = 0.25;
  p.adherence.complier_jump = -0.063;
  p.adherence.below = {0.9 + 0.063 * p.p_below, 0.001};
  p.adherence.above = p.adherence.below;
  p.adherence.noise = NoiseKind::normal;
  p.adherence.noise_sd = 0.05;
  p.covariates = default_covariates();
  return p;
}

SimulatedCohort simulate(const CohortParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::vector<double> weights = params.age_weights;
  if (weights.empty())
    weights.assign(static_cast<std::size_t>(params.age_hi - params.age_lo + 1),
                   1.0);
  std::discrete_distribution<int> age_dist(weights.begin(), weights.end());
  std::normal_distribution<double> std_normal;
  const double c = params.threshold;

  const double oop_cv = params.oop.noise_sd;
  const double log_sd = std::sqrt(std::log1p(oop_cv * oop_cv));

  SimulatedCohort out;
  Cohort& cohort = out.cohort;
  cohort.threshold = params.threshold;
  cohort.provenance.source = "simulated(seed=" + std::to_string(params.seed) + ")";
  for (const auto& cov : params.covariates) cohort.covariate_names.push_back(cov.name);
  cohort.observations.reserve(params.n);

  for (std::size_t i = 0; i < params.n; ++i) {
    Observation obs;
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", i + 1);
    obs.id = id;
    obs.age = params.age_lo + age_dist(rng);
    const double x = obs.age - c;
    const bool above = obs.age > params.threshold;
    const double p = obs.age < params.threshold ? params.p_below
                     : above ? params.p_above
                             : 0.5 * (params.p_below + params.p_above);
    obs.treated = std::bernoulli_distribution(p)(rng);

    double adh = params.adherence.mean(x, above, obs.treated);
    const double adh_noise = std_normal(rng);
    if (params.adherence.noise == NoiseKind::normal) {
      adh += params.adherence.noise_sd * adh_noise;
    } else {
      adh *= std::exp(std::sqrt(std::log1p(params.adherence.noise_sd *
                                           params.adherence.noise_sd)) *
                          adh_noise -
                      0.5 * std::log1p(params.adherence.noise_sd *
                                       params.adherence.noise_sd));
    }
    if (adh < 0.0 || adh > 1.0) {
      ++out.clamps.adherence_clamped;
      adh = std::clamp(adh, 0.0, 1.0);
    }
    obs.adherence = adh;

    double oop = params.oop.mean(x, above, obs.treated);
    const double oop_noise = std_normal(rng);
    if (params.oop.noise == NoiseKind::normal) {
      oop += params.oop.noise_sd * oop_noise;
    } else {
      oop *= std::exp(log_sd * oop_noise - 0.5 * log_sd * log_sd);
    }
    if (oop < 0.0) {
      ++out.clamps.oop_clamped;
      oop = 0.0;
    }
    obs.oop = oop;

    for (const auto& cov : params.covariates)
      obs.covariates.emplace(cov.name, draw_covariate(cov, x, above, rng));
    cohort.observations.push_back(std::move(obs));
  }
  out.clamps.draws = params.n;
  cohort.provenance.loaded = params.n;
  if (2 * out.clamps.adherence_clamped > params.n ||
      2 * out.clamps.oop_clamped > params.n)
    throw Error(ErrorKind::calibration,
                "more than half of the outcome draws were clamped");
  return out;
}

Cohort simulate_cohort(const CohortParams& params) {
  return simulate(params).cohort;
}

TrueEstimands true_estimands(const CohortParams& params) {
  TrueEstimands t;
  t.first_stage = params.p_above - params.p_below;
  t.complier_oop = params.oop.complier_jump;
  t.complier_adherence = params.adherence.complier_jump;
  t.itt_oop = t.complier_oop * t.first_stage;
  t.itt_adherence = t.complier_adherence * t.first_stage;
  t.q_pre = params.adherence.mean(0.0, false, false) +
            t.complier_adherence * params.p_below;
  t.p_pre = params.oop.mean(0.0, false, false) +
            t.complier_oop * params.p_below;
  if (t.complier_adherence == 0.0) {
    t.ped = 0.0;
  } else if (t.complier_oop == 0.0 || !(t.q_pre > 0.0) || !(t.p_pre > 0.0)) {
    t.ped = std::numeric_limits<double>::quiet_NaN();
  } else {
    t.ped = (t.complier_adherence / t.q_pre) / (t.complier_oop / t.p_pre);
  }
  return t;
}

const EstimandSummary& McSummary::row(std::string_view name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw Error(ErrorKind::config, "no estimand named " + std::string(name));
}

namespace {

struct Draw {
  double estimate = 0.0;
  double se = 0.0;
  Interval conventional;
  Interval honest;
};

enum Estimand { kFirstStage, kIttOop, kIttAdh, kFuzzyOop, kFuzzyAdh, kCount };
constexpr const char* kNames[kCount] = {"first_stage", "itt_oop",
                                        "itt_adherence", "fuzzy_oop",
                                        "fuzzy_adherence"};

struct Replication {
  std::optional<Draw> draws[kCount];
  double clamp_fraction = 0.0;
};

Draw sharp_draw(const RdFit& fit, double alpha) {
  return {fit.jump, fit.se, fit.conventional_ci(alpha),
          fit.honest->interval()};
}

Draw fuzzy_draw(const FuzzyResult& r) {
  return {r.wald, r.se, r.conventional_ci, *r.honest_ci};
}

Replication run_replication(const CohortParams& params, const McSpecs& specs,
                            std::uint64_t seed) {
  CohortParams p = params;
  p.seed = seed;
  Replication rep;
  const SimulatedCohort sim = simulate(p);
  rep.clamp_fraction = sim.clamps.adherence_fraction();
  const Cohort& cohort = sim.cohort;
  const HonestSettings& hs = specs.honest;
  const int c = cohort.threshold;

  std::optional<RdFit> fs, rf_oop, rf_adh;
  try {
    RdFit f = first_stage(cohort, specs.stage, specs.weak_floor);
    attach_honest(f, estimate_m(cohort, "treated", hs.scale_factor, c,
                                hs.interpretation),
                  hs.alpha);
    fs = std::move(f);
    rep.draws[kFirstStage] = sharp_draw(*fs, hs.alpha);
  } catch (const Error&) {
  }
  try {
    rf_oop = sharp_rd(cohort, specs.oop,
                      estimate_m(cohort, specs.oop.outcome_key,
                                 hs.scale_factor, c, hs.interpretation),
                      hs.alpha);
    rep.draws[kIttOop] = sharp_draw(*rf_oop, hs.alpha);
  } catch (const Error&) {
  }
  try {
    rf_adh = sharp_rd(cohort, specs.adherence,
                      estimate_m(cohort, specs.adherence.outcome_key,
                                 hs.scale_factor, c, hs.interpretation),
                      hs.alpha);
    rep.draws[kIttAdh] = sharp_draw(*rf_adh, hs.alpha);
  } catch (const Error&) {
  }
  const FuzzyOptions opts{specs.weak_floor, hs.alpha};
  if (fs && rf_oop) {
    try {
      rep.draws[kFuzzyOop] = fuzzy_draw(fuzzy_from_fits(*rf_oop, *fs, opts));
    } catch (const Error&) {
    }
  }
  if (fs && rf_adh) {
    try {
      rep.draws[kFuzzyAdh] = fuzzy_draw(fuzzy_from_fits(*rf_adh, *fs, opts));
    } catch (const Error&) {
    }
  }
  return rep;
}

bool covers(const Interval& ci, double truth) {
  // Slack for rounding in noiseless designs, where the interval collapses to
  // a point that reproduces the truth only up to floating-point error.
  const double tol = 1e-9 * (1.0 + std::abs(truth));
  return ci.lower - tol <= truth && truth <= ci.upper + tol;
}

}  // namespace

McSummary monte_carlo(const CohortParams& params, const McSpecs& specs,
                      std::size_t replications, std::uint64_t seed,
                      Execution exec) {
  params.validate();
  if (replications < 100)
    throw Error(ErrorKind::config, "monte_carlo needs at least 100 replications");
  std::vector<Replication> reps(replications);
  for_each_index(replications, exec, [&](std::size_t r) {
    try {
      reps[r] = run_replication(params, specs, stream_seed(seed, r));
    } catch (const Error&) {
      reps[r] = Replication{};  // simulation itself failed: every estimand fails
    }
  });

  const TrueEstimands truth = true_estimands(params);
  const double truths[kCount] = {truth.first_stage, truth.itt_oop,
                                 truth.itt_adherence, truth.complier_oop,
                                 truth.complier_adherence};
  McSummary summary;
  summary.replications = replications;
  summary.seed = seed;
  for (const auto& rep : reps) summary.mean_adherence_clamp_fraction += rep.clamp_fraction;
  summary.mean_adherence_clamp_fraction /= static_cast<double>(replications);

  for (int k = 0; k < kCount; ++k) {
    EstimandSummary row;
    row.name = kNames[k];
    row.truth = truths[k];
    double sum = 0.0, sum_se = 0.0, conv = 0.0, hon = 0.0;
    for (const auto& rep : reps) {
      const auto& d = rep.draws[k];
      if (!d) {
        ++row.n_failed;
        continue;
      }
      ++row.n_ok;
      sum += d->estimate;
      sum_se += d->se;
      conv += covers(d->conventional, row.truth) ? 1.0 : 0.0;
      hon += covers(d->honest, row.truth) ? 1.0 : 0.0;
    }
    if (row.n_ok > 0) {
      const double n = static_cast<double>(row.n_ok);
      row.mean = sum / n;
      row.mean_bias = row.mean - row.truth;
      row.mean_se = sum_se / n;
      row.conventional_coverage = conv / n;
      row.honest_coverage = hon / n;
      double ss = 0.0;
      for (const auto& rep : reps)
        if (rep.draws[k]) ss += std::pow(rep.draws[k]->estimate - row.mean, 2);
      row.empirical_se = row.n_ok > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    summary.rows.push_back(row);
  }
  return summary;
}

}  // namespace donutrd
