#include "donutrd/app/report.hpp"

#include <cmath>

namespace donutrd::app {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const RdSpec& spec) {
  return Json{{"outcome", spec.outcome_key},
              {"threshold", spec.threshold},
              {"donut_radius", spec.donut_radius},
              {"bandwidth", number(spec.bandwidth)},
              {"kernel", std::string(to_string(spec.kernel))},
              {"order", spec.order},
              {"scope", std::string(to_string(spec.scope))}};
}

Json to_json(const Interval& ci) {
  return Json::array({number(ci.lower), number(ci.upper)});
}

Json to_json(const HonestCI& ci) {
  return Json{{"m", number(ci.m)},
              {"scale_factor", number(ci.scale_factor)},
              {"worst_case_bias", number(ci.worst_case_bias)},
              {"t_ratio", number(ci.t_ratio)},
              {"critical_value", number(ci.critical_value)},
              {"alpha", number(ci.alpha)},
              {"honest_ci", to_json(ci.interval())}};
}

Json to_json(const RdFit& fit, double alpha) {
  Json j{{"estimate", number(fit.jump)},
         {"se", number(fit.se)},
         {"conventional_ci", to_json(fit.conventional_ci(alpha))},
         {"honest_ci", fit.honest ? to_json(fit.honest->interval()) : Json(nullptr)},
         {"n_below", fit.n_below()},
         {"n_above", fit.n_above()},
         {"boundary_below", number(fit.below.boundary_value)},
         {"boundary_above", number(fit.above.boundary_value)},
         {"spec", to_json(fit.spec_used)}};
  j["honest"] = fit.honest ? to_json(*fit.honest) : Json(nullptr);
  j["warnings"] = fit.warnings;
  return j;
}

Json to_json(const FuzzyResult& r) {
  const double alpha = r.delta_honest ? r.delta_honest->alpha : 0.05;
  return Json{{"estimate", number(r.wald)},
              {"se", number(r.se)},
              {"conventional_ci", to_json(r.conventional_ci)},
              {"honest_ci", r.honest_ci ? to_json(*r.honest_ci) : Json(nullptr)},
              {"delta_honest", r.delta_honest ? to_json(*r.delta_honest) : Json(nullptr)},
              {"reduced_form", to_json(r.reduced_form, alpha)},
              {"first_stage", number(r.first_stage.jump)}};
}

Json to_json(const PedResult& r) {
  return Json{{"ped", number(r.ped)},
              {"ci", to_json(r.ci)},
              {"q_pre", number(r.q_pre)},
              {"p_pre", number(r.p_pre)},
              {"delta_q", number(r.delta_q)},
              {"delta_p", number(r.delta_p)},
              {"replicates", r.replicates},
              {"failed_replicates", r.failed_replicates},
              {"seed", r.seed},
              {"alpha", number(r.alpha)},
              {"baseline_mode", std::string(to_string(r.baseline_mode))}};
}

Json to_json(const TrueEstimands& t) {
  return Json{{"first_stage", number(t.first_stage)},
              {"itt_oop", number(t.itt_oop)},
              {"itt_adherence", number(t.itt_adherence)},
              {"complier_oop", number(t.complier_oop)},
              {"complier_adherence", number(t.complier_adherence)},
              {"q_pre", number(t.q_pre)},
              {"p_pre", number(t.p_pre)},
              {"ped", number(t.ped)}};
}

Json to_json(const McSummary& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows)
    rows.push_back(Json{{"estimand", r.name},
                        {"truth", number(r.truth)},
                        {"mean", number(r.mean)},
                        {"mean_bias", number(r.mean_bias)},
                        {"empirical_se", number(r.empirical_se)},
                        {"mean_se", number(r.mean_se)},
                        {"conventional_coverage", number(r.conventional_coverage)},
                        {"honest_coverage", number(r.honest_coverage)},
                        {"n_ok", r.n_ok},
                        {"n_failed", r.n_failed}});
  return Json{{"replications", s.replications},
              {"seed", s.seed},
              {"mean_adherence_clamp_fraction", number(s.mean_adherence_clamp_fraction)},
              {"rows", rows}};
}

Json to_json(const Provenance& p, const Cohort& cohort) {
  std::size_t below = 0, above = 0, at = 0;
  for (const auto& o : cohort.observations) {
    if (o.age < cohort.threshold) ++below;
    else if (o.age > cohort.threshold) ++above;
    else ++at;
  }
  return Json{{"source", p.source},
              {"rows", cohort.size()},
              {"rejected", p.rejected},
              {"below", below},
              {"at_threshold", at},
              {"above", above},
              {"covariates", cohort.covariate_names}};
}

Json to_json(const Error& e) {
  return Json{{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
}

Json config_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["threshold"] = cfg.threshold;
  if (cfg.input) {
    j["input"] = Json{{"path", cfg.input->generic_string()},
                      {"columns", Json{{"id", cfg.schema.id},
                                       {"age", cfg.schema.age},
                                       {"treated", cfg.schema.treated},
                                       {"oop", cfg.schema.oop},
                                       {"adherence", cfg.schema.adherence}}}};
  } else {
    const CohortParams& p = *cfg.simulation;
    auto outcome = [](const OutcomeModel& m) {
      return Json{{"below", m.below},
                  {"above", m.above},
                  {"complier_jump", number(m.complier_jump)},
                  {"noise_sd", number(m.noise_sd)},
                  {"noise", m.noise == NoiseKind::normal ? "normal" : "lognormal"}};
    };
    j["simulation"] = Json{{"n", p.n},
                           {"age_lo", p.age_lo},
                           {"age_hi", p.age_hi},
                           {"p_below", number(p.p_below)},
                           {"p_above", number(p.p_above)},
                           {"seed", p.seed},
                           {"oop", outcome(p.oop)},
                           {"adherence", outcome(p.adherence)}};
  }
  j["spec"] = Json{{"oop", to_json(cfg.oop)},
                   {"adherence", to_json(cfg.adherence)},
                   {"enrollment", to_json(cfg.enrollment)}};
  j["honest"] = Json{{"scale_factor", number(cfg.honest.scale_factor)},
                     {"alpha", number(cfg.honest.alpha)},
                     {"m_interpretation", std::string(to_string(cfg.honest.interpretation))}};
  j["elasticity"] = Json{{"baseline_mode", std::string(to_string(cfg.baseline_mode))},
                         {"window", cfg.baseline_window},
                         {"replicates", cfg.replicates},
                         {"weak_floor", number(cfg.weak_floor)}};
  j["diagnostics"] = Json{{"placebo_thresholds", cfg.placebo_thresholds},
                          {"bandwidths", cfg.bandwidths},
                          {"balance_covariates", cfg.balance_covariates}};
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace donutrd::app
