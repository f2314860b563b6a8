#include "donutrd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace donutrd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Cohort filtered(const Cohort& cohort, auto&& keep) {
  Cohort out;
  out.threshold = cohort.threshold;
  out.provenance = cohort.provenance;
  out.covariate_names = cohort.covariate_names;
  for (const auto& obs : cohort.observations)
    if (keep(obs)) out.observations.push_back(obs);
  return out;
}

RdFit honest_fit(const Cohort& cohort, const RdSpec& spec,
                 const HonestSettings& honest) {
  const SmoothnessBound bound =
      estimate_m(cohort, spec.outcome_key, honest.scale_factor,
                 spec.threshold, honest.interpretation);
  return sharp_rd(cohort, spec, bound, honest.alpha);
}

double polyval(const std::vector<double>& coef, double x) {
  double acc = 0.0;
  for (auto it = coef.rbegin(); it != coef.rend(); ++it) acc = acc * x + *it;
  return acc;
}

}  // namespace

std::vector<int> default_placebo_thresholds() {
  return {55, 57, 59, 61, 63, 67, 69, 71, 73, 75};
}

std::vector<double> default_bandwidths() {
  std::vector<double> out;
  for (int h = 5; h <= 15; ++h) out.push_back(h);
  return out;
}

std::vector<PlaceboResult> placebo_scan(const Cohort& cohort,
                                        const RdSpec& spec,
                                        std::span<const int> thresholds,
                                        const HonestSettings& honest,
                                        const PlaceboOptions& options,
                                        Execution exec) {
  const int true_c = cohort.threshold;
  std::vector<PlaceboResult> out(thresholds.size());
  for_each_index(thresholds.size(), exec, [&](std::size_t k) {
    const int t = thresholds[k];
    PlaceboResult& res = out[k];
    res.threshold_tested = t;
    RdSpec s = spec;
    s.threshold = t;
    try {
      if (t == true_c) {
        res.fit = honest_fit(cohort, s, honest);
      } else {
        const Cohort window = filtered(cohort, [&](const Observation& obs) {
          if (options.exclude_true_donut &&
              in_donut(obs.age, true_c, spec.donut_radius))
            return false;
          if (options.same_side_only)
            return t < true_c ? obs.age < true_c : obs.age > true_c;
          return true;
        });
        res.fit = honest_fit(window, s, honest);
      }
      res.significant = res.fit->honest->interval().excludes_zero();
    } catch (const Error& e) {
      res.error = e.what();
    }
  });
  return out;
}

std::vector<SweepResult> bandwidth_sweep(const Cohort& cohort,
                                         const RdSpec& spec,
                                         std::span<const double> bandwidths,
                                         const HonestSettings& honest,
                                         Execution exec) {
  for (double h : bandwidths)
    if (!(h > spec.donut_radius))
      throw Error(ErrorKind::config, "every bandwidth must exceed the donut");
  std::vector<SweepResult> out(bandwidths.size());
  const SmoothnessBound bound =
      estimate_m(cohort, spec.outcome_key, honest.scale_factor,
                 spec.threshold, honest.interpretation);
  for_each_index(bandwidths.size(), exec, [&](std::size_t k) {
    out[k].bandwidth = bandwidths[k];
    RdSpec s = spec;
    s.bandwidth = bandwidths[k];
    try {
      out[k].fit = sharp_rd(cohort, s, bound, honest.alpha);
    } catch (const Error& e) {
      out[k].error = e.what();
    }
  });
  return out;
}

BalanceReport covariate_balance(const Cohort& cohort, const RdSpec& spec,
                                std::span<const std::string> covariate_keys,
                                const HonestSettings& honest,
                                Execution exec) {
  BalanceReport report;
  report.results.resize(covariate_keys.size());
  for_each_index(covariate_keys.size(), exec, [&](std::size_t k) {
    BalanceResult& res = report.results[k];
    res.covariate = covariate_keys[k];
    const Cohort present = filtered(cohort, [&](const Observation& obs) {
      return obs.covariates.count(res.covariate) > 0;
    });
    res.n_missing = cohort.size() - present.size();
    if (static_cast<double>(present.size()) <
        kMinCovariateCoverage * static_cast<double>(cohort.size())) {
      res.error = "covariate " + res.covariate + " is missing on " +
                  std::to_string(res.n_missing) + " of " +
                  std::to_string(cohort.size()) + " rows";
      return;
    }
    RdSpec s = spec;
    s.outcome_key = res.covariate;
    try {
      res.fit = honest_fit(present, s, honest);
      res.significant = res.fit->honest->interval().excludes_zero();
    } catch (const Error& e) {
      res.error = e.what();
    }
  });
  for (const auto& r : report.results)
    if (r.significant) report.flagged.push_back(r.covariate);
  return report;
}

std::vector<TrendRow> global_trend(const Cohort& cohort,
                                   std::string_view outcome_key, int age_lo,
                                   int age_hi) {
  const int c = cohort.threshold;
  const SmoothnessBound fits = estimate_m(cohort, outcome_key, 1.0, c);
  const std::vector<double> below(fits.below_coefficients.begin(),
                                  fits.below_coefficients.end());
  const std::vector<double> above(fits.above_coefficients.begin(),
                                  fits.above_coefficients.end());
  std::map<int, std::pair<double, std::size_t>> by_age;
  for (const auto& obs : cohort.observations) {
    if (obs.age < age_lo || obs.age > age_hi) continue;
    auto y = outcome_value(obs, outcome_key);
    if (!y) continue;
    auto& cell = by_age[obs.age];
    cell.first += *y;
    ++cell.second;
  }
  std::vector<TrendRow> rows;
  for (const auto& [age, cell] : by_age) {
    TrendRow row;
    row.age = age;
    row.count = cell.second;
    row.mean = cell.first / static_cast<double>(cell.second);
    const double x = age - c;
    row.fitted = age < c ? polyval(below, x) : age > c ? polyval(above, x) : kNaN;
    rows.push_back(row);
  }
  return rows;
}

std::vector<PlotRow> rd_plot_rows(const Cohort& cohort, const RdFit& fit,
                                  double alpha) {
  const RdSpec& spec = fit.spec_used;
  const int c = spec.threshold;
  const std::string key = spec.outcome_key;
  std::vector<PlotRow> rows;

  std::map<int, std::pair<double, std::size_t>> by_age;
  for (const auto& obs : cohort.observations) {
    if (spec.scope == Scope::local && std::abs(obs.age - c) > spec.bandwidth)
      continue;
    auto y = outcome_value(obs, key);
    if (!y) continue;
    auto& cell = by_age[obs.age];
    cell.first += *y;
    ++cell.second;
  }
  for (const auto& [age, cell] : by_age)
    rows.push_back({key + ".mean", static_cast<double>(age),
                    cell.first / static_cast<double>(cell.second), kNaN, kNaN});

  const double z = normal_two_sided_quantile(alpha);
  for (const SideFit* side : {&fit.below, &fit.above}) {
    const bool below = side->side == Side::below;
    const std::string name = key + ".fit_" + std::string(to_string(side->side));
    int nearest = below ? c - spec.donut_radius - 1 : c + spec.donut_radius + 1;
    int farthest = nearest;
    for (const auto& w : side->effective_weights) {
      const int age = c + static_cast<int>(std::lround(w.centered_age));
      farthest = below ? std::min(farthest, age) : std::max(farthest, age);
    }
    const int lo = below ? farthest : nearest;
    const int hi = below ? nearest : farthest;
    for (int age = lo; age <= hi; ++age)
      rows.push_back({name, static_cast<double>(age),
                      polyval(side->coefficients, age - c), kNaN, kNaN});
    const int step = below ? 1 : -1;
    for (int age = nearest; age != c + step; age += step)
      rows.push_back({name + ".extrapolated", static_cast<double>(age),
                      polyval(side->coefficients, age - c), kNaN, kNaN});
    rows.push_back({key + ".boundary_" + std::string(to_string(side->side)),
                    static_cast<double>(c), side->boundary_value,
                    side->boundary_value - z * side->se,
                    side->boundary_value + z * side->se});
  }
  const Interval ci =
      fit.honest ? fit.honest->interval() : fit.conventional_ci(alpha);
  rows.push_back({key + ".jump", static_cast<double>(c), fit.jump, ci.lower,
                  ci.upper});
  return rows;
}

std::string format_plot_csv(std::span<const PlotRow> rows) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  std::string out = "series,x,y,lower,upper\n";
  for (const auto& r : rows) {
    out += r.series + ',' + cell(r.x) + ',' + cell(r.y) + ',' + cell(r.lower) +
           ',' + cell(r.upper) + '\n';
  }
  return out;
}

void write_plot_csv(const std::filesystem::path& path,
                    std::span<const PlotRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << format_plot_csv(rows);
}

}  // namespace donutrd
