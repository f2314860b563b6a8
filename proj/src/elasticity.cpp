#include "donutrd/elasticity.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace donutrd {

std::string_view to_string(BaselineMode mode) {
  return mode == BaselineMode::boundary ? "boundary" : "window";
}

BaselineMode parse_baseline_mode(std::string_view text) {
  if (text == "boundary") return BaselineMode::boundary;
  if (text == "window") return BaselineMode::window;
  throw Error(ErrorKind::config,
              "unknown baseline mode '" + std::string(text) + "'");
}

RdSpec default_spec(std::string_view outcome_key, int threshold) {
  RdSpec spec;
  spec.threshold = threshold;
  spec.outcome_key = std::string(outcome_key);
  spec.order = outcome_key == "oop" ? 1 : 2;
  return spec;
}

namespace {

void check_baselines(const Baselines& b) {
  if (!(b.q_pre > 0.0) || !(b.p_pre > 0.0)) {
    std::ostringstream msg;
    msg << "baselines must be positive (q_pre " << b.q_pre << ", p_pre "
        << b.p_pre << ")";
    throw Error(ErrorKind::degenerate_baseline, msg.str());
  }
}

bool in_window(int age, const RdSpec& spec, int window) {
  return age < spec.threshold && age >= spec.threshold - window &&
         !in_donut(age, spec.threshold, spec.donut_radius);
}

double window_mean(const Cohort& cohort, const RdSpec& spec, int window) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& obs : cohort.observations) {
    if (!in_window(obs.age, spec, window)) continue;
    auto y = outcome_value(obs, spec.outcome_key);
    if (!y) continue;
    sum += *y;
    ++n;
  }
  if (n == 0)
    throw Error(ErrorKind::empty_side,
                "no observations in the baseline window for " +
                    spec.outcome_key);
  return sum / static_cast<double>(n);
}

double below_boundary(const Cohort& cohort, const RdSpec& spec) {
  spec.validate();
  const SplitSides sides = split_sides(cohort, spec);
  return fit_boundary(sides.below, spec, Side::below).boundary_value;
}

// Columns of the cohort needed by the grouped kernel, with ages mapped to
// dense cell indices.
struct GroupedCohort {
  int min_age = 0;
  std::size_t span = 0;
  std::vector<std::size_t> cell;
  std::vector<double> oop, adherence, treated;

  explicit GroupedCohort(const Cohort& cohort) {
    int lo = cohort.observations.front().age;
    int hi = lo;
    for (const auto& obs : cohort.observations) {
      lo = std::min(lo, obs.age);
      hi = std::max(hi, obs.age);
    }
    min_age = lo;
    span = static_cast<std::size_t>(hi - lo + 1);
    const std::size_t n = cohort.size();
    cell.resize(n);
    oop.resize(n);
    adherence.resize(n);
    treated.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& obs = cohort.observations[i];
      cell[i] = static_cast<std::size_t>(obs.age - lo);
      oop[i] = obs.oop;
      adherence[i] = obs.adherence;
      treated[i] = obs.treated ? 1.0 : 0.0;
    }
  }
};

double value_for(std::string_view key, const GroupedCohort& g, std::size_t i) {
  if (key == "oop") return g.oop[i];
  if (key == "adherence") return g.adherence[i];
  if (key == "treated" || key == "enrollment") return g.treated[i];
  throw Error(ErrorKind::config,
              "elasticity specs must model oop, adherence and treated");
}

struct ReplicateCells {
  std::vector<AgeCell> oop, adherence, stage;
};

double grouped_jump(const std::vector<AgeCell>& cells, const RdSpec& spec,
                    double* below_out) {
  const double b = fit_grouped_boundary(cells, spec, Side::below);
  const double a = fit_grouped_boundary(cells, spec, Side::above);
  if (below_out) *below_out = b;
  return a - b;
}

double grouped_window_mean(const std::vector<AgeCell>& cells,
                           const RdSpec& spec, int window) {
  double sum = 0.0, n = 0.0;
  for (const auto& c : cells) {
    if (c.count <= 0.0 || !in_window(c.age, spec, window)) continue;
    sum += c.sum;
    n += c.count;
  }
  if (n == 0.0)
    throw Error(ErrorKind::empty_side, "empty baseline window");
  return sum / n;
}

double grouped_replicate(const GroupedCohort& g, const PedSpecs& specs,
                         std::uint64_t seed, std::size_t r) {
  const std::size_t n = g.cell.size();
  std::mt19937_64 rng(stream_seed(seed, r));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::vector<double> count(g.span, 0.0);
  std::vector<double> s_oop(g.span, 0.0), s_adh(g.span, 0.0),
      s_stage(g.span, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = pick(rng);
    const std::size_t a = g.cell[i];
    count[a] += 1.0;
    s_oop[a] += value_for(specs.oop.outcome_key, g, i);
    s_adh[a] += value_for(specs.adherence.outcome_key, g, i);
    s_stage[a] += value_for(specs.stage.outcome_key, g, i);
  }
  ReplicateCells cells;
  for (std::size_t a = 0; a < g.span; ++a) {
    if (count[a] == 0.0) continue;
    const int age = g.min_age + static_cast<int>(a);
    cells.oop.push_back({age, count[a], s_oop[a]});
    cells.adherence.push_back({age, count[a], s_adh[a]});
    cells.stage.push_back({age, count[a], s_stage[a]});
  }

  const double fs = grouped_jump(cells.stage, specs.stage, nullptr);
  if (!(fs > specs.weak_floor))
    throw Error(ErrorKind::weak_instrument, "weak first stage in replicate");
  double oop_below = 0.0, adh_below = 0.0;
  const double delta_p = grouped_jump(cells.oop, specs.oop, &oop_below) / fs;
  const double delta_q =
      grouped_jump(cells.adherence, specs.adherence, &adh_below) / fs;
  Baselines b{adh_below, oop_below};
  if (specs.baseline_mode == BaselineMode::window) {
    b.q_pre = grouped_window_mean(cells.adherence, specs.adherence,
                                  specs.window);
    b.p_pre = grouped_window_mean(cells.oop, specs.oop, specs.window);
  }
  check_baselines(b);
  return compute_ped(delta_q, b.q_pre, delta_p, b.p_pre);
}

Cohort slim_copy(const Cohort& cohort) {
  Cohort out;
  out.threshold = cohort.threshold;
  out.provenance = cohort.provenance;
  out.observations.reserve(cohort.size());
  for (const auto& obs : cohort.observations)
    out.observations.push_back(
        {obs.id, obs.age, obs.treated, obs.oop, obs.adherence, {}});
  return out;
}

double reference_replicate(const Cohort& slim, const PedSpecs& specs,
                           std::uint64_t seed, std::size_t r) {
  const std::size_t n = slim.size();
  std::mt19937_64 rng(stream_seed(seed, r));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  Cohort resample;
  resample.threshold = slim.threshold;
  resample.observations.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    resample.observations.push_back(slim.observations[pick(rng)]);
  return ped_point(resample, specs).ped;
}

PedResult summarize(const PedPoint& point,
                    const std::vector<std::optional<double>>& draws,
                    const PedSpecs& specs, std::uint64_t seed) {
  PedResult out;
  out.ped = point.ped;
  out.q_pre = point.q_pre;
  out.p_pre = point.p_pre;
  out.delta_q = point.delta_q;
  out.delta_p = point.delta_p;
  out.replicates = static_cast<int>(draws.size());
  out.seed = seed;
  out.alpha = specs.alpha;
  out.baseline_mode = specs.baseline_mode;
  std::vector<double> ok;
  ok.reserve(draws.size());
  for (const auto& d : draws)
    if (d) ok.push_back(*d);
  out.failed_replicates = static_cast<int>(draws.size() - ok.size());
  if (out.failed_replicates >
      kMaxFailedReplicateShare * static_cast<double>(draws.size())) {
    std::ostringstream msg;
    msg << out.failed_replicates << " of " << draws.size()
        << " bootstrap replicates failed";
    throw Error(ErrorKind::unstable_bootstrap, msg.str());
  }
  std::sort(ok.begin(), ok.end());
  out.ci = {sorted_quantile(ok, specs.alpha / 2.0),
            sorted_quantile(ok, 1.0 - specs.alpha / 2.0)};
  return out;
}

void check_replicates(int replicates) {
  if (replicates < kMinBootstrapReplicates)
    throw Error(ErrorKind::config,
                "bootstrap needs at least " +
                    std::to_string(kMinBootstrapReplicates) + " replicates");
}

}  // namespace

Baselines baselines(const Cohort& cohort, const PedSpecs& specs) {
  Baselines b;
  if (specs.baseline_mode == BaselineMode::boundary) {
    b.q_pre = below_boundary(cohort, specs.adherence);
    b.p_pre = below_boundary(cohort, specs.oop);
  } else {
    b.q_pre = window_mean(cohort, specs.adherence, specs.window);
    b.p_pre = window_mean(cohort, specs.oop, specs.window);
  }
  check_baselines(b);
  return b;
}

double compute_ped(double delta_q, double q_pre, double delta_p,
                   double p_pre) {
  if (!(q_pre > 0.0) || !(p_pre > 0.0))
    throw Error(ErrorKind::degenerate_baseline, "baselines must be positive");
  if (delta_p == 0.0)
    throw Error(ErrorKind::undefined_elasticity,
                "price change is zero; elasticity undefined");
  return (delta_q / q_pre) / (delta_p / p_pre);
}

PedPoint ped_point(const Cohort& cohort, const PedSpecs& specs) {
  const FuzzyOptions opts{specs.weak_floor, specs.alpha};
  const FuzzyResult price = fuzzy_rd(cohort, specs.oop, specs.stage, opts);
  const FuzzyResult quantity =
      fuzzy_rd(cohort, specs.adherence, specs.stage, opts);
  Baselines b;
  if (specs.baseline_mode == BaselineMode::boundary) {
    b = {quantity.reduced_form.below.boundary_value,
         price.reduced_form.below.boundary_value};
    check_baselines(b);
  } else {
    b = baselines(cohort, specs);
  }
  PedPoint p;
  p.q_pre = b.q_pre;
  p.p_pre = b.p_pre;
  p.delta_q = quantity.wald;
  p.delta_p = price.wald;
  p.ped = compute_ped(p.delta_q, p.q_pre, p.delta_p, p.p_pre);
  return p;
}

std::vector<std::optional<double>> bootstrap_draws(
    const Cohort& cohort, const PedSpecs& specs, int replicates,
    std::uint64_t seed, BootstrapPath path, Execution exec) {
  if (cohort.observations.empty())
    throw Error(ErrorKind::empty_cohort, "cannot bootstrap an empty cohort");
  if (replicates < 0) throw Error(ErrorKind::config, "negative replicates");
  for (const RdSpec* spec : {&specs.oop, &specs.adherence, &specs.stage})
    spec->validate();
  std::vector<std::optional<double>> draws(
      static_cast<std::size_t>(replicates));
  if (path == BootstrapPath::grouped) {
    const GroupedCohort g(cohort);
    for_each_index(draws.size(), exec, [&](std::size_t r) {
      try {
        draws[r] = grouped_replicate(g, specs, seed, r);
      } catch (const Error&) {
        draws[r].reset();
      }
    });
  } else {
    const Cohort slim = slim_copy(cohort);
    for_each_index(draws.size(), exec, [&](std::size_t r) {
      try {
        draws[r] = reference_replicate(slim, specs, seed, r);
      } catch (const Error&) {
        draws[r].reset();
      }
    });
  }
  return draws;
}

PedResult bootstrap_ped(const Cohort& cohort, const PedSpecs& specs,
                        int replicates, std::uint64_t seed, Execution exec) {
  check_replicates(replicates);
  const PedPoint point = ped_point(cohort, specs);
  const auto draws = bootstrap_draws(cohort, specs, replicates, seed,
                                     BootstrapPath::grouped, exec);
  return summarize(point, draws, specs, seed);
}

PedResult bootstrap_ped_reference(const Cohort& cohort, const PedSpecs& specs,
                                  int replicates, std::uint64_t seed) {
  check_replicates(replicates);
  const PedPoint point = ped_point(cohort, specs);
  const auto draws = bootstrap_draws(cohort, specs, replicates, seed,
                                     BootstrapPath::reference,
                                     Execution::serial);
  return summarize(point, draws, specs, seed);
}

double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty())
    throw Error(ErrorKind::unstable_bootstrap, "no successful replicates");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace donutrd
