#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "donutrd/estimators.hpp"
#include "donutrd/synth.hpp"
#include "helpers.hpp"

using namespace donutrd;

namespace {

SideFit side_at(Side side, double value, double se = 0.0) {
  SideFit s;
  s.side = side;
  s.boundary_value = value;
  s.se = se;
  return s;
}

RdFit injected(double below, double above, double se = 0.0) {
  return rd_from_sides(side_at(Side::below, below, se / std::sqrt(2.0)),
                       side_at(Side::above, above, se / std::sqrt(2.0)),
                       RdSpec{});
}

Cohort noisy(std::uint64_t seed, double jump) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 5.0);
  Cohort c = testing::oop_cohort(50, 80, 4, [](int) { return 0.0; });
  for (auto& obs : c.observations) {
    const double x = obs.age - 65.0;
    obs.oop = 40.0 + 0.8 * x + 0.02 * x * x + (obs.age > 65 ? jump : 0.0) +
              noise(rng);
    obs.adherence = std::clamp(0.8 + 0.002 * x + 0.05 * noise(rng) / 5.0, 0.0, 1.0);
    obs.treated = std::bernoulli_distribution(obs.age > 65 ? 0.8 : 0.2)(rng);
  }
  return c;
}

}  // namespace

TEST_CASE("constant sides") {
  const Cohort c = testing::oop_cohort(50, 80, 2, [](int a) { return a < 65 ? 1.0 : 3.0; });
  const RdFit fit = sharp_rd(c, RdSpec{});
  CHECK(fit.jump == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.se == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
}

TEST_CASE("lines with a common slope") {
  const Cohort c = testing::oop_cohort(50, 80, 1, [](int a) {
    return (a < 65 ? 2.0 : 4.0) + 0.1 * (a - 65);
  });
  for (int order : {1, 2, 3}) {
    RdSpec spec;
    spec.order = order;
    CHECK(sharp_rd(c, spec).jump == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("jump and se combine the two sides") {
  const Cohort c = noisy(3, 10.0);
  const RdFit fit = sharp_rd(c, RdSpec{});
  CHECK(fit.jump == fit.above.boundary_value - fit.below.boundary_value);
  CHECK(fit.se == doctest::Approx(std::hypot(fit.below.se, fit.above.se)).epsilon(1e-14));
  CHECK(fit.n_below() == fit.below.n_used);
  const Interval ci = fit.conventional_ci(0.05);
  CHECK(ci.upper - ci.lower == doctest::Approx(2.0 * 1.959963984540054 * fit.se).epsilon(1e-9));
}

TEST_CASE("equivariance under a constant shift") {
  Cohort c = noisy(4, 7.0);
  const RdFit base = sharp_rd(c, RdSpec{});
  for (auto& obs : c.observations) obs.oop += 1234.5;
  const RdFit shifted = sharp_rd(c, RdSpec{});
  CHECK(shifted.jump == doctest::Approx(base.jump).epsilon(1e-9));
  CHECK(shifted.below.boundary_value ==
        doctest::Approx(base.below.boundary_value + 1234.5).epsilon(1e-12));
  CHECK(shifted.se == doctest::Approx(base.se).epsilon(1e-8));
}

TEST_CASE("rows at the threshold never enter a fit") {
  const Cohort with = noisy(5, 3.0);
  Cohort without = with;
  std::erase_if(without.observations, [](const Observation& o) { return o.age == 65; });
  REQUIRE(without.size() < with.size());
  const RdSpec spec;
  const RdFit a = sharp_rd(with, spec);
  const RdFit b = sharp_rd(without, spec);
  CHECK(a.jump == b.jump);
  CHECK(a.se == b.se);
  const RdFit d = sharp_rd(apply_donut(with, spec), spec);
  CHECK(d.jump == a.jump);
}

TEST_CASE("side errors carry a tag") {
  const Cohort c = testing::oop_cohort(66, 80, 1, [](int a) { return a; });
  Cohort both = c;
  Observation lone;
  lone.id = "x";
  lone.age = 64;
  both.observations.push_back(lone);
  try {
    sharp_rd(both, RdSpec{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::identifiability);
    CHECK(std::string(e.what()).find("below") != std::string::npos);
  }
}

TEST_CASE("first stage limits") {
  const Cohort sharp = testing::grid_cohort(
      50, 80, 3, [](int) { return 1.0; }, [](int) { return 0.5; },
      [](int a, int) { return a > 65; });
  const RdFit fs = first_stage(sharp, RdSpec{});
  CHECK(fs.jump == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fs.warnings.empty());

  const Cohort flat = testing::grid_cohort(
      50, 80, 10, [](int) { return 1.0; }, [](int) { return 0.5; },
      [](int, int k) { return k % 2 == 0; });
  const RdFit weak = first_stage(flat, RdSpec{});
  CHECK(std::abs(weak.jump) < 1e-10);
  CHECK(weak.warnings.size() == 1);
  try {
    fuzzy_rd(flat, RdSpec{}, RdSpec{});
    FAIL("expected weak instrument");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::weak_instrument);
  }
}

TEST_CASE("first stage from a 0.20 / 0.78 design") {
  CohortParams p = calibrated_params();
  p.n = 100000;
  p.seed = 17;
  const RdFit fs = first_stage(simulate_cohort(p), RdSpec{});
  CHECK(fs.jump == doctest::Approx(0.58).epsilon(0.03 / 0.58));
  CHECK(fs.jump >= -1.0);
  CHECK(fs.jump <= 1.0);
}

TEST_CASE("Wald ratio from injected side estimates") {
  const RdFit rf = injected(100.0, 235.0, 20.0);
  const RdFit fs = injected(0.2, 0.782, 0.05);
  const FuzzyResult r = fuzzy_from_fits(rf, fs);
  CHECK(r.wald == doctest::Approx(135.0 / 0.582).epsilon(1e-12));
  CHECK(std::abs(r.wald - 232.0) < 1.0);

  const FuzzyResult adh = fuzzy_from_fits(injected(0.9, 0.9 - 0.0367), fs);
  CHECK(adh.wald == doctest::Approx(-0.0367 / 0.582).epsilon(1e-10));
  CHECK(std::abs(adh.wald + 0.063) < 0.0005);

  const FuzzyResult zero = fuzzy_from_fits(injected(5.0, 5.0), fs);
  CHECK(zero.wald == 0.0);

  const double rf_se = rf.se, fs_se = fs.se;
  const double expected =
      std::sqrt(rf_se * rf_se / (0.582 * 0.582) +
                135.0 * 135.0 * fs_se * fs_se / std::pow(0.582, 4));
  CHECK(r.se == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("weak floor is a hard error") {
  const RdFit rf = injected(0.0, 1.0, 0.1);
  CHECK_THROWS_AS(fuzzy_from_fits(rf, injected(0.0, 0.10, 0.01)), Error);
  CHECK_THROWS_AS(fuzzy_from_fits(rf, injected(0.0, -0.5, 0.01)), Error);
  CHECK_NOTHROW(fuzzy_from_fits(rf, injected(0.0, 0.11, 0.01)));
  FuzzyOptions loose;
  loose.weak_floor = 0.01;
  CHECK_NOTHROW(fuzzy_from_fits(rf, injected(0.0, 0.05, 0.01), loose));
}

TEST_CASE("Wald identity on random cohorts") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Cohort c = noisy(100 + s, 5.0 + s);
    const FuzzyResult r = fuzzy_rd(c, RdSpec{}, RdSpec{});
    CHECK(r.wald * r.first_stage.jump ==
          doctest::Approx(r.reduced_form.jump).epsilon(1e-12));
  }
}

TEST_CASE("sharp limit: fuzzy equals sharp") {
  Cohort c = noisy(9, 12.0);
  for (auto& obs : c.observations) obs.treated = obs.age > 65;
  RdSpec spec;
  spec.donut_radius = 1;
  const FuzzyResult r = fuzzy_rd(c, spec, spec);
  const RdFit s = sharp_rd(c, spec);
  CHECK(r.first_stage.jump == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(r.wald - s.jump) <= 1e-12 * (1.0 + std::abs(s.jump)));
}

TEST_CASE("fuzzy honest intervals") {
  const Cohort c = noisy(11, 15.0);
  RdSpec spec;
  const SmoothnessBound mo = estimate_m(c, "oop", 4.0);
  const SmoothnessBound ms = estimate_m(c, "treated", 4.0);
  const FuzzyResult r = fuzzy_rd(c, spec, spec, mo, ms);
  REQUIRE(r.honest_ci);
  REQUIRE(r.delta_honest);
  const double fs = r.first_stage.jump;
  CHECK(r.honest_ci->lower == doctest::Approx(r.reduced_form.honest->lower / fs));
  CHECK(r.honest_ci->upper == doctest::Approx(r.reduced_form.honest->upper / fs));
  CHECK(r.honest_ci->contains(r.wald));
  CHECK(r.delta_honest->interval().contains(r.wald));
  CHECK(r.delta_honest->worst_case_bias >= r.reduced_form.honest->worst_case_bias / fs);
}

TEST_CASE("sharp RD mean over Monte Carlo replicates") {
  // ITT OOP of 232 * 0.58 with additive normal noise of $150.
  CohortParams p = calibrated_params();
  p.oop.noise = NoiseKind::normal;
  p.oop.noise_sd = 150.0;
  p.oop.below = {500.0, 0.6};
  p.oop.above = p.oop.below;
  p.covariates.clear();
  double sum = 0.0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    p.seed = stream_seed(2024, r);
    sum += sharp_rd(simulate_cohort(p), default_spec("oop")).jump;
  }
  CHECK(std::abs(sum / reps - 135.0) < 10.0);
}
