#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "donutrd/elasticity.hpp"
#include "donutrd/synth.hpp"
#include "helpers.hpp"

using namespace donutrd;

namespace {

PedSpecs window_specs() {
  PedSpecs s;
  s.baseline_mode = BaselineMode::window;
  return s;
}

CohortParams small_params(std::uint64_t seed) {
  CohortParams p = calibrated_params();
  p.covariates.clear();
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("baselines on constant data") {
  const Cohort c = testing::grid_cohort(
      50, 80, 2, [](int a) { return a < 65 ? 66.0 : 200.0; },
      [](int a) { return a < 65 ? 0.9 : 0.85; }, [](int a, int) { return a > 65; });
  for (const PedSpecs& specs : {PedSpecs{}, window_specs()}) {
    const Baselines b = baselines(c, specs);
    CHECK(b.q_pre == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(b.p_pre == doctest::Approx(66.0).epsilon(1e-12));
  }
}

TEST_CASE("baselines on a line below the threshold") {
  const Cohort c = testing::grid_cohort(
      50, 80, 1, [](int) { return 66.0; },
      [](int a) { return 0.9 - 0.01 * (a - 65); }, [](int a, int) { return a > 65; });
  CHECK(baselines(c, PedSpecs{}).q_pre == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(baselines(c, window_specs()).q_pre == doctest::Approx(0.93).epsilon(1e-12));
}

TEST_CASE("baseline errors") {
  const Cohort above_only = testing::oop_cohort(66, 80, 1, [](int) { return 1.0; });
  CHECK_THROWS_AS(baselines(above_only, PedSpecs{}), Error);
  CHECK_THROWS_AS(baselines(above_only, window_specs()), Error);

  const Cohort zero_price = testing::grid_cohort(
      50, 80, 1, [](int) { return 0.0; }, [](int) { return 0.9; },
      [](int a, int) { return a > 65; });
  try {
    baselines(zero_price, PedSpecs{});
    FAIL("expected degenerate baseline");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_baseline);
  }
}

TEST_CASE("compute_ped examples") {
  CHECK(compute_ped(0.0, 0.9, 232.0, 66.0) == 0.0);
  CHECK(compute_ped(-0.1, 0.8, 100.0, 50.0) == doctest::Approx(-0.0625).epsilon(1e-14));
  // p_pre / q_pre = 73.7 reproduces an elasticity of -0.020.
  const double q_pre = 0.9;
  const double p_pre = 73.7 * q_pre;
  CHECK(std::abs(compute_ped(-0.063, q_pre, 232.0, p_pre) + 0.020) < 0.0005);
  try {
    compute_ped(-0.1, 0.8, 0.0, 50.0);
    FAIL("expected undefined elasticity");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::undefined_elasticity);
  }
  CHECK_THROWS_AS(compute_ped(-0.1, 0.0, 1.0, 50.0), Error);
  CHECK_THROWS_AS(compute_ped(-0.1, 0.5, 1.0, -1.0), Error);
}

TEST_CASE("compute_ped matches the ratio definition and sign rule") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double dq = u(rng), q = 0.05 + std::abs(u(rng));
    const double dp = 1.0 + 100.0 * std::abs(u(rng)), p = 1.0 + 50.0 * std::abs(u(rng));
    const double ped = compute_ped(dq, q, dp, p);
    CHECK(ped == doctest::Approx((dq / q) / (dp / p)).epsilon(1e-12));
    if (dq != 0.0) CHECK(std::signbit(ped) == std::signbit(dq));
  }
}

TEST_CASE("sorted_quantile is type 7") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(sorted_quantile(v, 0.0) == 1.0);
  CHECK(sorted_quantile(v, 1.0) == 5.0);
  CHECK(sorted_quantile(v, 0.5) == 3.0);
  CHECK(sorted_quantile(v, 0.1) == doctest::Approx(1.4));
  CHECK(sorted_quantile({7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(sorted_quantile({}, 0.5), Error);
}

TEST_CASE("point estimate agrees with the fuzzy fits") {
  const Cohort c = simulate_cohort(small_params(5));
  const PedSpecs specs;
  const PedPoint pt = ped_point(c, specs);
  const FuzzyResult price = fuzzy_rd(c, specs.oop, specs.stage);
  const FuzzyResult quantity = fuzzy_rd(c, specs.adherence, specs.stage);
  CHECK(pt.delta_p == price.wald);
  CHECK(pt.delta_q == quantity.wald);
  CHECK(pt.p_pre == price.reduced_form.below.boundary_value);
  CHECK(pt.q_pre == quantity.reduced_form.below.boundary_value);
  CHECK(pt.ped == doctest::Approx((pt.delta_q / pt.q_pre) / (pt.delta_p / pt.p_pre)).epsilon(1e-12));
}

TEST_CASE("sharp and fuzzy jumps give the same elasticity") {
  const Cohort c = simulate_cohort(small_params(6));
  const PedSpecs specs;
  const PedPoint pt = ped_point(c, specs);
  const RdFit rf_p = sharp_rd(c, specs.oop);
  const RdFit rf_q = sharp_rd(c, specs.adherence);
  const double itt = compute_ped(rf_q.jump, pt.q_pre, rf_p.jump, pt.p_pre);
  CHECK(itt == doctest::Approx(pt.ped).epsilon(1e-12));
}

TEST_CASE("scale invariance in price units") {
  Cohort c = simulate_cohort(small_params(7));
  const double base = ped_point(c, PedSpecs{}).ped;
  for (auto& obs : c.observations) obs.oop *= 3.7;
  CHECK(ped_point(c, PedSpecs{}).ped == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("bootstrap is deterministic and independent of execution") {
  const Cohort c = simulate_cohort(small_params(8));
  const PedResult a = bootstrap_ped(c, PedSpecs{}, 250, 42);
  const PedResult b = bootstrap_ped(c, PedSpecs{}, 250, 42);
  CHECK(a == b);
  const PedResult serial = bootstrap_ped(c, PedSpecs{}, 250, 42, Execution::serial);
  CHECK(serial == a);
  CHECK(a.replicates == 250);
  CHECK(a.seed == 42);
  CHECK(a.ci.lower <= a.ci.upper);

  const PedResult other = bootstrap_ped(c, PedSpecs{}, 250, 43);
  CHECK(other.ped == a.ped);
  CHECK(other.ci.lower != a.ci.lower);
}

TEST_CASE("grouped kernel matches the observation-level reference") {
  const Cohort c = simulate_cohort(small_params(9));
  for (const PedSpecs& specs : {PedSpecs{}, window_specs()}) {
    const auto fast = bootstrap_draws(c, specs, 60, 11, BootstrapPath::grouped,
                                      Execution::parallel);
    const auto ref = bootstrap_draws(c, specs, 60, 11, BootstrapPath::reference,
                                     Execution::serial);
    REQUIRE(fast.size() == ref.size());
    for (std::size_t r = 0; r < fast.size(); ++r) {
      REQUIRE(fast[r].has_value() == ref[r].has_value());
      if (fast[r]) CHECK(*fast[r] == doctest::Approx(*ref[r]).epsilon(1e-9));
    }
  }
  const PedResult a = bootstrap_ped(c, PedSpecs{}, 200, 5);
  const PedResult b = bootstrap_ped_reference(c, PedSpecs{}, 200, 5);
  CHECK(a.ped == b.ped);
  CHECK(a.ci.lower == doctest::Approx(b.ci.lower).epsilon(1e-9));
  CHECK(a.ci.upper == doctest::Approx(b.ci.upper).epsilon(1e-9));
  CHECK(a.failed_replicates == b.failed_replicates);
}

TEST_CASE("percentile interval contains the median replicate") {
  const Cohort c = simulate_cohort(small_params(10));
  const PedSpecs specs;
  const auto draws = bootstrap_draws(c, specs, 301, 77);
  std::vector<double> ok;
  for (const auto& d : draws)
    if (d) ok.push_back(*d);
  std::sort(ok.begin(), ok.end());
  const PedResult r = bootstrap_ped(c, specs, 301, 77);
  const double median = sorted_quantile(ok, 0.5);
  CHECK(r.ci.lower <= median);
  CHECK(median <= r.ci.upper);
}

TEST_CASE("no sampling variation gives a zero-width interval") {
  // Every row at an age is identical, so resampling only changes counts and
  // exact polynomial fits return the same jumps.
  const Cohort c = testing::grid_cohort(
      50, 80, 6, [](int a) { return a < 65 ? 66.0 + 0.5 * (a - 65) : 298.0 + 0.5 * (a - 65); },
      [](int a) { return a < 65 ? 0.9 : 0.837; }, [](int a, int) { return a > 65; });
  const PedResult r = bootstrap_ped(c, PedSpecs{}, 200, 1);
  CHECK(r.failed_replicates == 0);
  CHECK(r.ci.width() < 1e-9);
  CHECK(r.ci.lower == doctest::Approx(r.ped).epsilon(1e-9));
  CHECK(r.ped == doctest::Approx((-0.063 / 0.9) / (232.0 / 66.0)).epsilon(1e-9));
}

TEST_CASE("bootstrap preconditions") {
  const Cohort c = simulate_cohort(small_params(12));
  try {
    bootstrap_ped(c, PedSpecs{}, 199, 1);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  PedSpecs bad;
  bad.oop.bandwidth = -1.0;
  CHECK_THROWS_AS(bootstrap_draws(c, bad, 10, 1), Error);
}

TEST_CASE("too many failed replicates") {
  // A first stage hovering at the floor fails in roughly half the resamples.
  CohortParams p = small_params(13);
  p.p_below = 0.3;
  p.p_above = 0.4;
  const Cohort c = simulate_cohort(p);
  PedSpecs specs;
  specs.weak_floor = first_stage(c, specs.stage).jump;
  specs.weak_floor -= 1e-9;
  try {
    bootstrap_ped(c, specs, 200, 3);
    FAIL("expected unstable bootstrap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unstable_bootstrap);
  }
}
