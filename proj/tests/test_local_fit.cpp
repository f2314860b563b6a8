#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "donutrd/local_fit.hpp"
#include "oracles.hpp"

using namespace donutrd;

namespace {

RdSpec make_spec(int order, Kernel kernel = Kernel::triangular,
                 Scope scope = Scope::local, double h = 10.0) {
  RdSpec s;
  s.order = order;
  s.kernel = kernel;
  s.scope = scope;
  s.bandwidth = h;
  return s;
}

std::vector<SidePoint> side_points(int lo, int hi, int copies,
                                   const std::function<double(double)>& f,
                                   int c = 65) {
  std::vector<SidePoint> pts;
  std::size_t row = 0;
  for (int age = lo; age <= hi; ++age)
    for (int k = 0; k < copies; ++k) pts.push_back({age, f(age - c), row++});
  return pts;
}

}  // namespace

TEST_CASE("kernel weights") {
  CHECK(kernel_weight(0.0, Kernel::triangular) == 1.0);
  CHECK(kernel_weight(0.5, Kernel::triangular) == 0.5);
  CHECK(kernel_weight(-0.5, Kernel::triangular) == 0.5);
  CHECK(kernel_weight(1.2, Kernel::triangular) == 0.0);
  CHECK(kernel_weight(1.0, Kernel::uniform) == 1.0);
  CHECK(kernel_weight(1.01, Kernel::uniform) == 0.0);
}

TEST_CASE("exact line is reproduced at the boundary") {
  for (int order = 1; order <= 3; ++order) {
    const auto pts = side_points(55, 64, 3, [](double x) { return 2.0 + 3.0 * x; });
    const SideFit fit = fit_boundary(pts, make_spec(order), Side::below);
    CHECK(fit.boundary_value == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("three-point quadratic matches the Lagrange oracle") {
  // Lagrange basis at 0 over nodes -3, -2, -1 gives weights 1, -3, 3.
  const std::vector<SidePoint> pts = {{62, 9.0, 0}, {63, 4.0, 1}, {64, 1.0, 2}};
  const SideFit fit = fit_boundary(pts, make_spec(2, Kernel::uniform), Side::below);
  CHECK(std::abs(fit.boundary_value) < 1e-10);
  REQUIRE(fit.effective_weights.size() == 3);
  CHECK(fit.effective_weights[0].weight == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fit.effective_weights[1].weight == doctest::Approx(-3.0).epsilon(1e-10));
  CHECK(fit.effective_weights[2].weight == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("constant outcome gives zero residual variance") {
  for (Kernel k : {Kernel::triangular, Kernel::uniform})
    for (int order = 1; order <= 3; ++order) {
      const auto pts = side_points(66, 76, 2, [](double) { return 5.0; });
      const SideFit fit = fit_boundary(pts, make_spec(order, k), Side::above);
      CHECK(fit.boundary_value == doctest::Approx(5.0).epsilon(1e-12));
      CHECK(fit.se < 1e-10);
    }
}

TEST_CASE("two points, order 1") {
  const std::vector<SidePoint> pts = {{63, 1.0, 0}, {64, 3.0, 1}};
  const SideFit fit = fit_boundary(pts, make_spec(1, Kernel::uniform), Side::below);
  double sum = 0.0;
  for (const auto& w : fit.effective_weights) sum += w.weight;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.boundary_value == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("symmetric design gives symmetric weights") {
  Eigen::MatrixXd x(4, 2);
  x << 1, -2, 1, -1, 1, 1, 1, 2;
  const Eigen::VectorXd w = effective_weights(x, Eigen::VectorXd::Ones(4));
  CHECK(w(0) == doctest::Approx(w(3)).epsilon(1e-12));
  CHECK(w(1) == doctest::Approx(w(2)).epsilon(1e-12));
}

TEST_CASE("fit errors") {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::config;
  };
  const std::vector<SidePoint> two = {{63, 1.0, 0}, {64, 2.0, 1}, {64, 2.5, 2}};
  CHECK(kind_of([&] { fit_boundary(two, make_spec(2), Side::below); }) ==
        ErrorKind::identifiability);
  const std::vector<SidePoint> far = {{40, 1.0, 0}, {41, 2.0, 1}};
  CHECK(kind_of([&] { fit_boundary(far, make_spec(1), Side::below); }) ==
        ErrorKind::empty_window);
  CHECK(kind_of([&] { fit_boundary(far, make_spec(1), Side::above); }) == ErrorKind::data);
  CHECK(kind_of([&] { fit_boundary({}, make_spec(1), Side::above); }) ==
        ErrorKind::empty_side);
  Eigen::MatrixXd x(3, 2);
  x << 1, 1, 1, 1, 1, 1;
  CHECK(kind_of([&] { effective_weights(x, Eigen::VectorXd::Ones(3)); }) ==
        ErrorKind::identifiability);
}

TEST_CASE("global scope uses every point with unit weight") {
  const auto pts = side_points(40, 64, 1, [](double x) { return x * x; });
  const SideFit fit = fit_boundary(pts, make_spec(2, Kernel::triangular, Scope::global, 1.0),
                                   Side::below);
  CHECK(fit.n_used == pts.size());
  CHECK(fit.coefficients[2] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("random designs: moment conditions, oracle agreement, linearity") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> age(50, 64);
  std::normal_distribution<double> noise(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int order = 1 + trial % 3;
    const Kernel kernel = trial % 2 ? Kernel::uniform : Kernel::triangular;
    const double h = 6.0 + trial % 10;
    const RdSpec spec = make_spec(order, kernel, Scope::local, h);
    std::vector<SidePoint> pts;
    const int n = 20 + trial % 50;
    for (int i = 0; i < n; ++i)
      pts.push_back({age(rng), noise(rng), static_cast<std::size_t>(i)});
    SideFit fit;
    try {
      fit = fit_boundary(pts, spec, Side::below);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::identifiability);
      continue;
    }
    std::vector<double> xs, ks;
    for (const auto& w : fit.effective_weights) {
      xs.push_back(w.centered_age);
      ks.push_back(kernel_weight(w.centered_age / h, kernel));
    }
    const auto expected = oracle::intercept_weights(xs, ks, order);
    double scale = 0.0;
    for (double e : expected) scale = std::max(scale, std::abs(e));
    for (int k = 0; k <= order; ++k) {
      double moment = 0.0;
      for (const auto& w : fit.effective_weights)
        moment += w.weight * std::pow(w.centered_age, k);
      CHECK(std::abs(moment - (k == 0 ? 1.0 : 0.0)) < 1e-10 * std::max(1.0, scale * n));
    }
    double combo = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(std::abs(fit.effective_weights[i].weight - expected[i]) < 1e-9 * std::max(1.0, scale));
      combo += fit.effective_weights[i].weight * pts[fit.effective_weights[i].row].y;
    }
    CHECK(std::abs(combo - fit.boundary_value) < 1e-10 * (1.0 + std::abs(fit.boundary_value)) * n);

    // Linearity: scaling y by k scales estimate and se by |k|.
    std::vector<SidePoint> scaled = pts;
    for (auto& p : scaled) p.y *= -4.0;
    const SideFit fs = fit_boundary(scaled, spec, Side::below);
    CHECK(fs.boundary_value == doctest::Approx(-4.0 * fit.boundary_value).epsilon(1e-10));
    CHECK(fs.se == doctest::Approx(4.0 * fit.se).epsilon(1e-10));
  }
}

TEST_CASE("polynomial reproduction for every order, kernel and scope") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int order = 1; order <= 3; ++order)
    for (Kernel k : {Kernel::triangular, Kernel::uniform})
      for (Scope s : {Scope::local, Scope::global})
        for (int deg = 0; deg <= order; ++deg) {
          std::vector<double> c(deg + 1);
          for (auto& v : c) v = coef(rng);
          auto f = [&](double x) {
            double acc = 0.0;
            for (int j = deg; j >= 0; --j) acc = acc * x + c[j];
            return acc;
          };
          const auto pts = side_points(66, 80, 2, f);
          const SideFit fit = fit_boundary(pts, make_spec(order, k, s), Side::above);
          CHECK(std::abs(fit.boundary_value - c[0]) < 1e-10 * std::max(1.0, std::abs(c[0])));
        }
}

TEST_CASE("grouped boundary agrees with the observation-level fit") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> age(50, 80);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    RdSpec spec = make_spec(1 + trial % 3, trial % 2 ? Kernel::uniform : Kernel::triangular,
                            trial % 5 == 0 ? Scope::global : Scope::local, 5.0 + trial % 11);
    spec.donut_radius = trial % 3 == 0 ? 1 : 0;
    std::vector<SidePoint> below, above;
    std::map<int, AgeCell> cells;
    for (int i = 0; i < 400; ++i) {
      const int a = age(rng);
      if (a == 65) continue;
      const double y = 0.1 * (a - 65) + noise(rng);
      (a < 65 ? below : above).push_back({a, y, static_cast<std::size_t>(i)});
      auto& cell = cells[a];
      cell.age = a;
      cell.count += 1.0;
      cell.sum += y;
    }
    std::vector<AgeCell> flat;
    for (auto& [a, cell] : cells) flat.push_back(cell);
    for (Side side : {Side::below, Side::above}) {
      const auto& pts = side == Side::below ? below : above;
      const double ref = fit_boundary(pts, spec, side).boundary_value;
      const double grouped = fit_grouped_boundary(flat, spec, side);
      CHECK(std::abs(ref - grouped) < 1e-10 * (1.0 + std::abs(ref)));
    }
  }
}
