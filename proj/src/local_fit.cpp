#include "donutrd/local_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace donutrd {

double kernel_weight(double u, Kernel kernel) {
  const double a = std::abs(u);
  switch (kernel) {
    case Kernel::triangular: return std::max(0.0, 1.0 - a);
    case Kernel::uniform: return a <= 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

namespace {

bool on_side(int age, int threshold, Side side) {
  return side == Side::below ? age < threshold : age > threshold;
}

double point_weight(int age, const RdSpec& spec) {
  if (spec.scope == Scope::global) return 1.0;
  return kernel_weight((age - spec.threshold) / spec.bandwidth, spec.kernel);
}

std::string side_tag(Side side) {
  return "[" + std::string(to_string(side)) + " side] ";
}

// Solves the weighted least squares problem through a Householder QR of
// sqrt(W) X. Returns false when R is numerically singular.
template <typename Matrix, typename Vector>
bool solve_wls(const Matrix& design, const Vector& sqrt_w, const Vector& y,
               Vector& beta) {
  Matrix a = sqrt_w.asDiagonal() * design;
  Vector b = sqrt_w.cwiseProduct(y);
  Eigen::HouseholderQR<Matrix> qr(a);
  const Eigen::Index p = design.cols();
  const auto r = qr.matrixQR().topLeftCorner(p, p);
  const double scale = r.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < p; ++k)
    if (!(std::abs(r(k, k)) > 1e-12 * scale)) return false;
  beta = qr.solve(b);
  return true;
}

}  // namespace

Eigen::VectorXd effective_weights(const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& kernel_weights) {
  const Eigen::Index p = design.cols();
  Eigen::MatrixXd a = kernel_weights.cwiseSqrt().asDiagonal() * design;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd r =
      qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const double scale = r.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < p; ++k)
    if (!(std::abs(r(k, k)) > 1e-12 * scale))
      throw Error(ErrorKind::identifiability, "singular normal equations");
  // (X'WX)^-1 e1 = R^-1 R^-T e1
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(p);
  e1(0) = 1.0;
  Eigen::VectorXd v = r.transpose().triangularView<Eigen::Lower>().solve(e1);
  Eigen::VectorXd u = r.triangularView<Eigen::Upper>().solve(v);
  return kernel_weights.cwiseProduct(design * u);
}

SideFit fit_boundary(std::span<const SidePoint> side_data, const RdSpec& spec,
                     Side side) {
  const int c = spec.threshold;
  const int p = spec.order;
  if (side_data.empty())
    throw Error(ErrorKind::empty_side, side_tag(side) + "no observations");

  std::vector<const SidePoint*> used;
  std::vector<double> kw;
  used.reserve(side_data.size());
  kw.reserve(side_data.size());
  std::vector<int> ages;
  for (const auto& pt : side_data) {
    if (!on_side(pt.age, c, side))
      throw Error(ErrorKind::data, side_tag(side) + "age " +
                                       std::to_string(pt.age) +
                                       " is on the wrong side of the threshold");
    if (in_donut(pt.age, c, spec.donut_radius)) continue;
    const double w = point_weight(pt.age, spec);
    if (w <= 0.0) continue;
    used.push_back(&pt);
    kw.push_back(w);
    ages.push_back(pt.age);
  }
  if (used.empty())
    throw Error(ErrorKind::empty_window,
                side_tag(side) + "all kernel weights are zero");
  std::sort(ages.begin(), ages.end());
  const auto distinct = std::unique(ages.begin(), ages.end()) - ages.begin();
  if (distinct <= p)
    throw Error(ErrorKind::identifiability,
                side_tag(side) + std::to_string(distinct) +
                    " distinct ages cannot identify a degree-" +
                    std::to_string(p) + " polynomial");

  const auto n = static_cast<Eigen::Index>(used.size());
  Eigen::MatrixXd x(n, p + 1);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = used[i]->age - c;
    double pow = 1.0;
    for (int k = 0; k <= p; ++k) {
      x(i, k) = pow;
      pow *= d;
    }
    y(i) = used[i]->y;
    w(i) = kw[i];
  }

  Eigen::VectorXd beta;
  Eigen::VectorXd sqrt_w = w.cwiseSqrt();
  if (!solve_wls(x, sqrt_w, y, beta))
    throw Error(ErrorKind::identifiability,
                side_tag(side) + "rank-deficient design");
  const Eigen::VectorXd ew = effective_weights(x, w);
  const Eigen::VectorXd resid = y - x * beta;

  SideFit fit;
  fit.side = side;
  fit.boundary_value = beta(0);
  fit.coefficients.assign(beta.data(), beta.data() + beta.size());
  fit.n_used = used.size();
  fit.effective_weights.reserve(used.size());
  double var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.effective_weights.push_back(
        {used[i]->row, static_cast<double>(used[i]->age - c), ew(i)});
    var += ew(i) * ew(i) * resid(i) * resid(i);
  }
  fit.se = std::sqrt(var);
  return fit;
}

double fit_grouped_boundary(std::span<const AgeCell> cells, const RdSpec& spec,
                            Side side) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 64, 4>;
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 64, 1>;
  const int c = spec.threshold;
  const int p = spec.order;

  int rows = 0;
  for (const auto& cell : cells) {
    if (cell.count <= 0.0 || !on_side(cell.age, c, side) ||
        in_donut(cell.age, c, spec.donut_radius))
      continue;
    if (point_weight(cell.age, spec) > 0.0) ++rows;
  }
  if (rows == 0)
    throw Error(ErrorKind::empty_window,
                side_tag(side) + "all kernel weights are zero");
  if (rows <= p)
    throw Error(ErrorKind::identifiability,
                side_tag(side) + "too few distinct ages");
  if (rows > 64)
    throw Error(ErrorKind::data, "more than 64 distinct ages on one side");

  Mat x(rows, p + 1);
  Vec sw(rows), ybar(rows);
  int i = 0;
  for (const auto& cell : cells) {
    if (cell.count <= 0.0 || !on_side(cell.age, c, side) ||
        in_donut(cell.age, c, spec.donut_radius))
      continue;
    const double k = point_weight(cell.age, spec);
    if (k <= 0.0) continue;
    const double d = cell.age - c;
    double pow = 1.0;
    for (int j = 0; j <= p; ++j) {
      x(i, j) = pow;
      pow *= d;
    }
    sw(i) = std::sqrt(k * cell.count);
    ybar(i) = cell.sum / cell.count;
    ++i;
  }
  Vec beta;
  if (!solve_wls(x, sw, ybar, beta))
    throw Error(ErrorKind::identifiability,
                side_tag(side) + "rank-deficient design");
  return beta(0);
}

}  // namespace donutrd
