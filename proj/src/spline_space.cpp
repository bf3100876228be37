#include "tumorsim/spline_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tumorsim {

QuadratureRule QuadratureRule::gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  QuadratureRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  const auto un = static_cast<unsigned>(n);
  for (int i = 0; i < n; ++i) {
    // Newton on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double pn = std::legendre(un, x);
      const double pm = n > 1 ? std::legendre(un - 1, x) : 1.0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      const double pn = std::legendre(un, x);
      const double pm = n > 1 ? std::legendre(un - 1, x) : 1.0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1, 1] -> [0, 1], ascending order
    rule.points[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

SplineSpace2D::SplineSpace2D(double side, int elements_per_side, int quadrature_points)
    : side_(side), n_el_(elements_per_side), h_(side / elements_per_side) {
  if (!(side > 0.0)) throw std::invalid_argument("SplineSpace2D: domain side must be positive");
  if (elements_per_side < 4)
    throw std::invalid_argument("SplineSpace2D: need at least 4 elements per side");

  knots_.reserve(n_el_ + 1 + 2 * degree);
  for (int i = 0; i < degree; ++i) knots_.push_back(0.0);
  for (int i = 0; i <= n_el_; ++i) knots_.push_back(i == n_el_ ? side_ : i * h_);
  for (int i = 0; i < degree; ++i) knots_.push_back(side_);

  const int n1 = basis_per_direction();
  boundary_mask_.assign(static_cast<std::size_t>(n1) * n1, 0);
  for (int jy = 0; jy < n1; ++jy)
    for (int jx = 0; jx < n1; ++jx)
      if (jx == 0 || jy == 0 || jx == n1 - 1 || jy == n1 - 1) boundary_mask_[jx + n1 * jy] = 1;

  rule_ = QuadratureRule::gauss_legendre(quadrature_points);
  const int nq = rule_.size();
  tab_value_.resize(static_cast<std::size_t>(n_el_) * nq * 3);
  tab_deriv_.resize(tab_value_.size());
  for (int e = 0; e < n_el_; ++e)
    for (int q = 0; q < nq; ++q) {
      const std::size_t off = (static_cast<std::size_t>(e) * nq + q) * 3;
      eval_basis_1d(e, rule_.points[q], std::span<double, 3>(&tab_value_[off], 3),
                    std::span<double, 3>(&tab_deriv_[off], 3));
    }
}

std::vector<int> SplineSpace2D::boundary_dofs() const {
  std::vector<int> out;
  for (int j = 0; j < num_basis(); ++j)
    if (boundary_mask_[j]) out.push_back(j);
  return out;
}

std::array<int, SplineSpace2D::local_size> SplineSpace2D::element_dofs(int element) const {
  const int ex = element % n_el_;
  const int ey = element / n_el_;
  const int n1 = basis_per_direction();
  std::array<int, local_size> dofs{};
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a) dofs[a + 3 * b] = (ex + a) + n1 * (ey + b);
  return dofs;
}

// Basis functions and first derivatives on knot span e + degree, following
// the triangular recurrences for B-spline values and derivatives.
void SplineSpace2D::eval_basis_1d(int e, double xi, std::span<double, 3> values,
                                  std::span<double, 3> derivatives) const {
  constexpr int p = degree;
  const int span = e + p;
  const double x = (e + xi) * h_;
  std::array<double, p + 1> left{}, right{};
  std::array<std::array<double, p + 1>, p + 1> ndu{};
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots_[span + 1 - j];
    right[j] = knots_[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= p; ++j) values[j] = ndu[j][p];
  // first derivative: N'_{i,p} = p (N_{i,p-1}/(u_{i+p}-u_i) - N_{i+1,p-1}/(u_{i+p+1}-u_{i+1}))
  for (int r = 0; r <= p; ++r) {
    double d = 0.0;
    if (r >= 1) d += ndu[r - 1][p - 1] / ndu[p][r - 1];
    if (r <= p - 1) d -= ndu[r][p - 1] / ndu[p][r];
    derivatives[r] = p * d;
  }
}

BasisEval SplineSpace2D::eval_basis(int element, double xi, double eta) const {
  const int ex = element % n_el_;
  const int ey = element / n_el_;
  std::array<double, 3> vx{}, dx{}, vy{}, dy{};
  eval_basis_1d(ex, xi, vx, dx);
  eval_basis_1d(ey, eta, vy, dy);
  BasisEval out;
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a) {
      out.value[a + 3 * b] = vx[a] * vy[b];
      out.dx[a + 3 * b] = dx[a] * vy[b];
      out.dy[a + 3 * b] = vx[a] * dy[b];
    }
  return out;
}

double SplineSpace2D::evaluate(std::span<const double> coeffs, double x, double y) const {
  auto locate = [&](double c, int& e, double& xi) {
    const double s = std::clamp(c / h_, 0.0, static_cast<double>(n_el_));
    e = std::min(static_cast<int>(s), n_el_ - 1);
    xi = s - e;
  };
  int ex = 0, ey = 0;
  double xi = 0.0, eta = 0.0;
  locate(x, ex, xi);
  locate(y, ey, eta);
  std::array<double, 3> vx{}, dx{}, vy{}, dy{};
  eval_basis_1d(ex, xi, vx, dx);
  eval_basis_1d(ey, eta, vy, dy);
  const int n1 = basis_per_direction();
  double value = 0.0;
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a) value += coeffs[(ex + a) + n1 * (ey + b)] * vx[a] * vy[b];
  return value;
}

}  // namespace tumorsim
