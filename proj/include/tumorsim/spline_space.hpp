#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace tumorsim {

/// Tensor Gauss-Legendre rule on the unit interval [0, 1].
struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;

  /// n-point rule; exact for polynomials of degree <= 2n - 1.
  static QuadratureRule gauss_legendre(int n);
  [[nodiscard]] int size() const { return static_cast<int>(points.size()); }
};

/// Values and physical gradients of the 9 quadratic B-splines supported on
/// one element. Local index a = ax + 3 * ay.
struct BasisEval {
  std::array<double, 9> value{};
  std::array<double, 9> dx{};
  std::array<double, 9> dy{};
};

/// Tensor-product quadratic B-spline space on the square [0, L]^2 with open
/// uniform knot vectors. Global basis index j = jx + n1 * jy, n1 = n_el + 2.
/// Immutable after construction.
class SplineSpace2D {
 public:
  static constexpr int degree = 2;
  static constexpr int local_per_dir = degree + 1;
  static constexpr int local_size = local_per_dir * local_per_dir;

  /// Throws std::invalid_argument for n_el < 4 or a non-positive side.
  SplineSpace2D(double side, int elements_per_side, int quadrature_points = 3);

  [[nodiscard]] double side() const { return side_; }
  [[nodiscard]] int elements_per_side() const { return n_el_; }
  [[nodiscard]] int num_elements() const { return n_el_ * n_el_; }
  [[nodiscard]] double element_size() const { return h_; }
  [[nodiscard]] int basis_per_direction() const { return n_el_ + degree; }
  [[nodiscard]] int num_basis() const { return basis_per_direction() * basis_per_direction(); }
  [[nodiscard]] double area() const { return side_ * side_; }

  [[nodiscard]] std::span<const double> knots() const { return knots_; }

  /// 1 for control points on the boundary of the square.
  [[nodiscard]] std::span<const std::uint8_t> boundary_mask() const { return boundary_mask_; }
  [[nodiscard]] bool on_boundary(int dof) const { return boundary_mask_[dof] != 0; }
  [[nodiscard]] std::vector<int> boundary_dofs() const;

  [[nodiscard]] int element_index(int ex, int ey) const { return ex + n_el_ * ey; }
  /// Global indices of the basis functions supported on the element.
  [[nodiscard]] std::array<int, local_size> element_dofs(int element) const;

  /// The three 1D B-splines nonzero on 1D element e at local coordinate
  /// xi in [0, 1]; derivatives are with respect to the physical coordinate.
  void eval_basis_1d(int e, double xi, std::span<double, 3> values,
                     std::span<double, 3> derivatives) const;

  /// eval_basis(element, (xi, eta)) with local coordinates in [0, 1]^2.
  [[nodiscard]] BasisEval eval_basis(int element, double xi, double eta) const;

  /// Field value at a physical point (x, y) in [0, L]^2.
  [[nodiscard]] double evaluate(std::span<const double> coeffs, double x, double y) const;

  /// 1D quadrature rule used for assembly (tensorized per element).
  [[nodiscard]] const QuadratureRule& quadrature() const { return rule_; }
  [[nodiscard]] int quad_per_dir() const { return rule_.size(); }
  [[nodiscard]] int quad_per_element() const { return rule_.size() * rule_.size(); }

  /// Tabulated 1D basis values/derivatives at the quadrature points:
  /// index [(e * nq + q) * 3 + a].
  [[nodiscard]] double table_value(int e, int q, int a) const {
    return tab_value_[(static_cast<std::size_t>(e) * rule_.size() + q) * 3 + a];
  }
  [[nodiscard]] double table_derivative(int e, int q, int a) const {
    return tab_deriv_[(static_cast<std::size_t>(e) * rule_.size() + q) * 3 + a];
  }
  /// Physical coordinate of 1D quadrature point q in element e.
  [[nodiscard]] double quad_coordinate(int e, int q) const { return (e + rule_.points[q]) * h_; }
  /// Physical quadrature weight (product of the two 1D weights times h^2).
  [[nodiscard]] double quad_weight(int qx, int qy) const {
    return rule_.weights[qx] * rule_.weights[qy] * h_ * h_;
  }

 private:
  double side_;
  int n_el_;
  double h_;
  std::vector<double> knots_;
  std::vector<std::uint8_t> boundary_mask_;
  QuadratureRule rule_;
  std::vector<double> tab_value_;
  std::vector<double> tab_deriv_;
};

}  // namespace tumorsim
