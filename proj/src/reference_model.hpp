#pragma once

// Dense, deliberately simple re-implementation of the discrete model. It
// shares no assembly or basis code with the production library: the basis
// comes from the Cox-de Boor recursion, quadrature points are hard-coded,
// the tangent is a finite-difference matrix and linear solves are dense LU.
// Only meant for n_el up to about 8.

#include <array>
#include <functional>
#include <vector>

#include "tumorsim/model.hpp"

namespace tumorsim::reference {

/// Open uniform quadratic knot vector on [0, side].
std::vector<double> clamped_knots(double side, int n_el);

/// N_{i,p}(x) and its derivative by the Cox-de Boor recursion; the interval
/// convention is half-open except at the right end of the knot vector.
double bspline(const std::vector<double>& knots, int i, int p, double x);
double bspline_derivative(const std::vector<double>& knots, int i, int p, double x);

class ReferenceModel {
 public:
  ReferenceModel(double side, int n_el, ModelParameters params, int gauss_points = 3);

  [[nodiscard]] int n1() const { return n1_; }
  [[nodiscard]] int field_size() const { return n1_ * n1_; }
  [[nodiscard]] int system_size() const { return 3 * field_size(); }
  [[nodiscard]] bool on_boundary(int j) const;

  /// Galerkin residual at the stage (rate, value) with spatially uniform
  /// drug inputs; Dirichlet rows of phi hold the value itself.
  [[nodiscard]] std::vector<double> residual(const std::vector<double>& rate, const std::vector<double>& value,
                                             double u, double s) const;

  /// Field value at (x, y) from coefficients of one field.
  [[nodiscard]] double evaluate(const double* coeffs, double x, double y) const;

  /// L2 norm of (field - exact) over the domain with a 5-point Gauss rule.
  [[nodiscard]] double l2_error(const double* coeffs, const std::function<double(double, double)>& exact) const;

 private:
  struct Point {
    double x, y, w;
    std::vector<int> dofs;                // 9 global indices
    std::vector<double> n, nx, ny;        // values and gradients
  };
  double side_;
  int n_el_;
  int n1_;
  ModelParameters params_;
  std::vector<double> knots_;
  std::vector<Point> points_;
};

struct DenseStep {
  std::vector<double> U;
  std::vector<double> Udot;
  int iterations = 0;
  double final_update = 0.0;
};

/// One generalized-alpha step solved to round-off with a finite-difference
/// tangent and dense LU. Drug inputs are evaluated at t0 + alpha_f dt.
DenseStep dense_generalized_alpha_step(const ReferenceModel& model, const std::vector<double>& U0,
                                       const std::vector<double>& V0, double t0, double dt, double rho_inf,
                                       const std::function<double(double)>& u,
                                       const std::function<double(double)>& s);

}  // namespace tumorsim::reference
