#pragma once

/// Galerkin residual and Newton tangent of the coupled phase-field /
/// nutrient / tissue-PSA system on a quadratic B-spline space.
///
/// Unknowns are blocked by field: [Phi | Sigma | P], each of length
/// space.num_basis(). Phi carries homogeneous Dirichlet conditions on the
/// boundary control points; Sigma and P are natural (zero-flux).
///
/// The production kernels loop over elements in 9 colours (ex % 3, ey % 3);
/// elements of one colour share no basis functions, so the OpenMP scatter
/// is race-free and the summation order is independent of the thread count.
/// The *_serial variants are plain element loops kept as references.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tumorsim/gmres.hpp"
#include "tumorsim/model.hpp"
#include "tumorsim/sparse.hpp"
#include "tumorsim/spline_space.hpp"

namespace tumorsim {

enum class Field : int { phi = 0, sigma = 1, psa = 2 };

/// Residual arguments: the generalized-alpha stage rates and values.
struct StageValues {
  std::span<const double> rate;   ///< U-dot at n + alpha_m
  std::span<const double> value;  ///< U at n + alpha_f
};

/// Spatially uniform time-dependent data evaluated at the stage time.
struct ExternalInputs {
  double u = 0.0;  ///< cytotoxic effect
  double s = 0.0;  ///< antiangiogenic supply reduction
  double t = 0.0;  ///< stage time, forwarded to source terms
};

/// Optional body forcing (f_phi, f_sigma, f_p)(x, y, t) added to the right
/// hand side; used by manufactured-solution studies.
using SourceTerm = std::function<std::array<double, 3>(double x, double y, double t)>;

/// dR/dU-dot_{n+1} = mass_coeff * dR/dU-dot + stiffness_coeff * dR/dU.
struct TangentCoefficients {
  double mass_coeff = 1.0;       ///< alpha_m
  double stiffness_coeff = 0.0;  ///< alpha_f * gamma * dt
};

class Discretization {
 public:
  Discretization(SplineSpace2D space, ModelParameters params);

  [[nodiscard]] const SplineSpace2D& space() const { return space_; }
  [[nodiscard]] const ModelParameters& params() const { return params_; }
  [[nodiscard]] int field_size() const { return space_.num_basis(); }
  [[nodiscard]] int system_size() const { return 3 * field_size(); }
  [[nodiscard]] std::size_t offset(Field f) const {
    return static_cast<std::size_t>(f) * static_cast<std::size_t>(field_size());
  }
  [[nodiscard]] std::span<const double> block(std::span<const double> U, Field f) const {
    return U.subspan(offset(f), static_cast<std::size_t>(field_size()));
  }
  [[nodiscard]] std::span<double> block(std::span<double> U, Field f) const {
    return U.subspan(offset(f), static_cast<std::size_t>(field_size()));
  }

  /// Scalar mass and stiffness matrices (shared sparsity pattern).
  [[nodiscard]] const CsrMatrix& mass() const { return mass_; }
  [[nodiscard]] const CsrMatrix& stiffness() const { return stiffness_; }
  /// Integral of each basis function.
  [[nodiscard]] std::span<const double> basis_integrals() const { return basis_integrals_; }
  /// Phi-block indices fixed to zero.
  [[nodiscard]] std::span<const int> dirichlet_dofs() const { return dirichlet_; }

  /// Replace the Dirichlet entries of the Phi block by zero.
  void apply_dirichlet(std::span<double> U) const;

  /// Solves M c = b with b_j = int N_j g.
  [[nodiscard]] std::vector<double> l2_project(const std::function<double(double, double)>& g) const;

  /// Galerkin residual R(U-dot_{n+alpha_m}, U_{n+alpha_f}). Dirichlet rows
  /// of R_phi hold the constrained value itself. Throws std::runtime_error
  /// naming the element when a quadrature value is not finite.
  void assemble_residual(const StageValues& stage, const ExternalInputs& in, std::span<double> R,
                         const SourceTerm* source = nullptr) const;
  void assemble_residual_serial(const StageValues& stage, const ExternalInputs& in,
                                std::span<double> R, const SourceTerm* source = nullptr) const;

  /// Empty monolithic matrix with the coupled sparsity pattern.
  [[nodiscard]] CsrMatrix jacobian_pattern() const;
  /// Fills J (from jacobian_pattern()) with the analytic tangent.
  void assemble_jacobian(const StageValues& stage, const ExternalInputs& in,
                         const TangentCoefficients& tc, CsrMatrix& J) const;
  void assemble_jacobian_serial(const StageValues& stage, const ExternalInputs& in,
                                const TangentCoefficients& tc, CsrMatrix& J) const;

 private:
  struct ElementFields;
  void evaluate_element(int element, std::span<const double> value, ElementFields& out) const;
  void check_finite(int bad_element) const;

  SplineSpace2D space_;
  ModelParameters params_;
  CsrMatrix mass_;
  CsrMatrix stiffness_;
  std::vector<double> basis_integrals_;
  std::vector<int> dirichlet_;
  std::vector<std::uint8_t> dirichlet_mask_;
  /// Scalar CSR position of local pair (a, b) for every element: [e*81 + a*9 + b].
  std::vector<std::int32_t> element_positions_;
  /// Elements grouped by colour.
  std::array<std::vector<int>, 9> colours_;
};

}  // namespace tumorsim
