#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "tumorsim/sparse.hpp"

namespace tumorsim {

/// Raised when a Jacobi preconditioner meets a zero diagonal entry.
class ZeroDiagonal : public std::runtime_error {
 public:
  explicit ZeroDiagonal(int index);
  [[nodiscard]] int index() const { return index_; }

 private:
  int index_;
};

/// Raised when an iterative solve that must succeed does not converge.
class LinearSolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Diagonal (Jacobi) preconditioner: z = r / diag(A).
class JacobiPreconditioner {
 public:
  explicit JacobiPreconditioner(const CsrMatrix& A);
  void apply(std::span<const double> r, std::span<double> z) const;
  [[nodiscard]] std::span<const double> inverse_diagonal() const { return inv_diag_; }

 private:
  std::vector<double> inv_diag_;
};

struct GmresControls {
  double tolerance = 1e-3;  ///< relative to the initial residual norm
  int max_iterations = 500;
  int restart = 0;          ///< Krylov dimension per cycle; 0 means no restart
  bool operator==(const GmresControls&) const = default;
};

struct GmresReport {
  bool converged = false;
  bool breakdown = false;  ///< numerical (not happy) breakdown
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;  ///< true residual ||b - A x|| at exit
  std::vector<double> history;  ///< residual norm estimate after each iteration
};

/// Right-preconditioned GMRES with modified Gram-Schmidt (plus one
/// reorthogonalisation pass when cancellation is detected). Convergence is
/// ||b - A x|| <= tolerance * ||b - A x0||. Hitting max_iterations returns
/// the best iterate with converged = false rather than throwing.
GmresReport gmres_solve(const CsrMatrix& A, std::span<const double> b, std::span<double> x,
                        const JacobiPreconditioner& M, const GmresControls& controls);

}  // namespace tumorsim
