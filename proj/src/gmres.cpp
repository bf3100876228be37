#include "tumorsim/gmres.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tumorsim {

ZeroDiagonal::ZeroDiagonal(int index)
    : std::runtime_error("Jacobi preconditioner: zero diagonal at row " + std::to_string(index)),
      index_(index) {}

JacobiPreconditioner::JacobiPreconditioner(const CsrMatrix& A) : inv_diag_(A.diagonal()) {
  for (std::size_t i = 0; i < inv_diag_.size(); ++i) {
    if (inv_diag_[i] == 0.0 || !std::isfinite(inv_diag_[i])) throw ZeroDiagonal(static_cast<int>(i));
    inv_diag_[i] = 1.0 / inv_diag_[i];
  }
}

void JacobiPreconditioner::apply(std::span<const double> r, std::span<double> z) const {
  const auto n = static_cast<std::ptrdiff_t>(inv_diag_.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) z[i] = r[i] * inv_diag_[i];
}

namespace {

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void residual(const CsrMatrix& A, std::span<const double> b, std::span<const double> x,
              std::span<double> r) {
  spmv(A, x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
}

}  // namespace

GmresReport gmres_solve(const CsrMatrix& A, std::span<const double> b, std::span<double> x,
                        const JacobiPreconditioner& M, const GmresControls& controls) {
  const auto n = static_cast<std::size_t>(A.rows());
  if (b.size() != n || x.size() != n) throw std::invalid_argument("gmres_solve: dimension mismatch");
  if (!(controls.tolerance > 0.0) || controls.max_iterations < 1)
    throw std::invalid_argument("gmres_solve: invalid controls");
  const int m = controls.restart > 0 ? std::min(controls.restart, controls.max_iterations)
                                     : controls.max_iterations;

  GmresReport report;
  std::vector<double> r(n), w(n), z(n);
  residual(A, b, x, r);
  double beta = norm2(r);
  report.initial_residual = beta;
  report.final_residual = beta;
  if (beta == 0.0) {
    report.converged = true;
    return report;
  }
  const double target = controls.tolerance * beta;

  std::vector<std::vector<double>> V(m + 1, std::vector<double>(n));
  // Hessenberg columns, rotated in place
  std::vector<std::vector<double>> H(m, std::vector<double>(m + 1, 0.0));
  std::vector<double> cs(m), sn(m), g(m + 1), y(m);

  while (report.iterations < controls.max_iterations) {
    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    int k = 0;
    bool happy = false;
    for (; k < m && report.iterations < controls.max_iterations; ++k) {
      M.apply(V[k], z);
      spmv(A, z, w);
      const double w_before = norm2(w);
      auto& h = H[k];
      std::fill(h.begin(), h.end(), 0.0);
      for (int pass = 0; pass < 2; ++pass) {
        const double start = pass == 0 ? w_before : norm2(w);
        for (int i = 0; i <= k; ++i) {
          const double hij = dot(w, V[i]);
          h[i] += hij;
          axpy(-hij, V[i], w);
        }
        // second pass only when the first one cancelled most of w
        if (norm2(w) > 0.7 * start) break;
      }
      const double hnext = norm2(w);
      h[k + 1] = hnext;
      ++report.iterations;

      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h[i] + sn[i] * h[i + 1];
        h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
        h[i] = t;
      }
      const double denom = std::hypot(h[k], h[k + 1]);
      cs[k] = denom == 0.0 ? 1.0 : h[k] / denom;
      sn[k] = denom == 0.0 ? 0.0 : h[k + 1] / denom;
      h[k] = denom;
      h[k + 1] = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      report.history.push_back(std::abs(g[k + 1]));

      if (hnext <= 1e-14 * w_before) {
        happy = true;
        ++k;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) V[k + 1][i] = w[i] / hnext;
      if (std::abs(g[k + 1]) <= target) {
        ++k;
        break;
      }
    }

    // back substitution on the k x k triangle, then x += M^{-1} V y
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= H[j][i] * y[j];
      y[i] = H[i][i] == 0.0 ? 0.0 : s / H[i][i];
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (int j = 0; j < k; ++j) axpy(y[j], V[j], w);
    M.apply(w, z);
    axpy(1.0, z, x);

    residual(A, b, x, r);
    beta = norm2(r);
    report.final_residual = beta;
    if (beta <= target) {
      report.converged = true;
      return report;
    }
    if (happy) {
      // Krylov space exhausted but the true residual disagrees
      report.breakdown = true;
      return report;
    }
  }
  return report;
}

}  // namespace tumorsim
