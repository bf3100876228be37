#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tumorsim {

/// Square matrix in compressed sparse row form. Column indices are sorted
/// and unique within each row.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(int n, std::vector<std::int64_t> row_ptr, std::vector<int> col_idx,
            std::vector<double> values);

  /// Dense row-major input; entries with |a| == 0 are dropped.
  static CsrMatrix from_dense(int n, std::span<const double> dense);
  static CsrMatrix identity(int n);

  [[nodiscard]] int rows() const { return n_; }
  [[nodiscard]] std::int64_t nnz() const { return static_cast<std::int64_t>(col_idx_.size()); }

  [[nodiscard]] std::span<const std::int64_t> row_ptr() const { return row_ptr_; }
  [[nodiscard]] std::span<const int> col_idx() const { return col_idx_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }

  /// Position of (i, j) in the value array, or -1 if structurally zero.
  [[nodiscard]] std::int64_t find(int i, int j) const;
  [[nodiscard]] double at(int i, int j) const;
  [[nodiscard]] std::vector<double> diagonal() const;
  [[nodiscard]] std::vector<double> to_dense() const;

  /// Replaces row i by the unit row e_i and zeroes column i elsewhere.
  void constrain(std::span<const int> dofs);

 private:
  int n_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// y = A x, OpenMP-parallel over rows.
void spmv(const CsrMatrix& A, std::span<const double> x, std::span<double> y);
/// y = A x, straightforward serial loop; reference for the parallel kernel.
void spmv_serial(const CsrMatrix& A, std::span<const double> x, std::span<double> y);
std::vector<double> spmv(const CsrMatrix& A, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace tumorsim
