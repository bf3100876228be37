#include "tumorsim/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tumorsim {

CsrMatrix::CsrMatrix(int n, std::vector<std::int64_t> row_ptr, std::vector<int> col_idx,
                     std::vector<double> values)
    : n_(n), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
  if (static_cast<int>(row_ptr_.size()) != n_ + 1 || row_ptr_.front() != 0 ||
      row_ptr_.back() != static_cast<std::int64_t>(col_idx_.size()) ||
      col_idx_.size() != values_.size())
    throw std::invalid_argument("CsrMatrix: inconsistent storage");
  for (int i = 0; i < n_; ++i)
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (col_idx_[k] < 0 || col_idx_[k] >= n_)
        throw std::invalid_argument("CsrMatrix: column index out of range in row " + std::to_string(i));
      if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1])
        throw std::invalid_argument("CsrMatrix: unsorted or duplicate column in row " + std::to_string(i));
    }
}

CsrMatrix CsrMatrix::from_dense(int n, std::span<const double> dense) {
  if (dense.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("CsrMatrix::from_dense: size mismatch");
  std::vector<std::int64_t> rp{0};
  std::vector<int> ci;
  std::vector<double> v;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = dense[static_cast<std::size_t>(i) * n + j];
      if (a != 0.0) {
        ci.push_back(j);
        v.push_back(a);
      }
    }
    rp.push_back(static_cast<std::int64_t>(ci.size()));
  }
  return {n, std::move(rp), std::move(ci), std::move(v)};
}

CsrMatrix CsrMatrix::identity(int n) {
  std::vector<std::int64_t> rp(n + 1);
  std::vector<int> ci(n);
  for (int i = 0; i <= n; ++i) rp[i] = i;
  for (int i = 0; i < n; ++i) ci[i] = i;
  return {n, std::move(rp), std::move(ci), std::vector<double>(n, 1.0)};
}

std::int64_t CsrMatrix::find(int i, int j) const {
  const auto first = col_idx_.begin() + row_ptr_[i];
  const auto last = col_idx_.begin() + row_ptr_[i + 1];
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return -1;
  return it - col_idx_.begin();
}

double CsrMatrix::at(int i, int j) const {
  const auto k = find(i, j);
  return k < 0 ? 0.0 : values_[k];
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n_);
  for (int i = 0; i < n_; ++i) d[i] = at(i, i);
  return d;
}

std::vector<double> CsrMatrix::to_dense() const {
  std::vector<double> dense(static_cast<std::size_t>(n_) * n_, 0.0);
  for (int i = 0; i < n_; ++i)
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      dense[static_cast<std::size_t>(i) * n_ + col_idx_[k]] = values_[k];
  return dense;
}

void CsrMatrix::constrain(std::span<const int> dofs) {
  std::vector<std::uint8_t> mask(n_, 0);
  for (int d : dofs) mask[d] = 1;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_; ++i) {
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (mask[i])
        values_[k] = col_idx_[k] == i ? 1.0 : 0.0;
      else if (mask[col_idx_[k]])
        values_[k] = 0.0;
    }
  }
}

namespace {
void check_dims(const CsrMatrix& A, std::span<const double> x, std::span<double> y) {
  if (static_cast<int>(x.size()) != A.rows() || static_cast<int>(y.size()) != A.rows())
    throw std::invalid_argument("spmv: dimension mismatch (matrix " + std::to_string(A.rows()) +
                                ", x " + std::to_string(x.size()) + ", y " +
                                std::to_string(y.size()) + ")");
}
}  // namespace

void spmv(const CsrMatrix& A, std::span<const double> x, std::span<double> y) {
  check_dims(A, x, y);
  const auto rp = A.row_ptr();
  const auto ci = A.col_idx();
  const auto v = A.values();
  const int n = A.rows();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (auto k = rp[i]; k < rp[i + 1]; ++k) sum += v[k] * x[ci[k]];
    y[i] = sum;
  }
}

void spmv_serial(const CsrMatrix& A, std::span<const double> x, std::span<double> y) {
  check_dims(A, x, y);
  for (int i = 0; i < A.rows(); ++i) {
    double sum = 0.0;
    for (auto k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
      sum += A.values()[k] * x[A.col_idx()[k]];
    y[i] = sum;
  }
}

std::vector<double> spmv(const CsrMatrix& A, std::span<const double> x) {
  std::vector<double> y(A.rows());
  spmv(A, x, y);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace tumorsim
