#include "tumorsim/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tumorsim {

namespace {

constexpr int kMaxQ = 8;  // quadrature points per direction supported by the fast kernels

// Scalar pattern: basis i and j interact iff their supports overlap, i.e.
// |ix - jx| <= 2 and |iy - jy| <= 2.
CsrMatrix scalar_pattern(int n1) {
  const int n = n1 * n1;
  std::vector<std::int64_t> rp{0};
  std::vector<int> ci;
  ci.reserve(static_cast<std::size_t>(n) * 25);
  for (int iy = 0; iy < n1; ++iy)
    for (int ix = 0; ix < n1; ++ix) {
      for (int jy = std::max(0, iy - 2); jy <= std::min(n1 - 1, iy + 2); ++jy)
        for (int jx = std::max(0, ix - 2); jx <= std::min(n1 - 1, ix + 2); ++jx)
          ci.push_back(jx + n1 * jy);
      rp.push_back(static_cast<std::int64_t>(ci.size()));
    }
  std::vector<double> v(ci.size(), 0.0);
  return {n, std::move(rp), std::move(ci), std::move(v)};
}

}  // namespace

struct Discretization::ElementFields {
  int nq = 0;
  std::array<double, kMaxQ * kMaxQ> phi{}, sigma{}, psa{};
};

Discretization::Discretization(SplineSpace2D space, ModelParameters params)
    : space_(std::move(space)), params_(params) {
  if (space_.quad_per_dir() > kMaxQ)
    throw std::invalid_argument("Discretization: too many quadrature points per direction");
  const int n1 = space_.basis_per_direction();
  const int n_el = space_.elements_per_side();
  const int nq = space_.quad_per_dir();
  mass_ = scalar_pattern(n1);
  stiffness_ = scalar_pattern(n1);

  element_positions_.resize(static_cast<std::size_t>(space_.num_elements()) * 81);
  for (int e = 0; e < space_.num_elements(); ++e) {
    const auto dofs = space_.element_dofs(e);
    for (int a = 0; a < 9; ++a)
      for (int b = 0; b < 9; ++b)
        element_positions_[static_cast<std::size_t>(e) * 81 + a * 9 + b] =
            static_cast<std::int32_t>(mass_.find(dofs[a], dofs[b]));
  }

  auto mv = mass_.values();
  auto kv = stiffness_.values();
  for (int ey = 0; ey < n_el; ++ey)
    for (int ex = 0; ex < n_el; ++ex) {
      const int e = space_.element_index(ex, ey);
      for (int qy = 0; qy < nq; ++qy)
        for (int qx = 0; qx < nq; ++qx) {
          const double w = space_.quad_weight(qx, qy);
          std::array<double, 9> N{}, Nx{}, Ny{};
          for (int by = 0; by < 3; ++by)
            for (int bx = 0; bx < 3; ++bx) {
              const int a = bx + 3 * by;
              N[a] = space_.table_value(ex, qx, bx) * space_.table_value(ey, qy, by);
              Nx[a] = space_.table_derivative(ex, qx, bx) * space_.table_value(ey, qy, by);
              Ny[a] = space_.table_value(ex, qx, bx) * space_.table_derivative(ey, qy, by);
            }
          for (int a = 0; a < 9; ++a)
            for (int b = 0; b < 9; ++b) {
              const auto pos = element_positions_[static_cast<std::size_t>(e) * 81 + a * 9 + b];
              mv[pos] += N[a] * N[b] * w;
              kv[pos] += (Nx[a] * Nx[b] + Ny[a] * Ny[b]) * w;
            }
        }
    }

  basis_integrals_.assign(field_size(), 0.0);
  for (int i = 0; i < field_size(); ++i)
    for (auto k = mass_.row_ptr()[i]; k < mass_.row_ptr()[i + 1]; ++k) basis_integrals_[i] += mv[k];

  dirichlet_ = space_.boundary_dofs();
  dirichlet_mask_.assign(space_.boundary_mask().begin(), space_.boundary_mask().end());

  for (int ey = 0; ey < n_el; ++ey)
    for (int ex = 0; ex < n_el; ++ex) colours_[(ex % 3) + 3 * (ey % 3)].push_back(space_.element_index(ex, ey));
}

void Discretization::apply_dirichlet(std::span<double> U) const {
  for (int j : dirichlet_) U[j] = 0.0;
}

std::vector<double> Discretization::l2_project(const std::function<double(double, double)>& g) const {
  const int n_el = space_.elements_per_side();
  const int nq = space_.quad_per_dir();
  std::vector<double> b(field_size(), 0.0);
  for (int ey = 0; ey < n_el; ++ey)
    for (int ex = 0; ex < n_el; ++ex) {
      const auto dofs = space_.element_dofs(space_.element_index(ex, ey));
      for (int qy = 0; qy < nq; ++qy)
        for (int qx = 0; qx < nq; ++qx) {
          const double gw =
              g(space_.quad_coordinate(ex, qx), space_.quad_coordinate(ey, qy)) * space_.quad_weight(qx, qy);
          for (int by = 0; by < 3; ++by)
            for (int bx = 0; bx < 3; ++bx)
              b[dofs[bx + 3 * by]] += space_.table_value(ex, qx, bx) * space_.table_value(ey, qy, by) * gw;
        }
    }
  std::vector<double> c(field_size(), 0.0);
  const JacobiPreconditioner prec(mass_);
  const auto report = gmres_solve(mass_, b, c, prec, {.tolerance = 1e-14, .max_iterations = 4000, .restart = 100});
  if (!report.converged && report.final_residual > 1e-12 * report.initial_residual)
    throw LinearSolveFailure("l2_project: mass-matrix solve did not converge (relative residual " +
                             std::to_string(report.final_residual / report.initial_residual) + ")");
  return c;
}

void Discretization::evaluate_element(int element, std::span<const double> value, ElementFields& out) const {
  const int n_el = space_.elements_per_side();
  const int ex = element % n_el;
  const int ey = element / n_el;
  const int nq = space_.quad_per_dir();
  const int n1 = space_.basis_per_direction();
  const int n = field_size();
  out.nq = nq;
  auto eval = [&](const double* coeff, std::array<double, kMaxQ * kMaxQ>& dst) {
    // contract x first: t[b][qx] = sum_a c[a, b] Nx(qx, a)
    double t[3][kMaxQ];
    for (int b = 0; b < 3; ++b) {
      const double* row = coeff + (ex + n1 * (ey + b));
      for (int qx = 0; qx < nq; ++qx)
        t[b][qx] = row[0] * space_.table_value(ex, qx, 0) + row[1] * space_.table_value(ex, qx, 1) +
                   row[2] * space_.table_value(ex, qx, 2);
    }
    for (int qy = 0; qy < nq; ++qy) {
      const double y0 = space_.table_value(ey, qy, 0);
      const double y1 = space_.table_value(ey, qy, 1);
      const double y2 = space_.table_value(ey, qy, 2);
      for (int qx = 0; qx < nq; ++qx) dst[qx + nq * qy] = t[0][qx] * y0 + t[1][qx] * y1 + t[2][qx] * y2;
    }
  };
  eval(value.data(), out.phi);
  eval(value.data() + n, out.sigma);
  eval(value.data() + 2 * static_cast<std::ptrdiff_t>(n), out.psa);
}

void Discretization::check_finite(int bad_element) const {
  if (bad_element < 0) return;
  const int n_el = space_.elements_per_side();
  throw std::runtime_error("assembly: non-finite field or reaction value in element (" +
                           std::to_string(bad_element % n_el) + ", " + std::to_string(bad_element / n_el) +
                           ")");
}

void Discretization::assemble_residual(const StageValues& stage, const ExternalInputs& in, std::span<double> R,
                                       const SourceTerm* source) const {
  const int n = field_size();
  if (static_cast<int>(R.size()) != 3 * n || static_cast<int>(stage.rate.size()) != 3 * n ||
      static_cast<int>(stage.value.size()) != 3 * n)
    throw std::invalid_argument("assemble_residual: size mismatch");
  const auto& p = params_;

  // Linear part: M * rate + kappa * K * value per field (M and K share one pattern).
  {
    const auto rp = mass_.row_ptr();
    const auto ci = mass_.col_idx();
    const auto mv = mass_.values();
    const auto kv = stiffness_.values();
    const std::array<double, 3> kappa{p.lambda, p.eta, p.D_psa};
    const double* rate = stage.rate.data();
    const double* value = stage.value.data();
    double* out = R.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      for (int f = 0; f < 3; ++f) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(f) * n;
        double sm = 0.0, sk = 0.0;
        for (auto k = rp[i]; k < rp[i + 1]; ++k) {
          sm += mv[k] * rate[off + ci[k]];
          sk += kv[k] * value[off + ci[k]];
        }
        out[off + i] = sm + kappa[f] * sk;
      }
    }
  }

  // Reaction and source terms by quadrature, colour by colour.
  const int n_el = space_.elements_per_side();
  const int nq = space_.quad_per_dir();
  const int n1 = space_.basis_per_direction();
  const double h2 = space_.element_size() * space_.element_size();
  const auto& wts = space_.quadrature().weights;
  int bad_element = -1;
  for (const auto& colour : colours_) {
    const int count = static_cast<int>(colour.size());
#pragma omp parallel for schedule(static)
    for (int idx = 0; idx < count; ++idx) {
      const int e = colour[idx];
      const int ex = e % n_el;
      const int ey = e / n_el;
      ElementFields fields;
      evaluate_element(e, stage.value, fields);
      std::array<std::array<double, kMaxQ * kMaxQ>, 3> g{};
      bool finite = true;
      for (int qy = 0; qy < nq; ++qy)
        for (int qx = 0; qx < nq; ++qx) {
          const int q = qx + nq * qy;
          const double phi = fields.phi[q], sigma = fields.sigma[q], psa = fields.psa[q];
          double g0 = dG_dphi(phi, sigma, in.u, p);
          double g1 = -nutrient_reaction(phi, sigma, in.s, p);
          double g2 = -psa_reaction(phi, psa, p);
          if (source) {
            const auto f = (*source)(space_.quad_coordinate(ex, qx), space_.quad_coordinate(ey, qy), in.t);
            g0 -= f[0];
            g1 -= f[1];
            g2 -= f[2];
          }
          const double w = wts[qx] * wts[qy] * h2;
          g[0][q] = g0 * w;
          g[1][q] = g1 * w;
          g[2][q] = g2 * w;
          finite = finite && std::isfinite(g0) && std::isfinite(g1) && std::isfinite(g2);
        }
      if (!finite) {
#pragma omp critical(tumorsim_bad_element)
        if (bad_element < 0 || e < bad_element) bad_element = e;
        continue;
      }
      for (int f = 0; f < 3; ++f) {
        double t[kMaxQ][3];
        for (int qy = 0; qy < nq; ++qy)
          for (int a = 0; a < 3; ++a) {
            double s = 0.0;
            for (int qx = 0; qx < nq; ++qx) s += space_.table_value(ex, qx, a) * g[f][qx + nq * qy];
            t[qy][a] = s;
          }
        double* out = R.data() + static_cast<std::ptrdiff_t>(f) * n;
        for (int b = 0; b < 3; ++b) {
          double* row = out + (ex + n1 * (ey + b));
          for (int a = 0; a < 3; ++a) {
            double s = 0.0;
            for (int qy = 0; qy < nq; ++qy) s += space_.table_value(ey, qy, b) * t[qy][a];
            row[a] += s;
          }
        }
      }
    }
  }
  check_finite(bad_element);

  for (int j : dirichlet_) R[j] = stage.value[j];
}

void Discretization::assemble_residual_serial(const StageValues& stage, const ExternalInputs& in,
                                              std::span<double> R, const SourceTerm* source) const {
  const int n = field_size();
  if (static_cast<int>(R.size()) != 3 * n) throw std::invalid_argument("assemble_residual_serial: size mismatch");
  const auto& p = params_;
  const auto& rule = space_.quadrature();
  const int nq = rule.size();
  const double h = space_.element_size();
  const std::array<double, 3> kappa{p.lambda, p.eta, p.D_psa};
  std::fill(R.begin(), R.end(), 0.0);

  for (int e = 0; e < space_.num_elements(); ++e) {
    const auto dofs = space_.element_dofs(e);
    const int ex = e % space_.elements_per_side();
    const int ey = e / space_.elements_per_side();
    for (int qy = 0; qy < nq; ++qy)
      for (int qx = 0; qx < nq; ++qx) {
        const BasisEval be = space_.eval_basis(e, rule.points[qx], rule.points[qy]);
        const double w = rule.weights[qx] * rule.weights[qy] * h * h;
        std::array<double, 3> val{}, rate{}, gx{}, gy{};
        for (int f = 0; f < 3; ++f)
          for (int a = 0; a < 9; ++a) {
            const auto j = static_cast<std::size_t>(f) * n + dofs[a];
            val[f] += stage.value[j] * be.value[a];
            rate[f] += stage.rate[j] * be.value[a];
            gx[f] += stage.value[j] * be.dx[a];
            gy[f] += stage.value[j] * be.dy[a];
          }
        std::array<double, 3> react{dG_dphi(val[0], val[1], in.u, p), -nutrient_reaction(val[0], val[1], in.s, p),
                                    -psa_reaction(val[0], val[2], p)};
        if (source) {
          const double x = (ex + rule.points[qx]) * h;
          const double y = (ey + rule.points[qy]) * h;
          const auto f = (*source)(x, y, in.t);
          for (int k = 0; k < 3; ++k) react[k] -= f[k];
        }
        for (int k = 0; k < 3; ++k)
          if (!std::isfinite(react[k])) check_finite(e);
        for (int f = 0; f < 3; ++f)
          for (int a = 0; a < 9; ++a)
            R[static_cast<std::size_t>(f) * n + dofs[a]] +=
                (be.value[a] * (rate[f] + react[f]) + kappa[f] * (be.dx[a] * gx[f] + be.dy[a] * gy[f])) * w;
      }
  }
  for (int j : dirichlet_) R[j] = stage.value[j];
}

// Monolithic layout: scalar row i with scalar range [s_i, s_{i+1}) of length
// k_i owns, in block row b, positions b*2*nnz + 2*s_i + [0, 2*k_i): first
// the Phi columns, then the Sigma (b = 0, 1) or P (b = 2) columns.
CsrMatrix Discretization::jacobian_pattern() const {
  const int n = field_size();
  const auto srp = mass_.row_ptr();
  const auto sci = mass_.col_idx();
  const std::int64_t nnz = mass_.nnz();
  std::vector<std::int64_t> rp(3 * static_cast<std::size_t>(n) + 1);
  std::vector<int> ci(static_cast<std::size_t>(6 * nnz));
  rp[0] = 0;
  for (int b = 0; b < 3; ++b) {
    const int second = b == 2 ? 2 : 1;
    for (int i = 0; i < n; ++i) {
      const std::int64_t k = srp[i + 1] - srp[i];
      const std::int64_t base = b * 2 * nnz + 2 * srp[i];
      for (std::int64_t q = 0; q < k; ++q) {
        ci[base + q] = sci[srp[i] + q];
        ci[base + k + q] = second * n + sci[srp[i] + q];
      }
      rp[static_cast<std::size_t>(b) * n + i + 1] = base + 2 * k;
    }
  }
  return {3 * n, std::move(rp), std::move(ci), std::vector<double>(static_cast<std::size_t>(6 * nnz), 0.0)};
}

void Discretization::assemble_jacobian(const StageValues& stage, const ExternalInputs& in,
                                       const TangentCoefficients& tc, CsrMatrix& J) const {
  const int n = field_size();
  const std::int64_t nnz = mass_.nnz();
  if (J.rows() != 3 * n || J.nnz() != 6 * nnz)
    throw std::invalid_argument("assemble_jacobian: matrix does not have the coupled pattern");
  const auto& p = params_;
  const int n_el = space_.elements_per_side();
  const int nq = space_.quad_per_dir();
  const double h2 = space_.element_size() * space_.element_size();
  const auto& wts = space_.quadrature().weights;

  // Weighted scalar mass matrices of the reaction linearisation.
  std::vector<double> w_pp(nnz, 0.0), w_ps(nnz, 0.0), w_sp(nnz, 0.0), w_ss(nnz, 0.0);
  int bad_element = -1;
  for (const auto& colour : colours_) {
    const int count = static_cast<int>(colour.size());
#pragma omp parallel for schedule(static)
    for (int idx = 0; idx < count; ++idx) {
      const int e = colour[idx];
      const int ex = e % n_el;
      const int ey = e / n_el;
      ElementFields fields;
      evaluate_element(e, stage.value, fields);
      double loc[4][81] = {};
      bool finite = true;
      for (int qy = 0; qy < nq; ++qy)
        for (int qx = 0; qx < nq; ++qx) {
          const int q = qx + nq * qy;
          const double phi = fields.phi[q], sigma = fields.sigma[q];
          const double w = wts[qx] * wts[qy] * h2;
          const double c_pp = d2G_dphi2(phi, sigma, in.u, p) * w;
          const double c_ps = d2G_dphi_dsigma(phi, sigma, p) * w;
          const double c_sp = ((p.gamma_c - p.gamma_h) * sigma + p.S_h - (p.S_c - in.s)) * w;
          const double c_ss = (p.gamma_h * (1.0 - phi) + p.gamma_c * phi) * w;
          finite = finite && std::isfinite(c_pp) && std::isfinite(c_ps) && std::isfinite(c_sp);
          double N[9];
          for (int by = 0; by < 3; ++by)
            for (int bx = 0; bx < 3; ++bx)
              N[bx + 3 * by] = space_.table_value(ex, qx, bx) * space_.table_value(ey, qy, by);
          for (int a = 0; a < 9; ++a)
            for (int b = 0; b < 9; ++b) {
              const double nn = N[a] * N[b];
              loc[0][a * 9 + b] += c_pp * nn;
              loc[1][a * 9 + b] += c_ps * nn;
              loc[2][a * 9 + b] += c_sp * nn;
              loc[3][a * 9 + b] += c_ss * nn;
            }
        }
      if (!finite) {
#pragma omp critical(tumorsim_bad_element)
        if (bad_element < 0 || e < bad_element) bad_element = e;
        continue;
      }
      const std::int32_t* pos = element_positions_.data() + static_cast<std::size_t>(e) * 81;
      for (int k = 0; k < 81; ++k) {
        w_pp[pos[k]] += loc[0][k];
        w_ps[pos[k]] += loc[1][k];
        w_sp[pos[k]] += loc[2][k];
        w_ss[pos[k]] += loc[3][k];
      }
    }
  }
  check_finite(bad_element);

  const double am = tc.mass_coeff;
  const double c = tc.stiffness_coeff;
  const auto srp = mass_.row_ptr();
  const auto sci = mass_.col_idx();
  const auto mv = mass_.values();
  const auto kv = stiffness_.values();
  auto jv = J.values();
  const std::uint8_t* mask = dirichlet_mask_.data();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const std::int64_t k = srp[i + 1] - srp[i];
    const bool fixed_row = mask[i] != 0;
    for (std::int64_t q = 0; q < k; ++q) {
      const std::int64_t s = srp[i] + q;
      const int col = sci[s];
      const bool fixed_col = mask[col] != 0;
      // Phi rows
      double* r0 = jv.data() + 2 * srp[i];
      if (fixed_row) {
        r0[q] = col == i ? 1.0 : 0.0;
        r0[k + q] = 0.0;
      } else {
        r0[q] = fixed_col ? 0.0 : am * mv[s] + c * (p.lambda * kv[s] + w_pp[s]);
        r0[k + q] = c * w_ps[s];
      }
      // Sigma rows
      double* r1 = jv.data() + 2 * nnz + 2 * srp[i];
      r1[q] = fixed_col ? 0.0 : c * w_sp[s];
      r1[k + q] = am * mv[s] + c * (p.eta * kv[s] + w_ss[s]);
      // P rows
      double* r2 = jv.data() + 4 * nnz + 2 * srp[i];
      r2[q] = fixed_col ? 0.0 : c * (p.alpha_h - p.alpha_c) * mv[s];
      r2[k + q] = am * mv[s] + c * (p.D_psa * kv[s] + p.gamma_p * mv[s]);
    }
  }
}

void Discretization::assemble_jacobian_serial(const StageValues& stage, const ExternalInputs& in,
                                              const TangentCoefficients& tc, CsrMatrix& J) const {
  const int n = field_size();
  const auto& p = params_;
  const auto& rule = space_.quadrature();
  const int nq = rule.size();
  const double h = space_.element_size();
  const double am = tc.mass_coeff;
  const double c = tc.stiffness_coeff;
  auto jv = J.values();
  std::fill(jv.begin(), jv.end(), 0.0);
  auto add = [&](int row, int col, double v) {
    const auto k = J.find(row, col);
    if (k < 0) throw std::logic_error("assemble_jacobian_serial: entry outside pattern");
    jv[k] += v;
  };
  for (int e = 0; e < space_.num_elements(); ++e) {
    const auto dofs = space_.element_dofs(e);
    for (int qy = 0; qy < nq; ++qy)
      for (int qx = 0; qx < nq; ++qx) {
        const BasisEval be = space_.eval_basis(e, rule.points[qx], rule.points[qy]);
        const double w = rule.weights[qx] * rule.weights[qy] * h * h;
        double phi = 0.0, sigma = 0.0;
        for (int a = 0; a < 9; ++a) {
          phi += stage.value[dofs[a]] * be.value[a];
          sigma += stage.value[n + dofs[a]] * be.value[a];
        }
        const double d_pp = d2G_dphi2(phi, sigma, in.u, p);
        const double d_ps = d2G_dphi_dsigma(phi, sigma, p);
        const double d_sp = (p.gamma_c - p.gamma_h) * sigma + p.S_h - (p.S_c - in.s);
        const double d_ss = p.gamma_h * (1.0 - phi) + p.gamma_c * phi;
        for (int a = 0; a < 9; ++a)
          for (int b = 0; b < 9; ++b) {
            const double nn = be.value[a] * be.value[b] * w;
            const double gg = (be.dx[a] * be.dx[b] + be.dy[a] * be.dy[b]) * w;
            const int i = dofs[a], j = dofs[b];
            add(i, j, am * nn + c * (p.lambda * gg + d_pp * nn));
            add(i, n + j, c * d_ps * nn);
            add(n + i, j, c * d_sp * nn);
            add(n + i, n + j, am * nn + c * (p.eta * gg + d_ss * nn));
            add(2 * n + i, j, c * (p.alpha_h - p.alpha_c) * nn);
            add(2 * n + i, 2 * n + j, am * nn + c * (p.D_psa * gg + p.gamma_p * nn));
          }
      }
  }
  J.constrain(dirichlet_);
}

}  // namespace tumorsim
