#include "reference_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace tumorsim::reference {

namespace {

struct Rule {
  std::vector<double> x;  // on [-1, 1]
  std::vector<double> w;
};

Rule gauss(int n) {
  if (n == 3) return {{-std::sqrt(0.6), 0.0, std::sqrt(0.6)}, {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
  if (n == 5) {
    const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
    const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    return {{-b, -a, 0.0, a, b}, {wb, wa, 128.0 / 225.0, wa, wb}};
  }
  throw std::invalid_argument("reference model: only 3- and 5-point Gauss rules are available");
}

}  // namespace

std::vector<double> clamped_knots(double side, int n_el) {
  std::vector<double> k{0.0, 0.0};
  for (int i = 0; i <= n_el; ++i) k.push_back(side * i / n_el);
  k.push_back(side);
  k.push_back(side);
  return k;
}

double bspline(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) {
    if (t[i] <= x && x < t[i + 1]) return 1.0;
    // closed at the right end so the last functions reach x = t.back()
    return (x == t.back() && t[i] < t[i + 1] && t[i + 1] == t.back()) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  if (t[i + p] > t[i]) left = (x - t[i]) / (t[i + p] - t[i]) * bspline(t, i, p - 1, x);
  if (t[i + p + 1] > t[i + 1]) right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * bspline(t, i + 1, p - 1, x);
  return left + right;
}

double bspline_derivative(const std::vector<double>& t, int i, int p, double x) {
  double d = 0.0;
  if (t[i + p] > t[i]) d += p / (t[i + p] - t[i]) * bspline(t, i, p - 1, x);
  if (t[i + p + 1] > t[i + 1]) d -= p / (t[i + p + 1] - t[i + 1]) * bspline(t, i + 1, p - 1, x);
  return d;
}

ReferenceModel::ReferenceModel(double side, int n_el, ModelParameters params, int gauss_points)
    : side_(side), n_el_(n_el), n1_(n_el + 2), params_(params), knots_(clamped_knots(side, n_el)) {
  const Rule rule = gauss(gauss_points);
  const double h = side / n_el;
  for (int ey = 0; ey < n_el; ++ey)
    for (int ex = 0; ex < n_el; ++ex)
      for (std::size_t qy = 0; qy < rule.x.size(); ++qy)
        for (std::size_t qx = 0; qx < rule.x.size(); ++qx) {
          Point pt;
          pt.x = (ex + 0.5 * (rule.x[qx] + 1.0)) * h;
          pt.y = (ey + 0.5 * (rule.x[qy] + 1.0)) * h;
          pt.w = rule.w[qx] * rule.w[qy] * 0.25 * h * h;
          for (int by = ey; by < ey + 3; ++by)
            for (int bx = ex; bx < ex + 3; ++bx) {
              const double vx = bspline(knots_, bx, 2, pt.x), vy = bspline(knots_, by, 2, pt.y);
              pt.dofs.push_back(bx + n1_ * by);
              pt.n.push_back(vx * vy);
              pt.nx.push_back(bspline_derivative(knots_, bx, 2, pt.x) * vy);
              pt.ny.push_back(vx * bspline_derivative(knots_, by, 2, pt.y));
            }
          points_.push_back(std::move(pt));
        }
}

bool ReferenceModel::on_boundary(int j) const {
  const int jx = j % n1_, jy = j / n1_;
  return jx == 0 || jy == 0 || jx == n1_ - 1 || jy == n1_ - 1;
}

std::vector<double> ReferenceModel::residual(const std::vector<double>& rate, const std::vector<double>& value,
                                             double u, double s) const {
  const int n = field_size();
  const auto& P = params_;
  std::vector<double> R(3 * static_cast<std::size_t>(n), 0.0);

  const double rho = P.K_rho / P.Kbar_rho;
  const double A = -P.K_A / P.Kbar_A;

  for (const auto& pt : points_) {
    double v[3] = {0, 0, 0}, d[3] = {0, 0, 0}, gx[3] = {0, 0, 0}, gy[3] = {0, 0, 0};
    for (std::size_t a = 0; a < pt.dofs.size(); ++a)
      for (int f = 0; f < 3; ++f) {
        const double c = value[f * n + pt.dofs[a]];
        v[f] += c * pt.n[a];
        gx[f] += c * pt.nx[a];
        gy[f] += c * pt.ny[a];
        d[f] += rate[f * n + pt.dofs[a]] * pt.n[a];
      }
    const double phi = v[0], sig = v[1], psa = v[2];
    const double m = P.m_ref * (0.5 * (rho + A) + (rho - A) / std::numbers::pi * std::atan((sig - P.sigma_l) / P.sigma_r));
    const double f = P.mobility * (1.0 - 2.0 * phi - 3.0 * (m - P.m_ref * u));
    const double react[3] = {
        2.0 * phi * (1.0 - phi) * f,
        -(P.S_h * (1.0 - phi) + (P.S_c - s) * phi - (P.gamma_h * (1.0 - phi) + P.gamma_c * phi) * sig),
        -(P.alpha_h * (1.0 - phi) + P.alpha_c * phi - P.gamma_p * psa)};
    const double diff[3] = {P.lambda, P.eta, P.D_psa};
    for (std::size_t a = 0; a < pt.dofs.size(); ++a)
      for (int fld = 0; fld < 3; ++fld)
        R[fld * n + pt.dofs[a]] +=
            pt.w * ((d[fld] + react[fld]) * pt.n[a] + diff[fld] * (gx[fld] * pt.nx[a] + gy[fld] * pt.ny[a]));
  }
  for (int j = 0; j < n; ++j)
    if (on_boundary(j)) R[j] = value[j];
  return R;
}

double ReferenceModel::evaluate(const double* coeffs, double x, double y) const {
  const double h = side_ / n_el_;
  const int ex = std::clamp(static_cast<int>(std::floor(x / h)), 0, n_el_ - 1);
  const int ey = std::clamp(static_cast<int>(std::floor(y / h)), 0, n_el_ - 1);
  double v = 0.0;
  for (int by = ey; by < ey + 3; ++by)
    for (int bx = ex; bx < ex + 3; ++bx)
      v += coeffs[bx + n1_ * by] * bspline(knots_, bx, 2, x) * bspline(knots_, by, 2, y);
  return v;
}

double ReferenceModel::l2_error(const double* coeffs, const std::function<double(double, double)>& exact) const {
  const Rule rule = gauss(5);
  const double h = side_ / n_el_;
  double sum = 0.0;
  for (int ey = 0; ey < n_el_; ++ey)
    for (int ex = 0; ex < n_el_; ++ex)
      for (std::size_t qy = 0; qy < rule.x.size(); ++qy)
        for (std::size_t qx = 0; qx < rule.x.size(); ++qx) {
          const double x = (ex + 0.5 * (rule.x[qx] + 1.0)) * h;
          const double y = (ey + 0.5 * (rule.x[qy] + 1.0)) * h;
          const double e = evaluate(coeffs, x, y) - exact(x, y);
          sum += rule.w[qx] * rule.w[qy] * 0.25 * h * h * e * e;
        }
  return std::sqrt(sum);
}

DenseStep dense_generalized_alpha_step(const ReferenceModel& model, const std::vector<double>& U0,
                                       const std::vector<double>& V0, double t0, double dt, double rho_inf,
                                       const std::function<double(double)>& u,
                                       const std::function<double(double)>& s) {
  const double am = (3.0 - rho_inf) / (2.0 * (1.0 + rho_inf));
  const double af = 1.0 / (1.0 + rho_inf);
  const double gm = 0.5 + am - af;
  const double ts = t0 + af * dt;
  const double us = u ? u(ts) : 0.0;
  const double ss = s ? s(ts) : 0.0;
  const int n = model.system_size();

  auto F = [&](const Eigen::VectorXd& x) {
    std::vector<double> rate(n), value(n);
    for (int i = 0; i < n; ++i) {
      rate[i] = (1.0 - am) * V0[i] + am * x[i];
      const double U1 = U0[i] + dt * ((1.0 - gm) * V0[i] + gm * x[i]);
      value[i] = (1.0 - af) * U0[i] + af * U1;
    }
    const auto r = model.residual(rate, value, us, ss);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), n));
  };

  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = (gm - 1.0) / gm * V0[i];

  DenseStep out;
  Eigen::MatrixXd J(n, n);
  for (out.iterations = 0; out.iterations < 30; ++out.iterations) {
    const Eigen::VectorXd r = F(x);
    for (int k = 0; k < n; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      J.col(k) = (F(xp) - F(xm)) / (2.0 * h);
    }
    const Eigen::VectorXd dx = J.partialPivLu().solve(-r);
    x += dx;
    out.final_update = dx.lpNorm<Eigen::Infinity>();
    if (out.final_update <= 1e-14 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      ++out.iterations;
      break;
    }
  }

  out.U.resize(n);
  out.Udot.resize(n);
  for (int i = 0; i < n; ++i) {
    out.Udot[i] = x[i];
    out.U[i] = U0[i] + dt * ((1.0 - gm) * V0[i] + gm * x[i]);
  }
  return out;
}

}  // namespace tumorsim::reference
