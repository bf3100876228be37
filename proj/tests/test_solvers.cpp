#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "tumorsim/gmres.hpp"
#include "tumorsim/scenario.hpp"
#include "tumorsim/sparse.hpp"
#include "tumorsim/time_integration.hpp"

using namespace tumorsim;

namespace {

std::vector<double> random_vector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Sparse random matrix with a dominant diagonal.
CsrMatrix random_matrix(int n, std::mt19937_64& rng, double diag = 4.0, double fill = 0.2) {
  std::uniform_real_distribution<double> d(-1.0, 1.0), coin(0.0, 1.0);
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i == j) a[i * n + j] = diag + d(rng);
      else if (coin(rng) < fill) a[i * n + j] = d(rng);
  return CsrMatrix::from_dense(n, a);
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

TEST_CASE("sparse matrix basics") {
  const auto I = CsrMatrix::identity(5);
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spmv(I, x) == x);
  CHECK_THROWS(CsrMatrix(2, {0, 2, 3}, {1, 0, 1}, {1.0, 2.0, 3.0}));  // unsorted row
  CHECK_THROWS(CsrMatrix(2, {0, 1}, {0}, {1.0}));                      // short row_ptr

  std::mt19937_64 rng(21);
  const int n = 40;
  const auto A = random_matrix(n, rng);
  const auto dense = A.to_dense();
  const auto v = random_vector(n, rng), w = random_vector(n, rng);
  const auto y = spmv(A, v);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += dense[i * n + j] * v[j];
    CHECK(y[i] == doctest::Approx(s).epsilon(1e-14).scale(1e-14));
  }
  SUBCASE("zero vector") {
    for (double z : spmv(A, std::vector<double>(n, 0.0))) CHECK(z == 0.0);
  }
  SUBCASE("linearity") {
    std::vector<double> c(n);
    for (int i = 0; i < n; ++i) c[i] = 2.5 * v[i] - 0.75 * w[i];
    const auto yc = spmv(A, c), yw = spmv(A, w);
    for (int i = 0; i < n; ++i) CHECK(yc[i] == doctest::Approx(2.5 * y[i] - 0.75 * yw[i]).scale(1e-13));
  }
  SUBCASE("parallel equals serial") {
    std::vector<double> a(n), b(n);
    spmv(A, v, a);
    spmv_serial(A, v, b);
    CHECK(a == b);
  }
  SUBCASE("constrain") {
    auto B = A;
    const std::vector<int> dofs{0, 7};
    B.constrain(dofs);
    for (int j = 0; j < n; ++j) {
      CHECK(B.at(0, j) == (j == 0 ? 1.0 : 0.0));
      CHECK(B.at(j, 7) == (j == 7 ? 1.0 : 0.0));
    }
    CHECK(B.at(3, 4) == A.at(3, 4));
  }
}

TEST_CASE("Jacobi preconditioner") {
  const auto D = CsrMatrix::from_dense(3, std::vector<double>{2, 1, 0, 0, 4, 0, 1, 0, -8});
  const JacobiPreconditioner P(D);
  std::vector<double> z(3);
  P.apply(std::vector<double>{1, 1, 1}, z);
  CHECK(z == std::vector<double>{0.5, 0.25, -0.125});
  try {
    JacobiPreconditioner bad(CsrMatrix::from_dense(3, std::vector<double>{1, 0, 0, 1, 0, 0, 0, 0, 1}));
    FAIL("expected ZeroDiagonal");
  } catch (const ZeroDiagonal& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("GMRES") {
  std::mt19937_64 rng(22);
  SUBCASE("identity converges in one iteration") {
    const auto I = CsrMatrix::identity(30);
    const auto b = random_vector(30, rng);
    std::vector<double> x(30, 0.0);
    const auto r = gmres_solve(I, b, x, JacobiPreconditioner(I), {1e-12, 10, 0});
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    for (int i = 0; i < 30; ++i) CHECK(x[i] == doctest::Approx(b[i]));
  }
  SUBCASE("SPD system recovers a known solution") {
    const int n = 50;
    const auto A0 = random_matrix(n, rng, 0.0, 0.3);
    const auto d0 = A0.to_dense();
    std::vector<double> spd(n * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) spd[i * n + j] += d0[k * n + i] * d0[k * n + j];
        if (i == j) spd[i * n + j] += 1.0;
      }
    const auto A = CsrMatrix::from_dense(n, spd);
    const auto xs = random_vector(n, rng);
    const auto b = spmv(A, xs);
    std::vector<double> x(n, 0.0);
    const auto r = gmres_solve(A, b, x, JacobiPreconditioner(A), {1e-12, 200, 0});
    CHECK(r.converged);
    for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - xs[i]) < 1e-8);
  }
  SUBCASE("finite termination and agreement with dense LU") {
    const int n = 20;
    const auto A = random_matrix(n, rng, 1.0, 1.0);
    const auto b = random_vector(n, rng);
    std::vector<double> x(n, 0.0);
    const auto r = gmres_solve(A, b, x, JacobiPreconditioner(A), {1e-12, 100, 0});
    CHECK(r.converged);
    CHECK(r.iterations <= n);
    const auto dense = A.to_dense();
    const Eigen::Map<const RowMajor> Ae(dense.data(), n, n);
    const Eigen::VectorXd xe = Ae.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
    for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - xe[i]) < 1e-8 * std::max(1.0, xe.cwiseAbs().maxCoeff()));
    for (std::size_t k = 1; k < r.history.size(); ++k) CHECK(r.history[k] <= r.history[k - 1] * (1 + 1e-12));
  }
  SUBCASE("restarted run still converges") {
    const int n = 60;
    const auto A = random_matrix(n, rng);
    const auto b = random_vector(n, rng);
    std::vector<double> x(n, 0.0);
    const auto r = gmres_solve(A, b, x, JacobiPreconditioner(A), {1e-10, 500, 5});
    CHECK(r.converged);
    std::vector<double> res = spmv(A, x);
    for (int i = 0; i < n; ++i) res[i] -= b[i];
    CHECK(norm2(res) <= 1e-10 * norm2(b) * 1.0001);
    CHECK(r.final_residual == doctest::Approx(norm2(res)).epsilon(1e-6));
  }
  SUBCASE("iteration cap is reported, not thrown") {
    const int n = 80;
    const auto A = random_matrix(n, rng, 0.5, 1.0);
    const auto b = random_vector(n, rng);
    std::vector<double> x(n, 0.0);
    const auto r = gmres_solve(A, b, x, JacobiPreconditioner(A), {1e-14, 3, 0});
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
  }
  SUBCASE("zero right-hand side") {
    const auto A = random_matrix(10, rng);
    std::vector<double> x(10, 0.0);
    const auto r = gmres_solve(A, std::vector<double>(10, 0.0), x, JacobiPreconditioner(A), {});
    CHECK(r.converged);
    for (double v : x) CHECK(v == 0.0);
  }
}

TEST_CASE("generalized-alpha parameters") {
  const auto a = AlphaParams::from_rho_inf(0.5);
  CHECK(a.alpha_m() == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(a.alpha_f() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(a.gamma() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto one = AlphaParams::from_rho_inf(1.0);
  CHECK(one.alpha_m() == 0.5);
  CHECK(one.alpha_f() == 0.5);
  CHECK(one.gamma() == 0.5);
  const auto zero = AlphaParams::from_rho_inf(0.0);
  CHECK(zero.alpha_m() == 1.5);
  CHECK(zero.alpha_f() == 1.0);
  for (double r : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto p = AlphaParams::from_rho_inf(r);
    CHECK(p.gamma() == doctest::Approx(0.5 + p.alpha_m() - p.alpha_f()));
    CHECK(p.alpha_m() >= p.alpha_f());
    CHECK(p.alpha_f() >= 0.5);
  }
  CHECK_THROWS_AS(AlphaParams::from_rho_inf(1.5), std::invalid_argument);
  CHECK_THROWS_AS(AlphaParams::from_rho_inf(-0.1), std::invalid_argument);
}

namespace {

// Dense Newton linear solve for small test problems.
LinearizedSolveFn dense_solver(std::function<void(std::span<const double>, RowMajor&)> jac) {
  return [jac](std::span<const double> x, std::span<const double> r, std::span<double> dx) {
    const int n = static_cast<int>(x.size());
    RowMajor J(n, n);
    jac(x, J);
    const Eigen::VectorXd d = J.partialPivLu().solve(-Eigen::Map<const Eigen::VectorXd>(r.data(), n));
    for (int i = 0; i < n; ++i) dx[i] = d[i];
    return 1;
  };
}

}  // namespace

TEST_CASE("Newton solver") {
  const NewtonControls tight{1e-12, 30, 0.0};
  SUBCASE("affine problem converges in one iteration") {
    const std::vector<ResidualBlock> blocks{{"x", 0, 2, 1.0}};
    std::vector<double> x{0.0, 0.0};
    const auto r = newton_solve([](auto v, auto out) { out[0] = v[0] - 3.0; out[1] = 2.0 * v[1] + v[0]; },
                                dense_solver([](auto, RowMajor& J) { J << 1, 0, 1, 2; }), blocks, x, tight);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(x[0] == doctest::Approx(3.0));
    CHECK(x[1] == doctest::Approx(-1.5));
  }
  SUBCASE("quadratic convergence on x^2 - 4") {
    const std::vector<ResidualBlock> blocks{{"x", 0, 1, 1.0}};
    std::vector<double> x{3.0};
    const auto r = newton_solve([](auto v, auto out) { out[0] = v[0] * v[0] - 4.0; },
                                dense_solver([](auto v, RowMajor& J) { J(0, 0) = 2.0 * v[0]; }), blocks, x, tight);
    CHECK(r.converged);
    CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-14));
    // |r_{k+1}| ~ C |r_k|^2 with C = 1/(4 x*^2) ~ 1/16
    for (std::size_t k = 1; k + 1 < r.history.size(); ++k) {
      const double a = r.history[k - 1][0], b = r.history[k][0];
      if (b > 1e-10) CHECK(b <= 0.2 * a * a);
    }
  }
  SUBCASE("every block must converge") {
    // The first block is large and affine; a global norm would stop after
    // one iteration while the cubic second block is still far off.
    const std::vector<ResidualBlock> blocks{{"big", 0, 1, 1.0}, {"small", 1, 1, 1.0}};
    std::vector<double> x{0.0, 2.0};
    const NewtonControls c{1e-3, 30, 0.0};
    const auto r = newton_solve([](auto v, auto out) { out[0] = 1e6 * (v[0] - 1.0); out[1] = v[1] * v[1] * v[1] - 1.0; },
                                dense_solver([](auto v, RowMajor& J) { J << 1e6, 0, 0, 3.0 * v[1] * v[1]; }), blocks, x,
                                c);
    CHECK(r.converged);
    CHECK(r.iterations > 1);
    CHECK(r.final_norms[1] <= 1e-3 * r.initial_norms[1]);
  }
  SUBCASE("absolute floor accepts an already-converged block") {
    const std::vector<ResidualBlock> blocks{{"x", 0, 1, 1.0}, {"y", 1, 1, 1.0}};
    std::vector<double> x{1.0, 0.0};
    const auto r = newton_solve([](auto v, auto out) { out[0] = v[0] - 1.0; out[1] = v[1] - 5.0; },
                                dense_solver([](auto, RowMajor& J) { J << 1, 0, 0, 1; }), blocks, x,
                                NewtonControls{1e-3, 5, 1e-12});
    CHECK(r.converged);
    CHECK(x[1] == doctest::Approx(5.0));
  }
  SUBCASE("no root raises NewtonDivergence") {
    const std::vector<ResidualBlock> blocks{{"x", 0, 1, 1.0}};
    std::vector<double> x{0.5};
    CHECK_THROWS_AS(newton_solve([](auto v, auto out) { out[0] = v[0] * v[0] + 1.0; },
                                 dense_solver([](auto v, RowMajor& J) { J(0, 0) = 2.0 * v[0]; }), blocks, x,
                                 NewtonControls{1e-3, 8, 0.0}),
                    NewtonDivergence);
  }
}

namespace {

struct Setup {
  Scenario sc;
  Discretization disc;
  Integrator integrator;
  explicit Setup(Scenario s)
      : sc(std::move(s)),
        disc(SplineSpace2D(sc.side, sc.elements), sc.params),
        integrator(disc, AlphaParams::from_rho_inf(sc.rho_inf), {sc.dt, sc.newton, sc.gmres}) {}
};

Scenario small(const std::string& name, int elements, double dt = 0.1) {
  auto s = preset(name);
  s.elements = elements;
  s.dt = dt;
  return s;
}

SystemState healthy_state(const Discretization& d) {
  const auto& p = d.params();
  SystemState st(d.field_size());
  for (auto& v : st.sigma()) v = p.S_h / p.gamma_h;
  for (auto& v : st.psa()) v = p.alpha_h / p.gamma_p;
  return st;
}

}  // namespace

TEST_CASE("healthy equilibrium is preserved") {
  Setup s(small("mild/reference/none", 8));
  auto st = healthy_state(s.disc);
  const auto U0 = st.U;
  for (int k = 0; k < 20; ++k) s.integrator.advance_step(st, {});
  for (std::size_t i = 0; i < U0.size(); ++i) CHECK(std::abs(st.U[i] - U0[i]) < 1e-9);
}

TEST_CASE("uniform PSA relaxation is second order in time") {
  // phi = 0, sigma at equilibrium, p uniform: p(t) = p_inf (1 - e^{-gamma_p t}) + p0 e^{-gamma_p t}
  const auto p = preset("mild/reference/none").params;
  const double pinf = p.alpha_h / p.gamma_p, p0 = 0.0, T = 10.0;
  std::vector<double> errors;
  for (double dt : {1.0, 0.5, 0.25}) {
    Setup s(small("mild/reference/none", 4, dt));
    s.sc.newton = {1e-12, 30, 1e-12};
    const Integrator integ(s.disc, AlphaParams::from_rho_inf(0.5), {dt, s.sc.newton, {1e-13, 200, 0}});
    auto st = healthy_state(s.disc);
    for (auto& v : st.psa()) v = p0;
    integ.initialize_rates(st, {});
    while (st.t < T - 1e-12) integ.advance_step(st, {});
    const double exact = pinf + (p0 - pinf) * std::exp(-p.gamma_p * T);
    double e = 0.0;
    for (double v : st.psa()) e = std::max(e, std::abs(v - exact));
    errors.push_back(e);
  }
  CHECK(errors[0] / errors[1] == doctest::Approx(4.0).epsilon(0.15));
  CHECK(errors[1] / errors[2] == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("run bookkeeping") {
  Setup s(small("mild/reference/none", 4));
  SUBCASE("a full horizon lands exactly on the end time") {
    auto st = healthy_state(s.disc);
    int calls = 0;
    const std::vector<Observer> obs{{1.0, [&](const SystemState&, const RunStats&) { ++calls; }}};
    const auto stats = run_simulation(s.integrator, st, {}, {365.0, {}}, obs);
    CHECK(stats.steps == 3650);
    CHECK(st.t == 365.0);
    CHECK(calls == 366);
  }
  SUBCASE("a breakpoint off the step grid splits the step") {
    auto st = healthy_state(s.disc);
    std::vector<double> stage_times;
    DrugInputs drugs{[&](double t) {
                       stage_times.push_back(t);
                       return t >= 0.55 ? 0.5 : 0.0;
                     },
                     {}};
    const auto stats = run_simulation(s.integrator, st, drugs, {1.0, {0.55}}, {});
    CHECK(stats.steps == 11);
    CHECK(st.t == doctest::Approx(1.0).epsilon(1e-15));
    bool after = false;
    for (double t : stage_times)
      if (t > 0.55 && t < 0.6) after = true;
    CHECK(after);
  }
  SUBCASE("time translation") {
    auto a = healthy_state(s.disc);
    a.U[s.disc.field_size() + 14] = 0.5;  // a nutrient perturbation
    auto b = a;
    b.t = 100.0;
    run_simulation(s.integrator, a, {}, {2.0, {}}, {});
    run_simulation(s.integrator, b, {}, {102.0, {}}, {});
    for (std::size_t i = 0; i < a.U.size(); ++i) CHECK(a.U[i] == doctest::Approx(b.U[i]).epsilon(1e-12).scale(1e-14));
  }
}

TEST_CASE("tumor steps are deterministic and converge quickly") {
  Setup s(small("mild/reference/none", 32));
  auto a = initial_state(s.sc, s.disc);
  auto b = a;
  int worst = 0;
  for (int k = 0; k < 20; ++k) {
    worst = std::max(worst, s.integrator.advance_step(a, {}).newton_iterations);
    s.integrator.advance_step(b, {});
  }
  CHECK(a.U == b.U);
  CHECK(a.Udot == b.Udot);
  CHECK(worst <= 5);
}
