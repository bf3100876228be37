#include <doctest.h>

#include <cmath>

#include "tumorsim/verification.hpp"

using namespace tumorsim;
using namespace tumorsim::verification;

TEST_CASE("manufactured solutions") {
  const auto p = default_parameters();
  SUBCASE("trigonometric fields satisfy the boundary conditions") {
    CHECK_NOTHROW(check_compatibility(trigonometric_solution(100.0), 100.0));
  }
  SUBCASE("incompatible fields are rejected") {
    auto m = trigonometric_solution(100.0);
    m.fields[0].value = [](double, double, double) { return 0.1; };
    CHECK_THROWS_AS(check_compatibility(m, 100.0), std::invalid_argument);
    auto n = trigonometric_solution(100.0);
    n.fields[1].gradient = [](double, double, double) { return std::array<double, 2>{0.3, 0.0}; };
    CHECK_THROWS_AS(check_compatibility(n, 100.0), std::invalid_argument);
  }
  SUBCASE("equilibrium needs no forcing") {
    const auto f = manufactured_forcing(equilibrium_solution(p), p);
    for (double x : {0.0, 30.0, 100.0})
      for (double t : {0.0, 1.5}) {
        const auto v = f(x, 50.0, t);
        for (double c : v) CHECK(std::abs(c) < 1e-15);
      }
    MmsOptions o;
    CHECK(mms_error_growth(equilibrium_solution(p), o, 8, 0.1, 1.0) < 1e-12);
  }
  SUBCASE("forcing reproduces a pointwise residual") {
    // with the exact fields plugged in, phi_t - lambda lap phi + G' = f_phi
    const auto m = trigonometric_solution(100.0);
    const auto f = manufactured_forcing(m, p);
    const double x = 31.0, y = 58.0, t = 0.7;
    const double phi = m.fields[0].value(x, y, t), sigma = m.fields[1].value(x, y, t);
    const double lhs = m.fields[0].time_derivative(x, y, t) - p.lambda * m.fields[0].laplacian(x, y, t) +
                       dG_dphi(phi, sigma, m.u(t), p);
    CHECK(f(x, y, t)[0] == doctest::Approx(lhs).epsilon(1e-12));
  }
}

TEST_CASE("order fit") {
  std::vector<ConvergencePoint> pts{{0.4, 1.6e-3}, {0.2, 4e-4}, {0.1, 1e-4}, {0.05, 1e-13, true}};
  CHECK(fit_order(pts) == doctest::Approx(2.0).epsilon(1e-12));
  pts[2].error = 1.5e-4;
  CHECK(fit_order(pts) != doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("dense oracle agrees on a small grid") {
  const auto p = default_parameters();
  const Discretization disc(SplineSpace2D(3000.0, 4), p);
  std::mt19937_64 rng(31);
  const auto pt = random_step_point(disc, rng);
  const DrugInputs drugs{[](double) { return 0.3; }, [](double) { return 0.2; }};
  const auto cmp = dense_oracle_step(p, 3000.0, 4, pt.start, drugs, 0.1, 0.5, {1e-12, 30, 1e-15}, {1e-13, 2000, 0});
  CHECK(cmp.max_diff() < 1e-8);
  // loose production controls leave a visible gap
  const auto loose = dense_oracle_step(p, 3000.0, 4, pt.start, drugs, 0.1, 0.5, {1e-3, 30, 1e-12}, {1e-3, 2000, 0});
  CHECK(loose.max_diff() >= cmp.max_diff());
}

TEST_CASE("zero perturbation gives zero difference") {
  auto s = preset("mild/reference/none");
  DependenceOptions o;
  o.elements = 8;
  o.horizon = 0.5;
  o.deltas = {0.0};
  const auto r = continuous_dependence_probe(s, o);
  REQUIRE(r.points.size() == 1);
  CHECK(r.points[0].sup_difference == 0.0);
}

TEST_CASE("report formatting") {
  const std::vector<ReportRow> rows{{"jacobian", "max_error", 1.5e-7, "< 1e-05", true},
                                    {"oracle", "max_diff", 2.0, "< 1e-08", false}};
  const auto text = format_report(rows);
  CHECK(text.substr(0, text.find('\n')) == "suite,metric,value,criterion,passed");
  CHECK(text.find("oracle,max_diff,2,< 1e-08,0") != std::string::npos);
  CHECK_THROWS_AS(run_suite("nonsense"), std::invalid_argument);
  CHECK(suite_names().size() >= 5);
}
