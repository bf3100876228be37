#include "tumorsim/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "reference_model.hpp"
#include "tumorsim/observables.hpp"

namespace tumorsim::verification {

ModelParameters default_parameters() { return preset("mild/reference/none").params; }

// ---------------------------------------------------------------- tangent

namespace {

// Generalized-alpha stage (rate at n + alpha_m, value at n + alpha_f) for
// the iterate x = U-dot_{n+1}.
void stage_of(const AlphaParams& a, const SystemState& s, std::span<const double> x, double dt,
              std::vector<double>& rate, std::vector<double>& value) {
  const std::size_t n = x.size();
  rate.resize(n);
  value.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u1 = s.U[i] + dt * s.Udot[i] + a.gamma() * dt * (x[i] - s.Udot[i]);
    rate[i] = s.Udot[i] + a.alpha_m() * (x[i] - s.Udot[i]);
    value[i] = s.U[i] + a.alpha_f() * (u1 - s.U[i]);
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

}  // namespace

StepPoint random_step_point(const Discretization& disc, std::mt19937_64& rng, double dt) {
  StepPoint p;
  p.dt = dt;
  p.start = SystemState(disc.field_size(), uniform(rng, 0.0, 300.0));
  for (auto& v : p.start.phi()) v = uniform(rng, 0.0, 1.0);
  for (auto& v : p.start.sigma()) v = uniform(rng, 0.05, 1.2);
  for (auto& v : p.start.psa()) v = uniform(rng, 0.0, 0.6);
  for (auto& v : p.start.Udot) v = uniform(rng, -0.2, 0.2);
  p.x.resize(p.start.U.size());
  for (auto& v : p.x) v = uniform(rng, -0.2, 0.2);
  disc.apply_dirichlet(p.start.U);
  disc.apply_dirichlet(p.start.Udot);
  disc.apply_dirichlet(p.x);
  return p;
}

double jacobian_discrepancy(const Discretization& disc, const AlphaParams& alpha, const StepPoint& point,
                            const ExternalInputs& in, const CsrMatrix& J, double step) {
  const auto n = static_cast<std::size_t>(disc.system_size());
  std::vector<char> constrained(n, 0);
  for (int j : disc.dirichlet_dofs()) constrained[static_cast<std::size_t>(j)] = 1;

  const auto dense = J.to_dense();
  std::vector<double> rate, value, rp(n), rm(n);
  std::vector<double> x(point.x);
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (constrained[k]) continue;
    const double h = step * std::max(1.0, std::abs(point.x[k]));
    x[k] = point.x[k] + h;
    stage_of(alpha, point.start, x, point.dt, rate, value);
    disc.assemble_residual({rate, value}, in, rp);
    x[k] = point.x[k] - h;
    stage_of(alpha, point.start, x, point.dt, rate, value);
    disc.assemble_residual({rate, value}, in, rm);
    x[k] = point.x[k];

    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (constrained[i]) continue;
      const double jik = dense[i * n + k];
      diff = std::max(diff, std::abs(jik - (rp[i] - rm[i]) / (2.0 * h)));
      scale = std::max(scale, std::abs(jik));
    }
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

JacobianCheckReport jacobian_fd_check(const ModelParameters& params, const JacobianCheckOptions& options) {
  JacobianCheckReport rep;
  std::mt19937_64 rng(options.seed);
  const auto alpha = AlphaParams::from_rho_inf(options.rho_inf);
  constexpr double side = 300.0;
  constexpr double dt = 1.0;  // weights the stiffness and reaction parts
  for (int n_el : options.sizes) {
    const Discretization disc(SplineSpace2D(side, n_el), params);
    CsrMatrix J = disc.jacobian_pattern();
    std::vector<double> rate, value;
    for (int k = 0; k < options.states; ++k) {
      const auto point = random_step_point(disc, rng, dt);
      const ExternalInputs in{uniform(rng, 0.0, 1.2), uniform(rng, 0.0, 1.0), point.start.t};
      stage_of(alpha, point.start, point.x, dt, rate, value);
      disc.assemble_jacobian({rate, value}, in, {alpha.alpha_m(), alpha.alpha_f() * alpha.gamma() * dt}, J);
      rep.max_error = std::max(rep.max_error, jacobian_discrepancy(disc, alpha, point, in, J, options.step));
      rep.max_error_half_step =
          std::max(rep.max_error_half_step, jacobian_discrepancy(disc, alpha, point, in, J, 0.5 * options.step));
      ++rep.states_checked;
    }
  }
  rep.passed = rep.max_error < options.tolerance && rep.max_error_half_step < options.tolerance;
  return rep;
}

// ---------------------------------------------------------------- dense oracle

OracleComparison dense_oracle_step(const ModelParameters& params, double side, int n_el, const SystemState& start,
                                   const DrugInputs& drugs, double dt, double rho_inf, const NewtonControls& newton,
                                   const GmresControls& gmres) {
  const Discretization disc(SplineSpace2D(side, n_el), params);
  const Integrator integrator(disc, AlphaParams::from_rho_inf(rho_inf), {dt, newton, gmres});
  SystemState prod = start;
  integrator.advance_step(prod, drugs);

  const reference::ReferenceModel model(side, n_el, params);
  const auto ref = reference::dense_generalized_alpha_step(model, start.U, start.Udot, start.t, dt, rho_inf,
                                                           drugs.u, drugs.s);
  OracleComparison cmp;
  cmp.reference_iterations = ref.iterations;
  for (std::size_t i = 0; i < prod.U.size(); ++i) {
    cmp.max_value_diff = std::max(cmp.max_value_diff, std::abs(prod.U[i] - ref.U[i]));
    cmp.max_rate_diff = std::max(cmp.max_rate_diff, dt * std::abs(prod.Udot[i] - ref.Udot[i]));
  }
  return cmp;
}

// ---------------------------------------------------------------- manufactured solutions

ManufacturedSolution trigonometric_solution(double side) {
  const double k = std::numbers::pi / side;
  ManufacturedSolution m;
  // phi = 0.3 sin(kx) sin(ky) (1 + t^2/2)
  m.fields[0].value = [k](double x, double y, double t) {
    return 0.3 * std::sin(k * x) * std::sin(k * y) * (1.0 + 0.5 * t * t);
  };
  m.fields[0].time_derivative = [k](double x, double y, double t) {
    return 0.3 * std::sin(k * x) * std::sin(k * y) * t;
  };
  m.fields[0].gradient = [k](double x, double y, double t) {
    const double a = 0.3 * k * (1.0 + 0.5 * t * t);
    return std::array<double, 2>{a * std::cos(k * x) * std::sin(k * y), a * std::sin(k * x) * std::cos(k * y)};
  };
  m.fields[0].laplacian = [k](double x, double y, double t) {
    return -2.0 * k * k * 0.3 * std::sin(k * x) * std::sin(k * y) * (1.0 + 0.5 * t * t);
  };
  // sigma = 0.6 + 0.25 cos(kx) cos(ky) (1 + sin(t) / 2)
  m.fields[1].value = [k](double x, double y, double t) {
    return 0.6 + 0.25 * std::cos(k * x) * std::cos(k * y) * (1.0 + 0.5 * std::sin(t));
  };
  m.fields[1].time_derivative = [k](double x, double y, double t) {
    return 0.125 * std::cos(k * x) * std::cos(k * y) * std::cos(t);
  };
  m.fields[1].gradient = [k](double x, double y, double t) {
    const double a = -0.25 * k * (1.0 + 0.5 * std::sin(t));
    return std::array<double, 2>{a * std::sin(k * x) * std::cos(k * y), a * std::cos(k * x) * std::sin(k * y)};
  };
  m.fields[1].laplacian = [k](double x, double y, double t) {
    return -2.0 * k * k * 0.25 * std::cos(k * x) * std::cos(k * y) * (1.0 + 0.5 * std::sin(t));
  };
  // p = 0.1 + 0.05 cos(kx) cos(2ky) exp(-t/2)
  m.fields[2].value = [k](double x, double y, double t) {
    return 0.1 + 0.05 * std::cos(k * x) * std::cos(2.0 * k * y) * std::exp(-0.5 * t);
  };
  m.fields[2].time_derivative = [k](double x, double y, double t) {
    return -0.025 * std::cos(k * x) * std::cos(2.0 * k * y) * std::exp(-0.5 * t);
  };
  m.fields[2].gradient = [k](double x, double y, double t) {
    const double a = -0.05 * k * std::exp(-0.5 * t);
    return std::array<double, 2>{a * std::sin(k * x) * std::cos(2.0 * k * y),
                                 2.0 * a * std::cos(k * x) * std::sin(2.0 * k * y)};
  };
  m.fields[2].laplacian = [k](double x, double y, double t) {
    return -5.0 * k * k * 0.05 * std::cos(k * x) * std::cos(2.0 * k * y) * std::exp(-0.5 * t);
  };
  m.u = [](double t) { return 0.2 + 0.1 * std::sin(t); };
  m.s = [](double t) { return 0.3 + 0.1 * std::cos(t); };
  return m;
}

ManufacturedSolution equilibrium_solution(const ModelParameters& params) {
  ManufacturedSolution m;
  const double c[3] = {0.0, params.S_h / params.gamma_h, params.alpha_h / params.gamma_p};
  for (int f = 0; f < 3; ++f) {
    const double v = c[f];
    m.fields[f].value = [v](double, double, double) { return v; };
    m.fields[f].time_derivative = [](double, double, double) { return 0.0; };
    m.fields[f].gradient = [](double, double, double) { return std::array<double, 2>{0.0, 0.0}; };
    m.fields[f].laplacian = [](double, double, double) { return 0.0; };
  }
  return m;
}

void check_compatibility(const ManufacturedSolution& m, double side, double tolerance) {
  constexpr int samples = 17;
  for (double t : {0.0, 0.7, 1.9})
    for (int i = 0; i < samples; ++i) {
      const double a = side * i / (samples - 1);
      const std::array<std::array<double, 2>, 4> pts{{{a, 0.0}, {a, side}, {0.0, a}, {side, a}}};
      const std::array<int, 4> normal_axis{1, 1, 0, 0};
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto [x, y] = pts[k];
        const double phi = m.fields[0].value(x, y, t);
        if (std::abs(phi) > tolerance)
          throw std::invalid_argument("manufactured phi does not vanish on the boundary");
        for (int f = 1; f < 3; ++f) {
          const double dn = m.fields[f].gradient(x, y, t)[normal_axis[k]];
          const double scale = std::max(1.0, std::abs(m.fields[f].value(x, y, t)) / side);
          if (std::abs(dn) > tolerance * scale)
            throw std::invalid_argument(std::string("manufactured ") + (f == 1 ? "sigma" : "p") +
                                        " has a nonzero normal derivative on the boundary");
        }
      }
    }
}

SourceTerm manufactured_forcing(const ManufacturedSolution& m, const ModelParameters& params) {
  return [m, params](double x, double y, double t) {
    const double u = m.u ? m.u(t) : 0.0;
    const double s = m.s ? m.s(t) : 0.0;
    const double phi = m.fields[0].value(x, y, t);
    const double sigma = m.fields[1].value(x, y, t);
    const double psa = m.fields[2].value(x, y, t);
    return std::array<double, 3>{
        m.fields[0].time_derivative(x, y, t) - params.lambda * m.fields[0].laplacian(x, y, t) +
            dG_dphi(phi, sigma, u, params),
        m.fields[1].time_derivative(x, y, t) - params.eta * m.fields[1].laplacian(x, y, t) -
            nutrient_reaction(phi, sigma, s, params),
        m.fields[2].time_derivative(x, y, t) - params.D_psa * m.fields[2].laplacian(x, y, t) -
            psa_reaction(phi, psa, params)};
  };
}

namespace {

constexpr NewtonControls kTightNewton{.tolerance = 1e-10, .max_iterations = 30, .absolute_floor = 1e-11};
constexpr GmresControls kTightGmres{.tolerance = 1e-12, .max_iterations = 4000, .restart = 400};

struct MmsRun {
  SystemState state;
  int n1 = 0;
};

// Projects the manufactured fields at t = 0 and integrates to `horizon`.
MmsRun run_manufactured(const ManufacturedSolution& m, const MmsOptions& o, int elements, double dt, double horizon,
                        const std::function<void(const SystemState&)>& each_step = {}) {
  const Discretization disc(SplineSpace2D(o.side, elements), o.params);
  const SourceTerm source = manufactured_forcing(m, o.params);
  SystemState state(disc.field_size(), 0.0);
  for (int f = 0; f < 3; ++f) {
    const auto c = disc.l2_project([&](double x, double y) { return m.fields[f].value(x, y, 0.0); });
    std::copy(c.begin(), c.end(), disc.block(std::span<double>(state.U), static_cast<Field>(f)).begin());
  }
  disc.apply_dirichlet(state.U);
  const DrugInputs drugs{m.u, m.s};
  const Integrator integrator(disc, AlphaParams::from_rho_inf(o.rho_inf), {dt, kTightNewton, kTightGmres});
  integrator.initialize_rates(state, drugs, &source);
  std::vector<Observer> observers;
  if (each_step) observers.push_back({dt, [&](const SystemState& s, const RunStats&) { each_step(s); }});
  run_simulation(integrator, state, drugs, {.horizon = horizon, .breakpoints = {}}, observers, &source);
  return {std::move(state), elements + 2};
}

double combined_error(const reference::ReferenceModel& ref, const SystemState& s, const ManufacturedSolution& m) {
  const std::size_t n = s.field_size();
  double sum = 0.0;
  for (int f = 0; f < 3; ++f) {
    const double e = ref.l2_error(s.U.data() + f * n, [&](double x, double y) { return m.fields[f].value(x, y, s.t); });
    sum += e * e;
  }
  return std::sqrt(sum);
}

void finish_study(ConvergenceStudy& st, double floor) {
  for (auto& p : st.points) p.excluded = !(p.error > floor);
  for (std::size_t i = 1; i < st.points.size(); ++i)
    st.pairwise_orders.push_back(std::log(st.points[i - 1].error / st.points[i].error) /
                                 std::log(st.points[i - 1].size / st.points[i].size));
  st.observed_order = fit_order(st.points);
}

}  // namespace

double fit_order(const std::vector<ConvergencePoint>& points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& p : points) {
    if (p.excluded) continue;
    const double x = std::log(p.size), y = std::log(p.error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceStudy mms_spatial(const ManufacturedSolution& m, const MmsOptions& o) {
  check_compatibility(m, o.side);
  ConvergenceStudy st;
  for (int n_el : o.spatial_levels) {
    const auto run = run_manufactured(m, o, n_el, o.spatial_dt, o.spatial_horizon);
    const reference::ReferenceModel ref(o.side, n_el, o.params);
    st.points.push_back({o.side / n_el, combined_error(ref, run.state, m), false});
  }
  finish_study(st, o.error_floor);
  return st;
}

ConvergenceStudy mms_temporal(const ManufacturedSolution& m, const MmsOptions& o) {
  check_compatibility(m, o.side);
  const double dt_min = *std::min_element(o.temporal_steps.begin(), o.temporal_steps.end());
  const auto fine = run_manufactured(m, o, o.temporal_elements, dt_min / o.reference_refinement, o.temporal_horizon);
  const reference::ReferenceModel ref(o.side, o.temporal_elements, o.params);
  const std::size_t n = fine.state.field_size();
  const auto zero = [](double, double) { return 0.0; };
  ConvergenceStudy st;
  for (double dt : o.temporal_steps) {
    const auto run = run_manufactured(m, o, o.temporal_elements, dt, o.temporal_horizon);
    std::vector<double> d(run.state.U.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = run.state.U[i] - fine.state.U[i];
    double sum = 0.0;
    for (int f = 0; f < 3; ++f) {
      const double e = ref.l2_error(d.data() + f * n, zero);
      sum += e * e;
    }
    st.points.push_back({dt, std::sqrt(sum), false});
  }
  finish_study(st, o.error_floor);
  return st;
}

double mms_error_growth(const ManufacturedSolution& m, const MmsOptions& o, int elements, double dt, double horizon) {
  const reference::ReferenceModel ref(o.side, elements, o.params);
  double first = -1.0, worst = 0.0;
  run_manufactured(m, o, elements, dt, horizon, [&](const SystemState& s) {
    const double e = combined_error(ref, s, m);
    if (first < 0.0) first = e;
    worst = std::max(worst, e - first);
  });
  return worst;
}

// ---------------------------------------------------------------- continuous dependence

namespace {

double rms(const CsrMatrix& mass, std::span<const double> v, double area) {
  std::vector<double> mv(v.size());
  spmv_serial(mass, v, mv);
  return std::sqrt(std::max(0.0, dot(v, mv)) / area);
}

}  // namespace

DependenceReport continuous_dependence_probe(const Scenario& base, const DependenceOptions& options) {
  Scenario s = base;
  s.elements = options.elements;
  s.horizon = options.horizon;
  s.newton = options.newton;
  s.gmres = options.gmres;

  const Discretization disc(SplineSpace2D(s.side, s.elements), s.params);
  const Integrator integrator(disc, AlphaParams::from_rho_inf(s.rho_inf), {s.dt, s.newton, s.gmres});
  const double area = disc.space().area();
  const auto base_drugs = drug_inputs(s);
  const SystemState start = initial_state(s, disc);

  // phi of the base run at every step
  std::vector<std::vector<double>> reference;
  {
    SystemState st = start;
    const Observer rec{s.dt, [&](const SystemState& x, const RunStats&) {
                         reference.emplace_back(x.phi().begin(), x.phi().end());
                       }};
    run_simulation(integrator, st, base_drugs, {.horizon = s.horizon, .breakpoints = {}}, {&rec, 1});
  }

  // unit-RMS perturbation concentrated on the initial interface
  std::vector<double> shape = disc.l2_project([&](double x, double y) {
    const double p = initial_phi(s, x, y);
    return 4.0 * p * (1.0 - p);
  });
  for (int j : disc.dirichlet_dofs()) shape[static_cast<std::size_t>(j)] = 0.0;
  const double shape_rms = rms(disc.mass(), shape, area);
  for (auto& v : shape) v /= shape_rms;

  DependenceReport rep;
  for (double delta : options.deltas) {
    SystemState st = start;
    DrugInputs drugs = base_drugs;
    DependencePoint pt;
    pt.delta = delta;
    if (options.kind == Perturbation::initial_phase) {
      auto phi = st.phi();
      for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += delta * shape[i];
      pt.data_norm = std::abs(delta);
    } else {
      drugs.u = [u = base_drugs.u, delta](double t) { return (u ? u(t) : 0.0) + delta; };
      pt.data_norm = std::abs(delta) * std::sqrt(s.horizon);
    }
    if (delta != 0.0) integrator.initialize_rates(st, drugs);

    std::size_t k = 0;
    std::vector<double> diff(st.field_size());
    const Observer cmp{s.dt, [&](const SystemState& x, const RunStats&) {
                         const auto phi = x.phi();
                         for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = phi[i] - reference[k][i];
                         const double d = rms(disc.mass(), diff, area);
                         pt.sup_difference = std::max(pt.sup_difference, d);
                         pt.final_difference = d;
                         ++k;
                       }};
    run_simulation(integrator, st, drugs, {.horizon = s.horizon, .breakpoints = {}}, {&cmp, 1});
    pt.ratio = pt.data_norm > 0.0 ? pt.sup_difference / pt.data_norm : 0.0;
    rep.points.push_back(pt);
  }

  // spread over the two smallest nonzero deltas
  std::vector<const DependencePoint*> nz;
  for (const auto& p : rep.points)
    if (p.delta != 0.0) nz.push_back(&p);
  std::sort(nz.begin(), nz.end(), [](auto* a, auto* b) { return std::abs(a->delta) < std::abs(b->delta); });
  if (nz.size() >= 2) {
    const double a = nz[0]->ratio, b = nz[1]->ratio;
    rep.small_delta_spread = std::abs(a - b) / std::max(a, b);
  }
  return rep;
}

// ---------------------------------------------------------------- report

std::vector<std::string> suite_names() { return {"jacobian", "oracle", "mms-space", "mms-time", "dependence"}; }

std::vector<ReportRow> run_suite(const std::string& suite) {
  std::vector<ReportRow> rows;
  const auto params = default_parameters();
  const bool all = suite == "all";
  bool known = all;

  if (all || suite == "jacobian") {
    known = true;
    const auto r = jacobian_fd_check(params);
    rows.push_back({"jacobian", "max_rel_error", r.max_error, "< 1e-5", r.max_error < 1e-5});
    rows.push_back({"jacobian", "max_rel_error_half_step", r.max_error_half_step, "< 1e-5", r.max_error_half_step < 1e-5});
  }
  if (all || suite == "oracle") {
    known = true;
    std::mt19937_64 rng(11);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const int n_el = 4 + k % 3;
      const Discretization disc(SplineSpace2D(3000.0, n_el), params);
      const auto point = random_step_point(disc, rng);
      const DrugInputs drugs{[](double t) { return 0.5 + 0.1 * std::sin(t); }, [](double) { return 0.4; }};
      const auto c = dense_oracle_step(params, 3000.0, n_el, point.start, drugs, 0.1, 0.5,
                                       {.tolerance = 1e-12, .max_iterations = 30, .absolute_floor = 1e-15},
                                       {.tolerance = 1e-13, .max_iterations = 2000, .restart = 0});
      worst = std::max(worst, c.max_diff());
    }
    rows.push_back({"oracle", "max_abs_diff", worst, "< 1e-8", worst < 1e-8});
  }
  const auto m = trigonometric_solution(MmsOptions{}.side);
  if (all || suite == "mms-space") {
    known = true;
    const auto st = mms_spatial(m);
    for (const auto& p : st.points) rows.push_back({"mms-space", "error_h=" + std::to_string(p.size), p.error, "", true});
    rows.push_back({"mms-space", "order", st.observed_order, "in [2.7, 3.3]",
                    st.observed_order >= 2.7 && st.observed_order <= 3.3});
  }
  if (all || suite == "mms-time") {
    known = true;
    const auto st = mms_temporal(m);
    for (const auto& p : st.points) rows.push_back({"mms-time", "error_dt=" + std::to_string(p.size), p.error, "", true});
    rows.push_back({"mms-time", "order", st.observed_order, "in [1.8, 2.2]",
                    st.observed_order >= 1.8 && st.observed_order <= 2.2});
  }
  if (all || suite == "dependence") {
    known = true;
    for (auto kind : {Perturbation::initial_phase, Perturbation::cytotoxic}) {
      DependenceOptions o;
      o.kind = kind;
      const std::string tag = kind == Perturbation::initial_phase ? "phi0" : "u";
      const auto r = continuous_dependence_probe(preset("mild/reference/none"), o);
      for (const auto& p : r.points)
        rows.push_back({"dependence", tag + "_ratio_delta=" + std::to_string(p.delta), p.ratio, "", true});
      rows.push_back({"dependence", tag + "_small_delta_spread", r.small_delta_spread, "< 0.1", r.small_delta_spread < 0.1});
    }
  }
  if (!known) throw std::invalid_argument("unknown verification suite '" + suite + "'");
  return rows;
}

std::string format_report(const std::vector<ReportRow>& rows) {
  std::string out = "suite,metric,value,criterion,passed\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out += r.suite + ',' + r.metric + ',' + buf + ',' + r.criterion + ',' + (r.passed ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace tumorsim::verification
