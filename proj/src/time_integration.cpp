#include "tumorsim/time_integration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tumorsim {

AlphaParams AlphaParams::from_rho_inf(double rho_inf) {
  if (!(rho_inf >= 0.0 && rho_inf <= 1.0))
    throw std::invalid_argument("generalized-alpha: rho_inf must lie in [0, 1]");
  return AlphaParams(rho_inf);
}

namespace {

std::vector<double> block_norms(std::span<const double> r, std::span<const ResidualBlock> blocks) {
  std::vector<double> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(norm2(r.subspan(b.offset, b.size)));
  return out;
}

std::string describe(const NewtonResult& res, std::span<const ResidualBlock> blocks) {
  std::ostringstream os;
  os << "Newton-Raphson did not converge in " << res.iterations << " iterations; final/initial norms:";
  for (std::size_t i = 0; i < blocks.size(); ++i)
    os << ' ' << blocks[i].name << '=' << res.final_norms[i] << '/' << res.initial_norms[i];
  return os.str();
}

}  // namespace

NewtonResult newton_solve(const ResidualFn& residual, const LinearizedSolveFn& solve,
                          std::span<const ResidualBlock> blocks, std::span<double> x,
                          const NewtonControls& controls) {
  NewtonResult res;
  std::vector<double> r(x.size()), dx(x.size());
  for (;;) {
    residual(x, r);
    const auto norms = block_norms(r, blocks);
    if (res.history.empty()) res.initial_norms = norms;
    res.history.push_back(norms);
    res.final_norms = norms;

    bool all = true;
    bool finite = true;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      finite = finite && std::isfinite(norms[b]);
      const bool ok = norms[b] <= controls.tolerance * res.initial_norms[b] ||
                      blocks[b].scale * norms[b] <= controls.absolute_floor;
      all = all && ok;
    }
    if (!finite) throw NewtonDivergence("Newton-Raphson: non-finite residual", res);
    if (all) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= controls.max_iterations) throw NewtonDivergence(describe(res, blocks), res);

    std::fill(dx.begin(), dx.end(), 0.0);
    res.linear_iterations += solve(x, r, dx);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
    ++res.iterations;
  }
}

Integrator::Integrator(const Discretization& disc, AlphaParams alpha, StepControls controls)
    : disc_(disc), alpha_(alpha), controls_(controls) {
  if (!(controls_.dt > 0.0)) throw std::invalid_argument("Integrator: dt must be positive");
  if (!(controls_.newton.tolerance > 0.0)) throw std::invalid_argument("Integrator: Newton tolerance must be positive");
}

std::vector<ResidualBlock> Integrator::residual_blocks() const {
  const auto n = static_cast<std::size_t>(disc_.field_size());
  // Scale so the floor compares a field-value-times-rate magnitude,
  // independent of the element size.
  const double scale = 1.0 / norm2(disc_.basis_integrals());
  return {{"phi", 0, n, scale}, {"sigma", n, n, scale}, {"p", 2 * n, n, scale}};
}

void Integrator::initialize_rates(SystemState& state, const DrugInputs& drugs, const SourceTerm* source) const {
  const auto n = state.U.size();
  std::vector<double> zero(n, 0.0), rhs(n);
  const ExternalInputs in{drugs.u_at(state.t), drugs.s_at(state.t), state.t};
  disc_.assemble_residual({zero, state.U}, in, rhs, source);
  for (auto& v : rhs) v = -v;
  for (int j : disc_.dirichlet_dofs()) rhs[j] = 0.0;
  CsrMatrix M = disc_.jacobian_pattern();
  disc_.assemble_jacobian({zero, state.U}, in, {1.0, 0.0}, M);
  const JacobiPreconditioner prec(M);
  std::fill(state.Udot.begin(), state.Udot.end(), 0.0);
  const auto rep = gmres_solve(M, rhs, state.Udot, prec, {.tolerance = 1e-12, .max_iterations = 4000, .restart = 100});
  if (!rep.converged && rep.final_residual > 1e-10 * rep.initial_residual)
    throw LinearSolveFailure("initialize_rates: mass solve did not converge");
}

StepStats Integrator::advance_step(SystemState& state, const DrugInputs& drugs, std::optional<double> dt_opt,
                                   const SourceTerm* source) const {
  const double dt = dt_opt.value_or(controls_.dt);
  const double am = alpha_.alpha_m();
  const double af = alpha_.alpha_f();
  const double gm = alpha_.gamma();
  const auto n = state.U.size();
  const std::span<const double> U0 = state.U;
  const std::span<const double> V0 = state.Udot;

  const double t_stage = state.t + af * dt;
  const ExternalInputs in{drugs.u_at(t_stage), drugs.s_at(t_stage), t_stage};

  std::vector<double> x(n);  // Udot_{n+1}
  for (std::size_t i = 0; i < n; ++i) x[i] = (gm - 1.0) / gm * V0[i];

  std::vector<double> rate(n), value(n);
  auto stage = [&](std::span<const double> v1) {
    for (std::size_t i = 0; i < n; ++i) {
      const double u1 = U0[i] + dt * V0[i] + gm * dt * (v1[i] - V0[i]);
      rate[i] = V0[i] + am * (v1[i] - V0[i]);
      value[i] = U0[i] + af * (u1 - U0[i]);
    }
  };

  CsrMatrix J = disc_.jacobian_pattern();
  StepStats stats;
  const ResidualFn residual = [&](std::span<const double> v1, std::span<double> r) {
    stage(v1);
    disc_.assemble_residual({rate, value}, in, r, source);
  };
  const LinearizedSolveFn solve = [&](std::span<const double> v1, std::span<const double> r,
                                      std::span<double> dx) {
    stage(v1);
    disc_.assemble_jacobian({rate, value}, in, {am, af * gm * dt}, J);
    const JacobiPreconditioner prec(J);
    std::vector<double> b(r.begin(), r.end());
    for (auto& v : b) v = -v;
    const auto rep = gmres_solve(J, b, dx, prec, controls_.gmres);
    if (rep.breakdown) throw LinearSolveFailure("GMRES: numerical breakdown");
    for (double v : dx)
      if (!std::isfinite(v)) throw LinearSolveFailure("GMRES: non-finite update");
    stats.gmres_all_converged = stats.gmres_all_converged && rep.converged;
    return rep.iterations;
  };

  const auto blocks = residual_blocks();
  const auto res = newton_solve(residual, solve, blocks, x, controls_.newton);
  stats.newton_iterations = res.iterations;
  stats.gmres_iterations = res.linear_iterations;

  for (std::size_t i = 0; i < n; ++i) {
    state.U[i] = U0[i] + dt * V0[i] + gm * dt * (x[i] - V0[i]);
  }
  state.Udot = std::move(x);
  state.t += dt;
  return stats;
}

SimulationFailure::SimulationFailure(double time, const std::string& what)
    : std::runtime_error("at t = " + std::to_string(time) + " days: " + what), time_(time) {}

RunStats run_simulation(const Integrator& integrator, SystemState& state, const DrugInputs& drugs,
                        const RunControls& run, std::span<const Observer> observers, const SourceTerm* source) {
  const double dt = integrator.controls().dt;
  const double t0 = state.t;
  const double span = run.horizon - t0;
  const double snap = 1e-9 * dt;
  if (span < -snap) throw std::invalid_argument("run_simulation: horizon precedes the start time");
  const double ratio = std::max(span, 0.0) / dt;
  const auto n_steps = static_cast<long long>(std::abs(ratio - std::round(ratio)) < 1e-9 ? std::round(ratio)
                                                                                        : std::ceil(ratio));

  std::vector<long long> every(observers.size());
  std::vector<RunStats> pending(observers.size());
  for (std::size_t o = 0; o < observers.size(); ++o)
    every[o] = std::max<long long>(1, std::llround(observers[o].interval / dt));

  auto notify = [&](long long k) {
    for (std::size_t o = 0; o < observers.size(); ++o)
      if (k % every[o] == 0) {
        if (observers[o].callback) observers[o].callback(state, pending[o]);
        pending[o] = {};
      }
  };

  std::vector<double> breaks = run.breakpoints;
  std::sort(breaks.begin(), breaks.end());

  RunStats total;
  notify(0);
  for (long long k = 0; k < n_steps; ++k) {
    const double t_begin = t0 + static_cast<double>(k) * dt;
    const double t_end = k + 1 == n_steps ? run.horizon : t0 + static_cast<double>(k + 1) * dt;
    state.t = t_begin;  // keep the grid free of accumulated rounding
    std::vector<double> cuts;
    for (double b : breaks)
      if (b > t_begin + snap && b < t_end - snap) cuts.push_back(b);
    cuts.push_back(t_end);

    RunStats step;
    try {
      for (double c : cuts) {
        const auto s = integrator.advance_step(state, drugs, c - state.t, source);
        state.t = c;
        step.steps += 1;
        step.newton_iterations += s.newton_iterations;
        step.gmres_iterations += s.gmres_iterations;
      }
    } catch (const std::exception& e) {
      throw SimulationFailure(state.t, e.what());
    }
    total.steps += step.steps;
    total.newton_iterations += step.newton_iterations;
    total.gmres_iterations += step.gmres_iterations;
    for (auto& p : pending) {
      p.steps += step.steps;
      p.newton_iterations += step.newton_iterations;
      p.gmres_iterations += step.gmres_iterations;
    }
    notify(k + 1);
  }
  return total;
}

}  // namespace tumorsim
