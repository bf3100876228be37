#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tumorsim/assembly.hpp"
#include "tumorsim/gmres.hpp"
#include "tumorsim/state.hpp"

namespace tumorsim {

/// Generalized-alpha parameters for first-order systems, derived from the
/// high-frequency spectral radius rho_inf in [0, 1].
class AlphaParams {
 public:
  /// Throws std::invalid_argument outside [0, 1].
  static AlphaParams from_rho_inf(double rho_inf);

  [[nodiscard]] double rho_inf() const { return rho_inf_; }
  [[nodiscard]] double alpha_m() const { return 0.5 * (3.0 - rho_inf_) / (1.0 + rho_inf_); }
  [[nodiscard]] double alpha_f() const { return 1.0 / (1.0 + rho_inf_); }
  [[nodiscard]] double gamma() const { return 0.5 + alpha_m() - alpha_f(); }

 private:
  explicit AlphaParams(double r) : rho_inf_(r) {}
  double rho_inf_;
};

struct NewtonControls {
  double tolerance = 1e-3;       ///< per-field, relative to the first iterate
  int max_iterations = 20;
  double absolute_floor = 1e-12; ///< on the scaled per-field norm
  bool operator==(const NewtonControls&) const = default;
};

struct StepControls {
  double dt = 0.1;
  NewtonControls newton;
  GmresControls gmres;
};

/// A contiguous slice of the unknown vector whose residual norm is tested
/// on its own. `scale` multiplies the norm before the absolute floor test.
struct ResidualBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  double scale = 1.0;
};

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  int linear_iterations = 0;
  std::vector<double> initial_norms;
  std::vector<double> final_norms;
  std::vector<std::vector<double>> history;  ///< per-iteration block norms
};

class NewtonDivergence : public std::runtime_error {
 public:
  NewtonDivergence(const std::string& what, NewtonResult result)
      : std::runtime_error(what), result_(std::move(result)) {}
  [[nodiscard]] const NewtonResult& result() const { return result_; }

 private:
  NewtonResult result_;
};

/// Residual r(x) of size x.size().
using ResidualFn = std::function<void(std::span<const double> x, std::span<double> r)>;
/// Solves J(x) dx = -r; returns the linear iteration count.
using LinearizedSolveFn =
    std::function<int(std::span<const double> x, std::span<const double> r, std::span<double> dx)>;

/// Newton-Raphson that stops only when every block satisfies
/// ||R_b|| <= tolerance * ||R_b^0|| or scale_b * ||R_b|| <= absolute_floor.
/// x holds the predictor on entry and the converged iterate on exit.
/// Throws NewtonDivergence after max_iterations.
NewtonResult newton_solve(const ResidualFn& residual, const LinearizedSolveFn& solve,
                          std::span<const ResidualBlock> blocks, std::span<double> x,
                          const NewtonControls& controls);

/// Drug effects as functions of time; empty functions mean zero.
struct DrugInputs {
  std::function<double(double)> u;
  std::function<double(double)> s;

  [[nodiscard]] double u_at(double t) const { return u ? u(t) : 0.0; }
  [[nodiscard]] double s_at(double t) const { return s ? s(t) : 0.0; }
};

struct StepStats {
  int newton_iterations = 0;
  int gmres_iterations = 0;
  bool gmres_all_converged = true;
};

/// Advances the coupled system with the generalized-alpha method. u(t) and
/// s(t) and any source term are evaluated at the stage time t_n + alpha_f dt.
class Integrator {
 public:
  Integrator(const Discretization& disc, AlphaParams alpha, StepControls controls);

  [[nodiscard]] const Discretization& discretization() const { return disc_; }
  [[nodiscard]] const AlphaParams& alpha() const { return alpha_; }
  [[nodiscard]] const StepControls& controls() const { return controls_; }

  /// Sets Udot from M Udot = -R(0, U) (consistent initial rates).
  void initialize_rates(SystemState& state, const DrugInputs& drugs, const SourceTerm* source = nullptr) const;

  /// One step of size dt (defaults to controls().dt). Throws
  /// NewtonDivergence or LinearSolveFailure; state is untouched on failure.
  StepStats advance_step(SystemState& state, const DrugInputs& drugs, std::optional<double> dt = std::nullopt,
                         const SourceTerm* source = nullptr) const;

  [[nodiscard]] std::vector<ResidualBlock> residual_blocks() const;

 private:
  const Discretization& disc_;
  AlphaParams alpha_;
  StepControls controls_;
};

struct RunStats {
  int steps = 0;
  int newton_iterations = 0;
  int gmres_iterations = 0;
};

/// Periodic callback; fires at the start time and every `interval` days.
struct Observer {
  double interval = 1.0;
  std::function<void(const SystemState&, const RunStats& since_last)> callback;
};

/// Step failure with the time level at which it happened.
class SimulationFailure : public std::runtime_error {
 public:
  SimulationFailure(double time, const std::string& what);
  [[nodiscard]] double time() const { return time_; }

 private:
  double time_;
};

struct RunControls {
  double horizon = 365.0;  ///< end time; steps cover [state.t, horizon]
  /// Times that must coincide with a step boundary (dose deliveries).
  std::vector<double> breakpoints;
};

/// Steps from state.t to horizon with the constant dt of the integrator.
/// Breakpoints falling strictly inside a step split it in two. Observers
/// fire on the regular grid t0 + k * dt. Returns totals for the whole run.
RunStats run_simulation(const Integrator& integrator, SystemState& state, const DrugInputs& drugs,
                        const RunControls& run, std::span<const Observer> observers,
                        const SourceTerm* source = nullptr);

}  // namespace tumorsim
