#pragma once

/// Verification harness: finite-difference tangent checks, a dense
/// independent step oracle, manufactured-solution convergence studies and a
/// continuous-dependence probe. The oracles in here never call the
/// production assembly; they use a separate Cox-de Boor implementation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tumorsim/assembly.hpp"
#include "tumorsim/model.hpp"
#include "tumorsim/scenario.hpp"
#include "tumorsim/state.hpp"
#include "tumorsim/time_integration.hpp"

namespace tumorsim::verification {

/// Mild/reference parameters; the common base for all studies.
ModelParameters default_parameters();

// ---------------------------------------------------------------- tangent

/// Start of a step: U_n, U-dot_n, time, dt, and the stage iterate
/// x = U-dot_{n+1} at which the tangent is compared.
struct StepPoint {
  SystemState start;
  std::vector<double> x;
  double dt = 0.1;
};

/// Random state with phi in [0, 1], sigma in [0.05, 1.2], p in [0, 0.6],
/// rates in [-0.2, 0.2] and Dirichlet entries of phi set to zero.
StepPoint random_step_point(const Discretization& disc, std::mt19937_64& rng, double dt = 0.1);

/// Max over free columns of ||J e_k - FD_k||_inf / ||J e_k||_inf, where FD_k
/// is the central difference of the stage residual in x_k with relative
/// step `step`. Constrained phi rows and columns are skipped.
double jacobian_discrepancy(const Discretization& disc, const AlphaParams& alpha, const StepPoint& point,
                            const ExternalInputs& in, const CsrMatrix& J, double step);

struct JacobianCheckOptions {
  std::vector<int> sizes{4, 8};
  int states = 20;
  std::uint64_t seed = 7;
  double tolerance = 1e-5;
  double step = 1e-6;
  double rho_inf = 0.5;
};

struct JacobianCheckReport {
  int states_checked = 0;
  double max_error = 0.0;            ///< with the nominal step
  double max_error_half_step = 0.0;  ///< with step / 2
  bool passed = false;               ///< both below tolerance
};

JacobianCheckReport jacobian_fd_check(const ModelParameters& params, const JacobianCheckOptions& options = {});

// ---------------------------------------------------------------- dense oracle

struct OracleComparison {
  double max_value_diff = 0.0;  ///< max |U_prod - U_ref|
  double max_rate_diff = 0.0;   ///< dt * max |U-dot_prod - U-dot_ref|
  int reference_iterations = 0;
  [[nodiscard]] double max_diff() const { return std::max(max_value_diff, max_rate_diff); }
};

/// Advances `start` one step with the production integrator (given
/// controls) and with the dense reference model; compares the results.
OracleComparison dense_oracle_step(const ModelParameters& params, double side, int n_el, const SystemState& start,
                                   const DrugInputs& drugs, double dt, double rho_inf, const NewtonControls& newton,
                                   const GmresControls& gmres);

// ---------------------------------------------------------------- manufactured solutions

struct FieldFunction {
  std::function<double(double x, double y, double t)> value;
  std::function<double(double x, double y, double t)> time_derivative;
  std::function<std::array<double, 2>(double x, double y, double t)> gradient;
  std::function<double(double x, double y, double t)> laplacian;
};

struct ManufacturedSolution {
  std::array<FieldFunction, 3> fields;  ///< phi, sigma, p
  std::function<double(double)> u;
  std::function<double(double)> s;
};

/// Low-frequency trigonometric fields compatible with the boundary
/// conditions on [0, side]^2, with smooth time-dependent u and s.
ManufacturedSolution trigonometric_solution(double side);
/// Healthy equilibrium constants (phi = 0, sigma = S_h / gamma_h, p = alpha_h / gamma_p).
ManufacturedSolution equilibrium_solution(const ModelParameters& params);

/// Throws std::invalid_argument when phi does not vanish on the boundary or
/// sigma, p have a nonzero normal derivative there (checked on samples).
void check_compatibility(const ManufacturedSolution& m, double side, double tolerance = 1e-10);

/// Forcing that makes `m` an exact solution of the continuous problem.
SourceTerm manufactured_forcing(const ManufacturedSolution& m, const ModelParameters& params);

struct ConvergencePoint {
  double size = 0.0;   ///< h or dt
  double error = 0.0;  ///< combined L2 error of phi, sigma, p
  bool excluded = false;
};

struct ConvergenceStudy {
  std::vector<ConvergencePoint> points;
  std::vector<double> pairwise_orders;
  double observed_order = 0.0;  ///< least-squares slope of log e vs log size
};

struct MmsOptions {
  double side = 100.0;
  ModelParameters params = default_parameters();
  std::vector<int> spatial_levels{8, 16, 32, 64};
  double spatial_dt = 0.0025;
  double spatial_horizon = 0.5;
  std::vector<double> temporal_steps{0.4, 0.2, 0.1, 0.05};
  int temporal_elements = 16;
  double temporal_horizon = 2.0;
  int reference_refinement = 16;  ///< fine-step reference uses dt_min / this
  double error_floor = 1e-11;     ///< points below are excluded from the fit
  double rho_inf = 0.5;
};

/// Final-time error against the exact solution over the grid ladder.
ConvergenceStudy mms_spatial(const ManufacturedSolution& m, const MmsOptions& options = {});
/// Final-time error against a fine-step solution on the same grid, so the
/// spatial error cancels.
ConvergenceStudy mms_temporal(const ManufacturedSolution& m, const MmsOptions& options = {});

/// Max over time levels of the combined error growth for the given
/// solution, starting from its projection (zero for the equilibrium).
double mms_error_growth(const ManufacturedSolution& m, const MmsOptions& options, int elements, double dt,
                        double horizon);

/// Least-squares slope of log(error) against log(size) over non-excluded points.
double fit_order(const std::vector<ConvergencePoint>& points);

// ---------------------------------------------------------------- continuous dependence

enum class Perturbation { initial_phase, cytotoxic };

struct DependenceOptions {
  int elements = 32;
  double horizon = 10.0;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  Perturbation kind = Perturbation::initial_phase;
  NewtonControls newton{.tolerance = 1e-10, .max_iterations = 30, .absolute_floor = 1e-13};
  GmresControls gmres{.tolerance = 1e-13, .max_iterations = 3000, .restart = 0};
};

struct DependencePoint {
  double delta = 0.0;
  double data_norm = 0.0;       ///< RMS of the data perturbation
  double sup_difference = 0.0;  ///< sup_t RMS of phi difference
  double final_difference = 0.0;
  double ratio = 0.0;           ///< sup_difference / data_norm
};

struct DependenceReport {
  std::vector<DependencePoint> points;
  /// |r(a) - r(b)| / max(r(a), r(b)) for the two smallest deltas.
  double small_delta_spread = 0.0;
};

/// Runs the base scenario and one perturbed run per delta. Norms are RMS
/// values (L2 norm over sqrt of the domain area); the u perturbation is a
/// constant delta on [0, horizon] measured in L2(0, T).
DependenceReport continuous_dependence_probe(const Scenario& base, const DependenceOptions& options = {});

// ---------------------------------------------------------------- report

struct ReportRow {
  std::string suite;
  std::string metric;
  double value = 0.0;
  std::string criterion;
  bool passed = true;
};

/// Suites: jacobian, oracle, mms-space, mms-time, dependence, or all.
std::vector<ReportRow> run_suite(const std::string& suite);
std::vector<std::string> suite_names();
std::string format_report(const std::vector<ReportRow>& rows);

}  // namespace tumorsim::verification
