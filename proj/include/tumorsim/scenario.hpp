#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tumorsim/assembly.hpp"
#include "tumorsim/model.hpp"
#include "tumorsim/observables.hpp"
#include "tumorsim/state.hpp"
#include "tumorsim/time_integration.hpp"

namespace tumorsim {

enum class TumorClass { mild, aggressive };
enum class NutrientVariant { reference, rich_supply, poor_supply, high_uptake, low_uptake };
enum class TherapyPlan { none, cytotoxic, antiangiogenic, combined };

std::string to_string(TumorClass c);
std::string to_string(NutrientVariant v);
std::string to_string(TherapyPlan p);

/// Ellipse and affine nutrient/PSA initial profiles.
struct InitialCondition {
  double a = 150.0;            ///< semi-axis along x [um]
  double b = 200.0;            ///< semi-axis along y [um]
  double c_sigma0 = 1.0;       ///< [g/L]
  double c_sigma1 = -0.8;      ///< [g/L]
  double c_p0 = 0.0625;        ///< [ng/mL/cc]
  double c_p1 = 0.7975;        ///< [ng/mL/cc]
  bool operator==(const InitialCondition&) const = default;
};

struct Scenario {
  std::string name;
  TumorClass tumor = TumorClass::mild;
  NutrientVariant variant = NutrientVariant::reference;
  TherapyPlan plan = TherapyPlan::none;
  ModelParameters params;
  /// "calibrated" for the preset sigma_l/sigma_r defaults.
  std::string sigma_provenance = "calibrated";
  std::optional<TherapySchedule> cytotoxic;
  std::optional<TherapySchedule> antiangiogenic;

  double side = 3000.0;  ///< L_d [um]
  int elements = 256;    ///< per side
  double dt = 0.1;       ///< [day]
  double horizon = 365.0;
  double rho_inf = 0.5;
  InitialCondition initial;

  NewtonControls newton;
  GmresControls gmres;

  double observe_interval = 1.0;   ///< time-series cadence [day]
  double snapshot_interval = 5.0;  ///< VTK cadence [day]; 0 disables

  bool operator==(const Scenario&) const = default;
};

/// Thrown for names outside the preset catalog.
class UnknownPreset : public std::invalid_argument {
 public:
  explicit UnknownPreset(const std::string& name);
};

/// Thrown for malformed configuration text; the message names the line or key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "class/variant/therapy" for all 2 x 5 x 4 combinations.
std::vector<std::string> preset_names();
/// Table values for the named preset. Throws UnknownPreset.
Scenario preset(const std::string& name);

/// Flat INI text; every field of Scenario maps to exactly one key.
std::string to_config(const Scenario& s);
Scenario parse_config(std::istream& in);
Scenario parse_config_text(const std::string& text);
Scenario load_config(const std::filesystem::path& path);

/// Initial tumor phase field (smoothed ellipse centred in the domain).
double initial_phi(const Scenario& s, double x, double y);

DrugInputs drug_inputs(const Scenario& s);
ValidationReport validate(const Scenario& s);

/// L2 projections of the initial fields with consistent initial rates.
SystemState initial_state(const Scenario& s, const Discretization& disc);

struct TimeSeriesRow {
  double t = 0.0;
  double tumor_mm2 = 0.0;
  double tumor_fraction = 0.0;
  double healthy_mm2 = 0.0;
  double serum_raw = 0.0;
  double serum_mean = 0.0;
  double u = 0.0;
  double s = 0.0;
  double min_phi = 0.0;
  double max_phi = 0.0;
  double min_sigma = 0.0;
  double min_p = 0.0;
  int newton_iterations = 0;  ///< since the previous row
  int gmres_iterations = 0;   ///< since the previous row
};

TimeSeriesRow observe(const Scenario& s, const SplineSpace2D& space, const SystemState& state,
                      const RunStats& since_last);

/// Raised by simulate() when halt_on_bounds is set and a bound is broken.
class BoundViolation : public std::runtime_error {
 public:
  BoundViolation(double time, const BoundsReport& report);
  [[nodiscard]] const BoundsReport& report() const { return report_; }

 private:
  BoundsReport report_;
};

struct SimulationOptions {
  std::optional<std::filesystem::path> output_dir;  ///< timeseries.csv and snapshots
  double bounds_tolerance = 0.05;
  bool halt_on_bounds = false;
  std::vector<Observer> extra_observers;
};

struct SimulationResult {
  std::vector<TimeSeriesRow> rows;
  SystemState final_state;
  RunStats stats;
};

/// Runs the scenario from its initial state to the horizon. Throws
/// SimulationFailure (solver) or BoundViolation (when requested).
SimulationResult simulate(const Scenario& s, const SimulationOptions& options = {});

}  // namespace tumorsim
