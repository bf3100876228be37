#pragma once

/// Pointwise constitutive functions of the three-field tumor model: the
/// tilted double-well chemistry of the phase field, the drug schedules and
/// the reaction terms of the nutrient and tissue-PSA equations.
///
/// Units: time in days, length in micrometres, nutrient in g/L, tissue PSA
/// in ng/mL/cc. The tilt m(sigma) - m_ref*u carries 1/day but enters
/// f(phi, sigma, u) next to the dimensionless 1 - 2*phi; the formula is kept
/// literally with day-based values.

#include <optional>
#include <string>
#include <vector>

namespace tumorsim {

struct ModelParameters {
  double lambda = 0.0;      ///< phase-field diffusivity [um^2/day]
  double mobility = 0.0;    ///< M [1/day]
  double m_ref = 0.0;       ///< net-proliferation scaling [1/day]
  double K_rho = 0.0;       ///< proliferation rate [1/day]
  double Kbar_rho = 0.0;    ///< proliferation scaling reference [1/day]
  double K_A = 0.0;         ///< apoptosis rate [1/day]
  double Kbar_A = 0.0;      ///< apoptosis scaling reference [1/day]
  double sigma_l = 0.0;     ///< nutrient threshold [g/L]
  double sigma_r = 0.0;     ///< nutrient reference width [g/L]
  double eta = 0.0;         ///< nutrient diffusivity [um^2/day]
  double S_h = 0.0;         ///< nutrient supply, healthy [g/L/day]
  double S_c = 0.0;         ///< nutrient supply, tumor [g/L/day]
  double gamma_h = 0.0;     ///< nutrient uptake, healthy [1/day]
  double gamma_c = 0.0;     ///< nutrient uptake, tumor [1/day]
  double D_psa = 0.0;       ///< tissue PSA diffusivity [um^2/day]
  double alpha_h = 0.0;     ///< PSA production, healthy [ng/mL/cc/day]
  double alpha_c = 0.0;     ///< PSA production, tumor [ng/mL/cc/day]
  double gamma_p = 0.0;     ///< PSA decay [1/day]

  /// Proliferation index rho = K_rho / Kbar_rho.
  [[nodiscard]] double rho() const { return K_rho / Kbar_rho; }
  /// Apoptosis index A = -K_A / Kbar_A (negative).
  [[nodiscard]] double apoptosis_index() const { return -K_A / Kbar_A; }
  /// Interface width ell with lambda = M * ell^2.
  [[nodiscard]] double interface_width() const;

  /// Names of parameters that violate their constraints; empty when valid.
  [[nodiscard]] std::vector<std::string> violations() const;

  bool operator==(const ModelParameters&) const = default;
};

struct Dose {
  double time = 0.0;    ///< delivery time [day]
  double amount = 0.0;  ///< dose in drug units (mg/m^2 or mg/kg)
  bool operator==(const Dose&) const = default;
};

/// Exponentially decaying drug effect after a sequence of bolus doses.
struct TherapySchedule {
  std::vector<Dose> doses;  ///< strictly increasing delivery times
  double beta = 0.0;        ///< effect per unit dose
  double tau = 0.0;         ///< mean drug lifetime [day]
  std::string dose_unit;    ///< label only; never enters the arithmetic

  /// n equal doses starting at `first`, `interval` days apart.
  static TherapySchedule periodic(int n, double first, double interval, double amount,
                                  double beta, double tau, std::string unit = {});

  [[nodiscard]] std::vector<std::string> violations() const;

  bool operator==(const TherapySchedule&) const = default;
};

/// Net proliferation m(sigma), monotone in sigma with range (m_ref*A, m_ref*rho).
double tilting_m(double sigma, const ModelParameters& p);
/// dm/dsigma.
double tilting_m_derivative(double sigma, const ModelParameters& p);

/// f(phi, sigma, u) = M [1 - 2 phi - 3 (m(sigma) - m_ref u)].
double tilt_factor_f(double phi, double sigma, double u, const ModelParameters& p);

/// G(phi, sigma, u) = F(phi) - h(phi) (m(sigma) - m_ref u).
double potential_G(double phi, double sigma, double u, const ModelParameters& p);

/// dG/dphi = 2 phi (1 - phi) f(phi, sigma, u).
double dG_dphi(double phi, double sigma, double u, const ModelParameters& p);

/// Partial derivatives of dG/dphi, used by the Newton tangent.
double d2G_dphi2(double phi, double sigma, double u, const ModelParameters& p);
double d2G_dphi_dsigma(double phi, double sigma, const ModelParameters& p);

/// sum_i beta d_i exp(-(t - T_i)/tau) H(t - T_i) with H(0) = 1.
double drug_effect(double t, const TherapySchedule& schedule);
/// Cytotoxic drug effect u(t) [-]; zero without a schedule.
double cytotoxic_u(double t, const std::optional<TherapySchedule>& schedule);
/// Antiangiogenic supply reduction s(t) [g/L/day]; zero without a schedule.
double antiangiogenic_s(double t, const std::optional<TherapySchedule>& schedule);

/// Non-diffusive part of the nutrient equation.
double nutrient_reaction(double phi, double sigma, double s, const ModelParameters& p);
/// Non-diffusive part of the tissue PSA equation.
double psa_reaction(double phi, double psa, const ModelParameters& p);

struct ValidationIssue {
  std::string check;
  std::string message;
  std::optional<double> time;  ///< first violating time, when time-dependent
};

struct ValidationReport {
  bool passed = true;
  double tilt_supremum = 0.0;        ///< sup |m(sigma) - m_ref u(t)|
  double antiangiogenic_supremum = 0.0;  ///< sup s(t)
  std::vector<ValidationIssue> issues;
};

/// Checks parameter positivity, the double-well regime |m - m_ref u| < 1/3
/// over all sigma and t in [0, horizon], and s(t) <= S_c. Violations are
/// reported, never thrown.
ValidationReport validate_scenario(const ModelParameters& params,
                                   const std::optional<TherapySchedule>& cytotoxic,
                                   const std::optional<TherapySchedule>& antiangiogenic,
                                   double horizon);

}  // namespace tumorsim
