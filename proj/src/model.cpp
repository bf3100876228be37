#include "tumorsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tumorsim {

double ModelParameters::interface_width() const { return std::sqrt(lambda / mobility); }

std::vector<std::string> ModelParameters::violations() const {
  std::vector<std::string> bad;
  auto check = [&](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) bad.emplace_back(name);
  };
  check("lambda", lambda);
  check("mobility", mobility);
  check("m_ref", m_ref);
  check("K_rho", K_rho);
  check("Kbar_rho", Kbar_rho);
  check("K_A", K_A);
  check("Kbar_A", Kbar_A);
  check("sigma_l", sigma_l);
  check("sigma_r", sigma_r);
  check("eta", eta);
  check("S_h", S_h);
  check("S_c", S_c);
  check("gamma_h", gamma_h);
  check("gamma_c", gamma_c);
  check("D_psa", D_psa);
  check("alpha_h", alpha_h);
  check("alpha_c", alpha_c);
  check("gamma_p", gamma_p);
  return bad;
}

TherapySchedule TherapySchedule::periodic(int n, double first, double interval, double amount,
                                          double beta, double tau, std::string unit) {
  TherapySchedule s;
  s.beta = beta;
  s.tau = tau;
  s.dose_unit = std::move(unit);
  s.doses.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) s.doses.push_back({first + i * interval, amount});
  return s;
}

std::vector<std::string> TherapySchedule::violations() const {
  std::vector<std::string> bad;
  if (!(beta > 0.0)) bad.emplace_back("beta");
  if (!(tau > 0.0)) bad.emplace_back("tau");
  for (std::size_t i = 0; i < doses.size(); ++i) {
    if (!(doses[i].amount > 0.0)) bad.push_back("dose[" + std::to_string(i) + "].amount");
    if (!std::isfinite(doses[i].time)) bad.push_back("dose[" + std::to_string(i) + "].time");
    if (i > 0 && !(doses[i].time > doses[i - 1].time))
      bad.push_back("dose[" + std::to_string(i) + "].time not increasing");
  }
  return bad;
}

double tilting_m(double sigma, const ModelParameters& p) {
  const double rho = p.rho();
  const double A = p.apoptosis_index();
  return p.m_ref *
         (0.5 * (rho + A) + (rho - A) / std::numbers::pi * std::atan((sigma - p.sigma_l) / p.sigma_r));
}

double tilting_m_derivative(double sigma, const ModelParameters& p) {
  const double z = (sigma - p.sigma_l) / p.sigma_r;
  return p.m_ref * (p.rho() - p.apoptosis_index()) / (std::numbers::pi * p.sigma_r * (1.0 + z * z));
}

double tilt_factor_f(double phi, double sigma, double u, const ModelParameters& p) {
  return p.mobility * (1.0 - 2.0 * phi - 3.0 * (tilting_m(sigma, p) - p.m_ref * u));
}

double potential_G(double phi, double sigma, double u, const ModelParameters& p) {
  const double F = p.mobility * phi * phi * (1.0 - phi) * (1.0 - phi);
  const double h = p.mobility * phi * phi * (3.0 - 2.0 * phi);
  return F - h * (tilting_m(sigma, p) - p.m_ref * u);
}

double dG_dphi(double phi, double sigma, double u, const ModelParameters& p) {
  return 2.0 * phi * (1.0 - phi) * tilt_factor_f(phi, sigma, u, p);
}

double d2G_dphi2(double phi, double sigma, double u, const ModelParameters& p) {
  return 2.0 * (1.0 - 2.0 * phi) * tilt_factor_f(phi, sigma, u, p) -
         4.0 * p.mobility * phi * (1.0 - phi);
}

double d2G_dphi_dsigma(double phi, double sigma, const ModelParameters& p) {
  return -6.0 * p.mobility * phi * (1.0 - phi) * tilting_m_derivative(sigma, p);
}

double drug_effect(double t, const TherapySchedule& schedule) {
  double total = 0.0;
  for (const auto& d : schedule.doses) {
    if (t < d.time) break;
    total += schedule.beta * d.amount * std::exp(-(t - d.time) / schedule.tau);
  }
  return total;
}

double cytotoxic_u(double t, const std::optional<TherapySchedule>& schedule) {
  return schedule ? drug_effect(t, *schedule) : 0.0;
}

double antiangiogenic_s(double t, const std::optional<TherapySchedule>& schedule) {
  return schedule ? drug_effect(t, *schedule) : 0.0;
}

double nutrient_reaction(double phi, double sigma, double s, const ModelParameters& p) {
  return p.S_h * (1.0 - phi) + (p.S_c - s) * phi - (p.gamma_h * (1.0 - phi) + p.gamma_c * phi) * sigma;
}

double psa_reaction(double phi, double psa, const ModelParameters& p) {
  return p.alpha_h * (1.0 - phi) + p.alpha_c * phi - p.gamma_p * psa;
}

namespace {

// The effect decays between doses and jumps up at each delivery, so its
// supremum over [0, horizon] is attained at a delivery time and its infimum
// at t = 0, at the horizon, or just before a delivery.
double drug_infimum(const TherapySchedule& s, double horizon) {
  double inf = drug_effect(0.0, s);
  inf = std::min(inf, drug_effect(horizon, s));
  for (const auto& d : s.doses) {
    if (d.time <= 0.0 || d.time > horizon) continue;
    inf = std::min(inf, drug_effect(d.time, s) - s.beta * d.amount);
  }
  return std::max(inf, 0.0);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

ValidationReport validate_scenario(const ModelParameters& params,
                                   const std::optional<TherapySchedule>& cytotoxic,
                                   const std::optional<TherapySchedule>& antiangiogenic,
                                   double horizon) {
  ValidationReport report;
  auto fail = [&](std::string check, std::string msg, std::optional<double> t = std::nullopt) {
    report.passed = false;
    report.issues.push_back({std::move(check), std::move(msg), t});
  };

  for (const auto& name : params.violations()) fail("positivity", name + " must be positive and finite");
  if (cytotoxic)
    for (const auto& name : cytotoxic->violations()) fail("cytotoxic schedule", name);
  if (antiangiogenic)
    for (const auto& name : antiangiogenic->violations()) fail("antiangiogenic schedule", name);
  if (!report.passed) return report;

  const double upper = params.m_ref * params.rho();
  const double lower = params.m_ref * params.apoptosis_index();
  constexpr double bound = 1.0 / 3.0;

  // m(sigma) - m_ref u(t) ranges over (lower - m_ref sup u, upper - m_ref inf u).
  double sup = std::max(std::abs(upper), std::abs(lower));
  if (sup >= bound)
    fail("double-well", "m_ref*max(|rho|,|A|) = " + fmt(sup) + " >= 1/3", 0.0);
  if (cytotoxic) {
    const double u_inf = drug_infimum(*cytotoxic, horizon);
    sup = std::max(std::abs(upper - params.m_ref * u_inf), std::abs(lower));
    bool flagged = false;
    for (const auto& d : cytotoxic->doses) {
      if (d.time > horizon) break;
      const double peak = std::abs(lower - params.m_ref * drug_effect(d.time, *cytotoxic));
      sup = std::max(sup, peak);
      if (!flagged && peak >= bound) {
        fail("double-well", "|m - m_ref u| reaches " + fmt(peak) + " >= 1/3", d.time);
        flagged = true;
      }
    }
  }
  report.tilt_supremum = sup;

  if (antiangiogenic) {
    double s_sup = 0.0;
    bool flagged = false;
    for (const auto& d : antiangiogenic->doses) {
      if (d.time > horizon) break;
      const double s = drug_effect(d.time, *antiangiogenic);
      s_sup = std::max(s_sup, s);
      if (!flagged && s > params.S_c) {
        fail("antiangiogenic bound", "s = " + fmt(s) + " exceeds S_c = " + fmt(params.S_c), d.time);
        flagged = true;
      }
    }
    report.antiangiogenic_supremum = s_sup;
  }
  return report;
}

}  // namespace tumorsim
