// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   acceptance            all criteria
//   acceptance 1 4 10     a selection

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tumorsim/observables.hpp"
#include "tumorsim/scenario.hpp"
#include "tumorsim/verification.hpp"

using namespace tumorsim;
namespace ver = tumorsim::verification;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Scenario reduced(const std::string& name, int elements, double horizon) {
  auto s = preset(name);
  s.elements = elements;
  s.horizon = horizon;
  s.snapshot_interval = 0.0;
  return s;
}

// ---------------------------------------------------------------- 1

Outcome equilibrium() {
  const auto p = preset("mild/reference/none").params;
  const Discretization d(SplineSpace2D(3000.0, 64), p);
  const Integrator integ(d, AlphaParams::from_rho_inf(0.5), {0.1, {}, {}});
  auto drift = [&](double psa) {
    SystemState st(d.field_size());
    for (auto& v : st.sigma()) v = 1.0;
    for (auto& v : st.psa()) v = psa;
    const auto U0 = st.U;
    for (int k = 0; k < 100; ++k) integ.advance_step(st, {});
    std::array<double, 3> m{};
    const std::size_t n = st.field_size();
    for (std::size_t i = 0; i < st.U.size(); ++i) m[i / n] = std::max(m[i / n], std::abs(st.U[i] - U0[i]));
    return m;
  };
  const auto eq = drift(p.alpha_h / p.gamma_p);
  const auto lit = drift(0.0625);
  const double worst = std::max({eq[0], eq[1], eq[2]});
  return {worst < 1e-8, fmt("max drift phi %.2e sigma %.2e p %.2e at p = alpha_h/gamma_p = %.7f (< 1e-8); "
                            "info: p drift from 0.0625 is %.2e",
                            eq[0], eq[1], eq[2], p.alpha_h / p.gamma_p, lit[2])};
}

// ---------------------------------------------------------------- 2

Outcome psa_consistency() {
  auto s = reduced("mild/reference/none", 64, 365.0);
  s.observe_interval = 0.5;
  const auto res = simulate(s);
  std::vector<PsaSample> half, daily;
  for (std::size_t k = 0; k < res.rows.size(); ++k) {
    const auto& r = res.rows[k];
    const PsaSample smp{r.t, r.serum_raw, r.healthy_mm2 * 1e6, r.tumor_mm2 * 1e6};
    half.push_back(smp);
    if (k % 2 == 0) daily.push_back(smp);
  }
  const double d1 = psa_ode_residual(daily, s.params), d2 = psa_ode_residual(half, s.params);
  const double rate = psa_rate_max(daily);
  const bool ok = d1 < 0.01 * rate && d1 >= 3.0 * d2;
  return {ok, fmt("daily defect %.3e = %.3f%% of max|dPs/dt| %.3e (< 1%%); half-day defect %.3e, reduction %.2fx (>= 3)",
                  d1, 100.0 * d1 / rate, rate, d2, d1 / d2)};
}

// ---------------------------------------------------------------- 3

Outcome convergence_orders() {
  const auto m = ver::trigonometric_solution(ver::MmsOptions{}.side);
  const auto t = ver::mms_temporal(m);
  const auto x = ver::mms_spatial(m);
  const bool ok = t.observed_order >= 1.8 && t.observed_order <= 2.2 && x.observed_order >= 2.7 && x.observed_order <= 3.3;
  std::string d = fmt("temporal order %.3f (in [1.8, 2.2]); spatial order %.3f (in [2.7, 3.3]); errors h:", t.observed_order,
                      x.observed_order);
  for (const auto& p : x.points) d += fmt(" %.2e", p.error);
  d += "; dt:";
  for (const auto& p : t.points) d += fmt(" %.2e", p.error);
  return {ok, d};
}

// ---------------------------------------------------------------- 4

Outcome jacobian() {
  const auto r = ver::jacobian_fd_check(ver::default_parameters());
  return {r.passed && r.states_checked == 40,
          fmt("%d states on 4x4 and 8x8, max discrepancy %.2e (half step %.2e), tolerance 1e-5", r.states_checked,
              r.max_error, r.max_error_half_step)};
}

// ---------------------------------------------------------------- 5

Outcome oracle() {
  const auto rows = ver::run_suite("oracle");
  return {rows.front().passed, fmt("10 random states on n_el 4..6, max difference %.2e (< 1e-8)", rows.front().value)};
}

// ---------------------------------------------------------------- 6

Outcome bounds() {
  bool ok = true;
  std::string d;
  for (const auto& n : preset_names()) {
    if (!n.ends_with("/none")) continue;
    auto s = reduced(n, 64, 120.0);
    const Discretization disc(SplineSpace2D(s.side, s.elements), s.params);
    double lo = 1e300, hi = -1e300, smin = 1e300, pmin = 1e300, last_out = -1.0;
    SimulationOptions o;
    o.extra_observers.push_back({s.dt, [&](const SystemState& st, const RunStats&) {
                                   if (st.t <= 0.0) return;  // the projected initial profile is not monitored
                                   const auto b = bounds_monitor(st, disc.space());
                                   lo = std::min(lo, b.min_phi.value);
                                   hi = std::max(hi, b.max_phi.value);
                                   smin = std::min(smin, b.min_sigma.value);
                                   pmin = std::min(pmin, b.min_psa.value);
                                   if (b.min_phi.value < -0.05 || b.max_phi.value > 1.05) last_out = st.t;
                                 }});
    simulate(s, o);
    const bool pass = lo >= -0.05 && hi <= 1.05 && smin > -1e-3 && pmin > -1e-3;
    ok = ok && pass;
    d += fmt("%s%s phi [%.4f, %.4f] min sigma %.3e min p %.3e", d.empty() ? "" : "; ", n.c_str(), lo, hi, smin, pmin);
    if (last_out >= 0.0) d += fmt(" (phi out of range until t = %.1f)", last_out);
  }
  return {ok, d};
}

// ---------------------------------------------------------------- 7, 8

struct Cure {
  double v60 = 0.0;
  double first_below = -1.0;  ///< first daily sample below 1% of V(60) after day 60
  bool stays_below = false;
};

Cure cure_time(const std::string& name) {
  const auto res = simulate(reduced(name, 128, 365.0));
  Cure c;
  for (const auto& r : res.rows)
    if (std::abs(r.t - 60.0) < 1e-9) c.v60 = r.tumor_mm2;
  c.stays_below = true;
  for (const auto& r : res.rows) {
    if (r.t <= 60.0) continue;
    const bool below = r.tumor_mm2 < 0.01 * c.v60;
    if (below && c.first_below < 0.0) c.first_below = r.t;
    if (!below && c.first_below >= 0.0) c.stays_below = false;
  }
  if (c.first_below < 0.0) c.stays_below = false;
  return c;
}

Outcome cytotoxic_cure() {
  const auto c = cure_time("mild/reference/cytotoxic");
  const bool ok = c.first_below >= 0.0 && c.first_below < 102.0 && c.stays_below;
  return {ok, fmt("V_c(60) = %.4e mm^2; below 1%% from day %g (< 102), stays below to day 365: %s", c.v60,
                  c.first_below, c.stays_below ? "yes" : "no")};
}

Outcome antiangiogenic_cure() {
  const auto c = cure_time("mild/reference/antiangiogenic");
  const double dose5 = preset("mild/reference/antiangiogenic").antiangiogenic->doses[4].time;
  const bool ok = c.first_below >= dose5 && c.first_below <= 365.0;
  return {ok, fmt("V_c(60) = %.4e mm^2; below 1%% from day %g (window [%g, 365])", c.v60, c.first_below, dose5)};
}

// ---------------------------------------------------------------- 9

struct ShapeTrace {
  double initial = 0.0, min = 1.0, final = 0.0;
};

ShapeTrace shape_trace(const std::string& name) {
  auto s = reduced(name, 128, 365.0);
  const SplineSpace2D space(s.side, s.elements);
  ShapeTrace tr;
  SimulationOptions o;
  o.extra_observers.push_back({5.0, [&](const SystemState& st, const RunStats&) {
                                 const auto q = tumor_shape(st.phi(), space).isoperimetric_ratio;
                                 if (!q) return;
                                 if (st.t == 0.0) tr.initial = *q;
                                 tr.min = std::min(tr.min, *q);
                                 tr.final = *q;
                               }});
  simulate(s, o);
  return tr;
}

Outcome branching() {
  const auto a = shape_trace("aggressive/reference/none");
  const auto m = shape_trace("mild/reference/none");
  const bool ok = a.min < 0.9 && m.min > 0.95;
  return {ok, fmt("aggressive q %.4f -> min %.4f, final %.4f (< 0.9); mild q %.4f -> min %.4f (> 0.95)", a.initial, a.min,
                  a.final, m.initial, m.min)};
}

// ---------------------------------------------------------------- 10

Outcome schedules() {
  const auto s = preset("mild/reference/combined");
  double worst = 0.0;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> t(0.0, 365.0);
  for (const auto* sched : {&*s.cytotoxic, &*s.antiangiogenic})
    for (int k = 0; k < 1000; ++k) {
      const double x = t(rng);
      double closed = 0.0;
      for (const auto& d : sched->doses)
        if (x >= d.time) closed += sched->beta * d.amount * std::exp(-(x - d.time) / sched->tau);
      worst = std::max(worst, std::abs(drug_effect(x, *sched) - closed));
    }
  return {worst < 1e-12, fmt("max |effect - closed form| over 2 x 1000 random times: %.2e (< 1e-12)", worst)};
}

// ---------------------------------------------------------------- 11

Outcome dependence() {
  bool ok = true;
  std::string d;
  for (auto kind : {ver::Perturbation::initial_phase, ver::Perturbation::cytotoxic}) {
    ver::DependenceOptions o;
    o.kind = kind;
    o.deltas = {1e-3, 1e-4};
    const auto r = ver::continuous_dependence_probe(preset("mild/reference/none"), o);
    ok = ok && r.small_delta_spread < 0.1;
    d += fmt("%s%s ratios %.5g, %.5g spread %.2e (< 0.1)", d.empty() ? "" : "; ",
             kind == ver::Perturbation::initial_phase ? "phi0" : "u", r.points[0].ratio, r.points[1].ratio,
             r.small_delta_spread);
  }
  return {ok, d};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {1, {"equilibrium exactness", equilibrium}},
    {2, {"serum PSA balance", psa_consistency}},
    {3, {"convergence orders", convergence_orders}},
    {4, {"Jacobian finite differences", jacobian}},
    {5, {"dense oracle equivalence", oracle}},
    {6, {"bound preservation", bounds}},
    {7, {"mild cytotoxic cure", cytotoxic_cure}},
    {8, {"mild antiangiogenic cure", antiangiogenic_cure}},
    {9, {"aggressive branching", branching}},
    {10, {"drug schedule closed form", schedules}},
    {11, {"continuous dependence", dependence}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (!kCriteria.contains(id)) {
      std::fprintf(stderr, "unknown criterion '%s' (1-11)\n", argv[i]);
      return 2;
    }
    selected.push_back(id);
  }
  if (selected.empty())
    for (const auto& [id, c] : kCriteria) selected.push_back(id);

  int failures = 0;
  for (int id : selected) {
    const auto& [name, fn] = kCriteria.at(id);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %-28s %s  %s [%.1f s]\n", id, name.c_str(), o.passed ? "PASS" : "FAIL", o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
