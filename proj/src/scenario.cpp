#include "tumorsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tumorsim/output.hpp"

namespace tumorsim {

namespace {

constexpr const char* kTumorNames[] = {"mild", "aggressive"};
constexpr const char* kVariantNames[] = {"reference", "rich-supply", "poor-supply", "high-uptake", "low-uptake"};
constexpr const char* kPlanNames[] = {"none", "cytotoxic", "antiangiogenic", "combined"};

template <typename E, std::size_t N>
std::optional<E> lookup(const char* const (&names)[N], const std::string& s) {
  for (std::size_t i = 0; i < N; ++i)
    if (s == names[i]) return static_cast<E>(i);
  return std::nullopt;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

TherapySchedule cytotoxic_plan() { return TherapySchedule::periodic(10, 60.0, 21.0, 75.0, 1.59e-2, 5.0, "mg/m^2"); }
TherapySchedule antiangiogenic_plan() { return TherapySchedule::periodic(10, 60.0, 21.0, 15.0, 0.04, 30.0, "mg/kg"); }

}  // namespace

std::string to_string(TumorClass c) { return kTumorNames[static_cast<int>(c)]; }
std::string to_string(NutrientVariant v) { return kVariantNames[static_cast<int>(v)]; }
std::string to_string(TherapyPlan p) { return kPlanNames[static_cast<int>(p)]; }

UnknownPreset::UnknownPreset(const std::string& name)
    : std::invalid_argument("unknown preset '" + name + "' (expected class/variant/therapy; see list-presets)") {}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const char* c : kTumorNames)
    for (const char* v : kVariantNames)
      for (const char* p : kPlanNames) out.push_back(std::string(c) + '/' + v + '/' + p);
  return out;
}

Scenario preset(const std::string& name) {
  const auto parts = split(name, '/');
  if (parts.size() != 3) throw UnknownPreset(name);
  const auto tumor = lookup<TumorClass>(kTumorNames, parts[0]);
  const auto variant = lookup<NutrientVariant>(kVariantNames, parts[1]);
  const auto plan = lookup<TherapyPlan>(kPlanNames, parts[2]);
  if (!tumor || !variant || !plan) throw UnknownPreset(name);

  Scenario s;
  s.name = name;
  s.tumor = *tumor;
  s.variant = *variant;
  s.plan = *plan;

  auto& p = s.params;
  p.lambda = 640.0;
  p.mobility = 2.5;
  p.m_ref = 7.55e-2;
  p.Kbar_rho = 1.5e-2;
  p.Kbar_A = 2.1e-2;
  if (s.tumor == TumorClass::mild) {
    p.K_rho = 0.8e-2;
    p.K_A = 0.7e-2;
  } else {
    p.K_rho = 1.5e-2;
    p.K_A = 1.37e-2;
  }
  p.sigma_l = 0.41;
  p.sigma_r = 0.05;
  s.sigma_provenance = "calibrated";

  p.eta = 6.4e4;
  p.S_h = 2.0;
  p.gamma_h = 2.0;
  p.S_c = 2.75;
  p.gamma_c = 17.0;
  switch (s.variant) {
    case NutrientVariant::reference: break;
    case NutrientVariant::rich_supply: p.S_c = 3.125; break;
    case NutrientVariant::poor_supply: p.S_c = 2.375; break;
    case NutrientVariant::high_uptake: p.gamma_c = 18.0; break;
    case NutrientVariant::low_uptake: p.gamma_c = 16.0; break;
  }
  p.D_psa = 640.0;
  p.alpha_h = 1.712e-2;
  p.alpha_c = 15.0 * p.alpha_h;
  p.gamma_p = 0.274;

  if (s.plan == TherapyPlan::cytotoxic || s.plan == TherapyPlan::combined) s.cytotoxic = cytotoxic_plan();
  if (s.plan == TherapyPlan::antiangiogenic || s.plan == TherapyPlan::combined)
    s.antiangiogenic = antiangiogenic_plan();

  s.side = 3000.0;
  s.elements = 256;
  s.dt = 0.1;
  s.horizon = 365.0;
  s.rho_inf = 0.5;
  s.newton = {.tolerance = 1e-3, .max_iterations = 20, .absolute_floor = 1e-12};
  // restarted above 200 vectors to bound Krylov storage on the full grid
  s.gmres = {.tolerance = 1e-3, .max_iterations = 500, .restart = 200};
  return s;
}

// ---------------------------------------------------------------------------
// Configuration text

namespace {

using Ptree = boost::property_tree::ptree;

struct KeyTable {
  // full key ("section.key") -> textual value
  std::vector<std::pair<std::string, std::string>> entries;
  void add(const std::string& key, std::string value) { entries.emplace_back(key, std::move(value)); }
  void add(const std::string& key, double value) { add(key, format_double(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
};

std::string format_doses(const std::vector<Dose>& doses) {
  std::string out;
  for (const auto& d : doses) {
    if (!out.empty()) out += ' ';
    out += format_double(d.time) + ':' + format_double(d.amount);
  }
  return out;
}

void add_schedule(KeyTable& t, const std::string& section, const TherapySchedule& s) {
  t.add(section + ".beta", s.beta);
  t.add(section + ".tau", s.tau);
  t.add(section + ".dose_unit", s.dose_unit);
  t.add(section + ".doses", format_doses(s.doses));
}

KeyTable to_table(const Scenario& s) {
  KeyTable t;
  t.add("scenario.name", s.name);
  t.add("scenario.tumor", to_string(s.tumor));
  t.add("scenario.variant", to_string(s.variant));
  t.add("scenario.therapy", to_string(s.plan));

  const auto& p = s.params;
  t.add("model.lambda", p.lambda);
  t.add("model.M", p.mobility);
  t.add("model.m_ref", p.m_ref);
  t.add("model.K_rho", p.K_rho);
  t.add("model.Kbar_rho", p.Kbar_rho);
  t.add("model.K_A", p.K_A);
  t.add("model.Kbar_A", p.Kbar_A);
  t.add("model.sigma_l", p.sigma_l);
  t.add("model.sigma_r", p.sigma_r);
  t.add("model.sigma_provenance", s.sigma_provenance);
  t.add("model.eta", p.eta);
  t.add("model.S_h", p.S_h);
  t.add("model.S_c", p.S_c);
  t.add("model.gamma_h", p.gamma_h);
  t.add("model.gamma_c", p.gamma_c);
  t.add("model.D", p.D_psa);
  t.add("model.alpha_h", p.alpha_h);
  t.add("model.alpha_c", p.alpha_c);
  t.add("model.gamma_p", p.gamma_p);

  if (s.cytotoxic) add_schedule(t, "cytotoxic", *s.cytotoxic);
  if (s.antiangiogenic) add_schedule(t, "antiangiogenic", *s.antiangiogenic);

  t.add("domain.side", s.side);
  t.add("domain.elements", s.elements);
  t.add("time.dt", s.dt);
  t.add("time.horizon", s.horizon);
  t.add("time.rho_inf", s.rho_inf);

  t.add("initial.a", s.initial.a);
  t.add("initial.b", s.initial.b);
  t.add("initial.c_sigma0", s.initial.c_sigma0);
  t.add("initial.c_sigma1", s.initial.c_sigma1);
  t.add("initial.c_p0", s.initial.c_p0);
  t.add("initial.c_p1", s.initial.c_p1);

  t.add("solver.newton_tolerance", s.newton.tolerance);
  t.add("solver.newton_max_iterations", s.newton.max_iterations);
  t.add("solver.newton_floor", s.newton.absolute_floor);
  t.add("solver.gmres_tolerance", s.gmres.tolerance);
  t.add("solver.gmres_max_iterations", s.gmres.max_iterations);
  t.add("solver.gmres_restart", s.gmres.restart);

  t.add("output.observe_interval", s.observe_interval);
  t.add("output.snapshot_interval", s.snapshot_interval);
  return t;
}

// Reads typed values out of the parsed tree, remembering which keys were used.
class Reader {
 public:
  Reader(const Ptree& tree, std::map<std::string, int> lines) : tree_(tree), lines_(std::move(lines)) {}

  [[nodiscard]] bool has_section(const std::string& s) const { return tree_.get_child_optional(s).has_value(); }

  [[nodiscard]] std::string text(const std::string& key) {
    used_.insert(key);
    const auto v = tree_.get_optional<std::string>(Ptree::path_type(key, '.'));
    if (!v) throw ConfigError("missing key '" + key + "'");
    return *v;
  }

  double number(const std::string& key) {
    const std::string s = trim(text(key));
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
      fail(key, "expected a finite number, got '" + s + "'");
    return v;
  }

  int integer(const std::string& key) {
    const std::string s = trim(text(key));
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
      fail(key, "expected an integer, got '" + s + "'");
    return v;
  }

  template <typename E, std::size_t N>
  E choice(const std::string& key, const char* const (&names)[N]) {
    const std::string s = trim(text(key));
    const auto v = lookup<E>(names, s);
    if (!v) {
      std::string allowed;
      for (const char* n : names) allowed += std::string(allowed.empty() ? "" : "|") + n;
      fail(key, "expected one of " + allowed + ", got '" + s + "'");
    }
    return *v;
  }

  std::vector<Dose> doses(const std::string& key) {
    std::vector<Dose> out;
    std::istringstream is(text(key));
    std::string item;
    while (is >> item) {
      const auto colon = item.find(':');
      Dose d;
      const char* b = item.data();
      const char* e = b + item.size();
      const auto r1 = std::from_chars(b, colon == std::string::npos ? e : b + colon, d.time);
      const auto r2 = colon == std::string::npos ? std::from_chars_result{b, std::errc::invalid_argument}
                                                 : std::from_chars(b + colon + 1, e, d.amount);
      if (colon == std::string::npos || r1.ec != std::errc() || r1.ptr != b + colon || r2.ec != std::errc() ||
          r2.ptr != e)
        fail(key, "expected time:amount pairs, got '" + item + "'");
      out.push_back(d);
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto it = lines_.find(key);
    const std::string where = it == lines_.end() ? "" : "line " + std::to_string(it->second) + ": ";
    throw ConfigError(where + "key '" + key + "': " + msg);
  }

  void reject_unused() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty())
        fail(section, "key outside any section");
      for (const auto& [key, value] : body) {
        const std::string full = section + '.' + key;
        if (!used_.contains(full)) fail(full, "unknown key");
      }
    }
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

 private:
  const Ptree& tree_;
  std::map<std::string, int> lines_;
  std::set<std::string> used_;
};

// Line number of each "section.key" for diagnostics.
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> out;
  std::istringstream is(text);
  std::string line, section;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string t = Reader::trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = Reader::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    out.emplace((section.empty() ? "" : section + '.') + Reader::trim(t.substr(0, eq)), n);
  }
  return out;
}

TherapySchedule read_schedule(Reader& r, const std::string& section) {
  TherapySchedule s;
  s.beta = r.number(section + ".beta");
  s.tau = r.number(section + ".tau");
  s.dose_unit = Reader::trim(r.text(section + ".dose_unit"));
  s.doses = r.doses(section + ".doses");
  if (const auto bad = s.violations(); !bad.empty()) r.fail(section + ".doses", "invalid schedule: " + bad.front());
  return s;
}

}  // namespace

std::string to_config(const Scenario& s) {
  const auto table = to_table(s);
  std::ostringstream os;
  std::string section;
  for (const auto& [key, value] : table.entries) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << value << '\n';
  }
  return os.str();
}

Scenario parse_config_text(const std::string& text) {
  Ptree tree;
  try {
    std::istringstream is(text);
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }
  Reader r(tree, key_lines(text));

  Scenario s;
  s.name = Reader::trim(r.text("scenario.name"));
  s.tumor = r.choice<TumorClass>("scenario.tumor", kTumorNames);
  s.variant = r.choice<NutrientVariant>("scenario.variant", kVariantNames);
  s.plan = r.choice<TherapyPlan>("scenario.therapy", kPlanNames);

  auto& p = s.params;
  p.lambda = r.number("model.lambda");
  p.mobility = r.number("model.M");
  p.m_ref = r.number("model.m_ref");
  p.K_rho = r.number("model.K_rho");
  p.Kbar_rho = r.number("model.Kbar_rho");
  p.K_A = r.number("model.K_A");
  p.Kbar_A = r.number("model.Kbar_A");
  p.sigma_l = r.number("model.sigma_l");
  p.sigma_r = r.number("model.sigma_r");
  s.sigma_provenance = Reader::trim(r.text("model.sigma_provenance"));
  p.eta = r.number("model.eta");
  p.S_h = r.number("model.S_h");
  p.S_c = r.number("model.S_c");
  p.gamma_h = r.number("model.gamma_h");
  p.gamma_c = r.number("model.gamma_c");
  p.D_psa = r.number("model.D");
  p.alpha_h = r.number("model.alpha_h");
  p.alpha_c = r.number("model.alpha_c");
  p.gamma_p = r.number("model.gamma_p");
  if (const auto bad = p.violations(); !bad.empty()) r.fail("model." + bad.front(), "must be positive and finite");

  if (r.has_section("cytotoxic")) s.cytotoxic = read_schedule(r, "cytotoxic");
  if (r.has_section("antiangiogenic")) s.antiangiogenic = read_schedule(r, "antiangiogenic");

  s.side = r.number("domain.side");
  s.elements = r.integer("domain.elements");
  if (!(s.side > 0.0)) r.fail("domain.side", "must be positive");
  if (s.elements < 4) r.fail("domain.elements", "must be at least 4");
  s.dt = r.number("time.dt");
  s.horizon = r.number("time.horizon");
  s.rho_inf = r.number("time.rho_inf");
  if (!(s.dt > 0.0)) r.fail("time.dt", "must be positive");
  if (s.horizon < 0.0) r.fail("time.horizon", "must be non-negative");
  if (s.rho_inf < 0.0 || s.rho_inf > 1.0) r.fail("time.rho_inf", "must lie in [0, 1]");

  s.initial.a = r.number("initial.a");
  s.initial.b = r.number("initial.b");
  s.initial.c_sigma0 = r.number("initial.c_sigma0");
  s.initial.c_sigma1 = r.number("initial.c_sigma1");
  s.initial.c_p0 = r.number("initial.c_p0");
  s.initial.c_p1 = r.number("initial.c_p1");
  if (!(s.initial.a > 0.0)) r.fail("initial.a", "must be positive");
  if (!(s.initial.b > 0.0)) r.fail("initial.b", "must be positive");

  s.newton.tolerance = r.number("solver.newton_tolerance");
  s.newton.max_iterations = r.integer("solver.newton_max_iterations");
  s.newton.absolute_floor = r.number("solver.newton_floor");
  s.gmres.tolerance = r.number("solver.gmres_tolerance");
  s.gmres.max_iterations = r.integer("solver.gmres_max_iterations");
  s.gmres.restart = r.integer("solver.gmres_restart");
  if (!(s.newton.tolerance > 0.0)) r.fail("solver.newton_tolerance", "must be positive");
  if (s.newton.max_iterations < 1) r.fail("solver.newton_max_iterations", "must be at least 1");
  if (!(s.gmres.tolerance > 0.0)) r.fail("solver.gmres_tolerance", "must be positive");
  if (s.gmres.max_iterations < 1) r.fail("solver.gmres_max_iterations", "must be at least 1");
  if (s.gmres.restart < 0) r.fail("solver.gmres_restart", "must be non-negative");

  s.observe_interval = r.number("output.observe_interval");
  s.snapshot_interval = r.number("output.snapshot_interval");
  if (!(s.observe_interval > 0.0)) r.fail("output.observe_interval", "must be positive");
  if (s.snapshot_interval < 0.0) r.fail("output.snapshot_interval", "must be non-negative");

  r.reject_unused();
  return s;
}

Scenario parse_config(std::istream& in) {
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

Scenario load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

double initial_phi(const Scenario& s, double x, double y) {
  const double c = 0.5 * s.side;
  const double dx = (x - c) / s.initial.a;
  const double dy = (y - c) / s.initial.b;
  return 0.5 - 0.5 * std::tanh(10.0 * (std::sqrt(dx * dx + dy * dy) - 1.0));
}

DrugInputs drug_inputs(const Scenario& s) {
  DrugInputs d;
  if (s.cytotoxic) d.u = [sch = *s.cytotoxic](double t) { return drug_effect(t, sch); };
  if (s.antiangiogenic) d.s = [sch = *s.antiangiogenic](double t) { return drug_effect(t, sch); };
  return d;
}

ValidationReport validate(const Scenario& s) {
  return validate_scenario(s.params, s.cytotoxic, s.antiangiogenic, s.horizon);
}

SystemState initial_state(const Scenario& s, const Discretization& disc) {
  SystemState state(disc.field_size(), 0.0);
  const auto phi = disc.l2_project([&](double x, double y) { return initial_phi(s, x, y); });
  const auto sigma = disc.l2_project(
      [&](double x, double y) { return s.initial.c_sigma0 + s.initial.c_sigma1 * initial_phi(s, x, y); });
  const auto psa =
      disc.l2_project([&](double x, double y) { return s.initial.c_p0 + s.initial.c_p1 * initial_phi(s, x, y); });
  std::copy(phi.begin(), phi.end(), state.phi().begin());
  std::copy(sigma.begin(), sigma.end(), state.sigma().begin());
  std::copy(psa.begin(), psa.end(), state.psa().begin());
  disc.apply_dirichlet(state.U);

  const Integrator integrator(disc, AlphaParams::from_rho_inf(s.rho_inf), {s.dt, s.newton, s.gmres});
  integrator.initialize_rates(state, drug_inputs(s));
  return state;
}

TimeSeriesRow observe(const Scenario& s, const SplineSpace2D& space, const SystemState& state,
                      const RunStats& since_last) {
  TimeSeriesRow row;
  row.t = state.t;
  const auto vol = tumor_volume(state.phi(), space);
  row.tumor_mm2 = vol.tumor_mm2();
  row.tumor_fraction = vol.fraction;
  row.healthy_mm2 = vol.healthy_mm2();
  const auto psa = serum_psa(state.psa(), space);
  row.serum_raw = psa.raw;
  row.serum_mean = psa.mean;
  row.u = cytotoxic_u(state.t, s.cytotoxic);
  row.s = antiangiogenic_s(state.t, s.antiangiogenic);
  const auto b = bounds_monitor(state, space);
  row.min_phi = b.min_phi.value;
  row.max_phi = b.max_phi.value;
  row.min_sigma = b.min_sigma.value;
  row.min_p = b.min_psa.value;
  row.newton_iterations = since_last.newton_iterations;
  row.gmres_iterations = since_last.gmres_iterations;
  return row;
}

BoundViolation::BoundViolation(double time, const BoundsReport& report)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "at t = " << time << " days: invariant region violated (min phi " << report.min_phi.value
           << ", max phi " << report.max_phi.value << ", min sigma " << report.min_sigma.value << ", min p "
           << report.min_psa.value << ")";
        return os.str();
      }()),
      report_(report) {}

SimulationResult simulate(const Scenario& s, const SimulationOptions& options) {
  const Discretization disc(SplineSpace2D(s.side, s.elements), s.params);
  const Integrator integrator(disc, AlphaParams::from_rho_inf(s.rho_inf), {s.dt, s.newton, s.gmres});
  const auto drugs = drug_inputs(s);

  SimulationResult result;
  result.final_state = initial_state(s, disc);

  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  std::vector<Observer> observers;
  observers.push_back({s.observe_interval, [&](const SystemState& st, const RunStats& since) {
                         result.rows.push_back(observe(s, disc.space(), st, since));
                         if (options.halt_on_bounds) {
                           const auto b = bounds_monitor(st, disc.space(), options.bounds_tolerance);
                           if (b.violated()) throw BoundViolation(st.t, b);
                         }
                       }});
  if (options.output_dir && s.snapshot_interval > 0.0)
    observers.push_back({s.snapshot_interval, [&](const SystemState& st, const RunStats&) {
                           write_snapshot(st, disc.space(), *options.output_dir / snapshot_filename(st.t));
                         }});
  for (const auto& o : options.extra_observers) observers.push_back(o);

  RunControls run;
  run.horizon = s.horizon;
  for (const auto* sch : {s.cytotoxic ? &*s.cytotoxic : nullptr, s.antiangiogenic ? &*s.antiangiogenic : nullptr})
    if (sch)
      for (const auto& d : sch->doses) run.breakpoints.push_back(d.time);

  try {
    result.stats = run_simulation(integrator, result.final_state, drugs, run, observers);
  } catch (...) {
    if (options.output_dir) write_timeseries(*options.output_dir / "timeseries.csv", result.rows);
    throw;
  }
  if (options.output_dir) write_timeseries(*options.output_dir / "timeseries.csv", result.rows);
  return result;
}

}  // namespace tumorsim
