#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "tumorsim/output.hpp"
#include "tumorsim/scenario.hpp"

using namespace tumorsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("tumorsim_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace_line(std::string text, const std::string& prefix, const std::string& line) {
  const auto at = text.find("\n" + prefix);
  REQUIRE(at != std::string::npos);
  const auto end = text.find('\n', at + 1);
  return text.replace(at + 1, end - at - 1, line);
}

}  // namespace

TEST_CASE("preset catalog") {
  const auto names = preset_names();
  CHECK(names.size() == 40);
  const auto m = preset("mild/reference/none");
  CHECK(m.params.K_rho == 0.8e-2);
  CHECK(m.params.K_A == 0.7e-2);
  CHECK(m.params.lambda == 640.0);
  CHECK(m.params.S_c == 2.75);
  CHECK(m.params.gamma_c == 17.0);
  CHECK_FALSE(m.cytotoxic);
  CHECK_FALSE(m.antiangiogenic);
  CHECK(m.elements == 256);
  CHECK(m.dt == 0.1);
  const auto a = preset("aggressive/poor-supply/combined");
  CHECK(a.params.K_rho == 1.5e-2);
  CHECK(a.params.K_A == 1.37e-2);
  CHECK(a.params.S_c == 2.375);
  REQUIRE(a.cytotoxic);
  REQUIRE(a.antiangiogenic);
  CHECK(a.cytotoxic->doses.size() == 10);
  CHECK(a.cytotoxic->doses.front().amount == 75.0);
  CHECK(a.antiangiogenic->doses.front().amount == 15.0);
  CHECK(preset("mild/high-uptake/none").params.gamma_c == 18.0);
  CHECK(preset("mild/low-uptake/none").params.gamma_c == 16.0);
  CHECK(preset("mild/rich-supply/none").params.S_c == 3.125);
  CHECK_THROWS_AS(preset("mild/reference"), UnknownPreset);
  CHECK_THROWS_AS(preset("medium/reference/none"), UnknownPreset);
  for (const auto& n : names) {
    const auto s = preset(n);
    CHECK(s.name == n);
    CHECK(validate(s).passed);
  }
}

TEST_CASE("config round trip") {
  for (const auto& n : preset_names()) {
    const auto s = preset(n);
    CHECK(parse_config_text(to_config(s)) == s);
  }
  auto s = preset("mild/reference/combined");
  s.dt = 0.0123456789012345;
  s.params.sigma_l = 0.21;
  s.sigma_provenance = "fitted";
  s.cytotoxic->doses[3].time = 123.456;
  s.gmres.restart = 0;
  CHECK(parse_config_text(to_config(s)) == s);

  const auto dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "s.ini") << to_config(s);
  CHECK(load_config(dir / "s.ini") == s);
  CHECK_THROWS_AS(load_config(dir / "missing.ini"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("config errors name the line or key") {
  const auto text = to_config(preset("mild/reference/none"));
  SUBCASE("bad number") {
    const auto e = error_of(replace_line(text, "dt =", "dt = 0.1x"));
    CHECK(e.find("time.dt") != std::string::npos);
    CHECK(e.find("line ") != std::string::npos);
  }
  SUBCASE("unknown key") {
    const auto e = error_of(replace_line(text, "dt =", "dt = 0.1\ndtt = 0.1"));
    CHECK(e.find("dtt") != std::string::npos);
  }
  SUBCASE("missing key") {
    const auto e = error_of(replace_line(text, "lambda =", ""));
    CHECK(e.find("lambda") != std::string::npos);
  }
  SUBCASE("unknown enum") {
    const auto e = error_of(replace_line(text, "tumor =", "tumor = benign"));
    CHECK(e.find("tumor") != std::string::npos);
  }
  SUBCASE("syntax error") {
    const auto e = error_of("[scenario\nname = x\n");
    CHECK(e.find("line 1") != std::string::npos);
  }
}

TEST_CASE("initial profiles") {
  const auto s = preset("mild/reference/none");
  CHECK(initial_phi(s, 1500.0, 1500.0) == doctest::Approx(0.9999999979388463).epsilon(1e-12));
  CHECK(initial_phi(s, 0.0, 0.0) < 1e-15);
  CHECK(initial_phi(s, 1650.0, 1500.0) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(initial_phi(s, 1500.0, 1700.0) == doctest::Approx(0.5).epsilon(1e-3));

  auto small = s;
  small.elements = 16;
  const Discretization d(SplineSpace2D(small.side, small.elements), small.params);
  const auto st = initial_state(small, d);
  for (int j : d.dirichlet_dofs()) CHECK(st.U[j] == 0.0);
  // sigma = 1 - 0.8 phi, p = 0.0625 + 0.7975 phi
  CHECK(d.space().evaluate(st.sigma(), 10.0, 10.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(d.space().evaluate(st.psa(), 10.0, 10.0) == doctest::Approx(0.0625).epsilon(1e-5));
  // consistent rates: the residual at (U-dot_0, U_0) vanishes on free rows
  std::vector<double> R(st.U.size());
  d.assemble_residual({st.Udot, st.U}, {}, R);
  std::vector<double> R0(st.U.size());
  const std::vector<double> zero(st.U.size(), 0.0);
  d.assemble_residual({zero, st.U}, {}, R0);
  double rmax = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    if (i < static_cast<std::size_t>(d.field_size()) && d.space().on_boundary(static_cast<int>(i))) continue;
    rmax = std::max(rmax, std::abs(R[i]));
    scale = std::max(scale, std::abs(R0[i]));
  }
  CHECK(rmax <= 1e-8 * scale);
}

TEST_CASE("time series output") {
  auto s = preset("mild/reference/cytotoxic");
  s.elements = 8;
  s.horizon = 0.0;
  SUBCASE("zero horizon writes the initial row only") {
    const auto dir = scratch("zero");
    SimulationOptions o;
    o.output_dir = dir;
    const auto r = simulate(s, o);
    CHECK(r.rows.size() == 1);
    const auto text = slurp(dir / "timeseries.csv");
    CHECK(text.substr(0, kTimeseriesHeader.size()) == kTimeseriesHeader);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(fs::exists(dir / "fields_t0000.vtk"));
    fs::remove_all(dir);
  }
  SUBCASE("reruns are byte identical") {
    s.horizon = 2.0;
    s.snapshot_interval = 1.0;
    const auto a = scratch("run_a"), b = scratch("run_b");
    SimulationOptions oa, ob;
    oa.output_dir = a;
    ob.output_dir = b;
    const auto ra = simulate(s, oa);
    simulate(s, ob);
    CHECK(ra.rows.size() == 3);
    CHECK(slurp(a / "timeseries.csv") == slurp(b / "timeseries.csv"));
    CHECK(slurp(a / "fields_t0002.vtk") == slurp(b / "fields_t0002.vtk"));
    CHECK(ra.rows.back().t == doctest::Approx(2.0).epsilon(1e-14));
    fs::remove_all(a);
    fs::remove_all(b);
  }
  SUBCASE("values survive the text format") {
    TimeSeriesRow row;
    row.t = 1.0 / 3.0;
    row.tumor_mm2 = 0.09502284123456789;
    row.newton_iterations = 7;
    const auto text = format_timeseries(std::span(&row, 1));
    const auto line = text.substr(text.find('\n') + 1);
    CHECK(std::stod(line) == row.t);
    CHECK(std::stod(line.substr(line.find(',') + 1)) == row.tumor_mm2);
    CHECK(line.find(",7,") != std::string::npos);
  }
  SUBCASE("unwritable path names the path") {
    try {
      write_timeseries("/nonexistent_dir/x/timeseries.csv", {});
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("/nonexistent_dir/x") != std::string::npos);
    }
  }
}

TEST_CASE("VTK snapshot can be read back") {
  const auto sc = preset("mild/reference/none");
  const SplineSpace2D space(3000.0, 4);
  const Discretization d(space, sc.params);
  SystemState st(d.field_size(), 5.0);
  st.U = std::vector<double>(st.U.size());
  for (std::size_t i = 0; i < st.U.size(); ++i) st.U[i] = 0.01 * static_cast<double>(i % 17);
  const auto text = format_snapshot(st, space);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# vtk DataFile Version 3.0");
  std::getline(in, line);
  CHECK(line.find("t=5") != std::string::npos);
  std::getline(in, line);
  CHECK(line == "ASCII");
  std::getline(in, line);
  CHECK(line == "DATASET STRUCTURED_POINTS");
  std::string key;
  int mx = 0, my = 0, mz = 0;
  in >> key >> mx >> my >> mz;
  CHECK(key == "DIMENSIONS");
  CHECK(mx == 9);
  CHECK(mz == 1);
  double ox, oy, oz, dx, dy, dz;
  in >> key >> ox >> oy >> oz >> key >> dx >> dy >> dz;
  CHECK(dx == 375.0);
  int npts = 0;
  in >> key >> npts;
  CHECK(npts == 81);
  for (int f = 0; f < 3; ++f) {
    std::string scalars, name, type, lookup, table;
    int comps;
    in >> scalars >> name >> type >> comps >> lookup >> table;
    CHECK(name == std::array<std::string, 3>{"phi", "sigma", "p"}[f]);
    std::vector<double> v(npts);
    for (auto& x : v) in >> x;
    const auto coeffs = std::span<const double>(st.U).subspan(f * d.field_size(), d.field_size());
    for (int k : {0, 10, 40, 80}) {
      const double x = (k % 9) * dx, y = (k / 9) * dx;
      CHECK(v[k] == doctest::Approx(space.evaluate(coeffs, x, y)).epsilon(1e-9).scale(1e-10));
    }
  }
  CHECK(snapshot_filename(5.0) == "fields_t0005.vtk");
  CHECK(snapshot_filename(365.0) == "fields_t0365.vtk");
}

TEST_CASE("bounds halt") {
  auto s = preset("mild/reference/none");
  s.elements = 8;
  s.horizon = 1.0;
  SimulationOptions o;
  o.halt_on_bounds = true;
  o.bounds_tolerance = -1.0;  // any state violates a negative tolerance
  CHECK_THROWS_AS(simulate(s, o), BoundViolation);
}
