// Command-line entry point: run scenarios, list presets, validate
// parameters and run the verification suites.
//
// Exit codes: 0 success, 1 solver failure or failed check, 2 usage or
// configuration error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tumorsim/output.hpp"
#include "tumorsim/scenario.hpp"
#include "tumorsim/verification.hpp"

namespace ts = tumorsim;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct ScenarioFlags {
  std::vector<std::string> presets;
  std::string config;
  std::optional<int> elements;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<double> observe;
  std::optional<double> snapshot;
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& f, bool many) {
  auto* p = cmd->add_option("--preset", f.presets, many ? "Preset name(s), class/variant/therapy" : "Preset name");
  if (!many) p->expected(1);
  cmd->add_option("--config", f.config, "Scenario config file")->check(CLI::ExistingFile)->excludes(p);
  cmd->add_option("--nel", f.elements, "Elements per side")->check(CLI::Range(4, 4096));
  cmd->add_option("--horizon", f.horizon, "End time [day]")->check(CLI::NonNegativeNumber);
  cmd->add_option("--dt", f.dt, "Time step [day]")->check(CLI::PositiveNumber);
  cmd->add_option("--observe-every", f.observe, "Time-series cadence [day]")->check(CLI::PositiveNumber);
  cmd->add_option("--snapshot-every", f.snapshot, "VTK cadence [day], 0 disables")->check(CLI::NonNegativeNumber);
}

ts::Scenario apply_overrides(ts::Scenario s, const ScenarioFlags& f) {
  if (f.elements) s.elements = *f.elements;
  if (f.horizon) s.horizon = *f.horizon;
  if (f.dt) s.dt = *f.dt;
  if (f.observe) s.observe_interval = *f.observe;
  if (f.snapshot) s.snapshot_interval = *f.snapshot;
  return s;
}

// Scenarios named by the flags; throws ConfigError or UnknownPreset.
std::vector<ts::Scenario> scenarios_from(const ScenarioFlags& f) {
  std::vector<ts::Scenario> out;
  if (!f.config.empty()) out.push_back(apply_overrides(ts::load_config(f.config), f));
  for (const auto& name : f.presets) out.push_back(apply_overrides(ts::preset(name), f));
  if (out.empty()) throw CLI::ValidationError("one of --preset or --config is required");
  return out;
}

std::string directory_name(const std::string& preset) {
  std::string s = preset;
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

int run_command(const ScenarioFlags& flags, const std::string& out, int jobs, bool halt_on_bounds, bool progress) {
  std::vector<ts::Scenario> scenarios;
  try {
    scenarios = scenarios_from(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  std::mutex io;
  std::atomic<int> status{kOk};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      const auto& s = scenarios[i];
      const std::filesystem::path dir =
          scenarios.size() == 1 ? std::filesystem::path(out) : std::filesystem::path(out) / directory_name(s.name);
      ts::SimulationOptions opt;
      opt.output_dir = dir;
      opt.halt_on_bounds = halt_on_bounds;
      if (progress)
        opt.extra_observers.push_back({s.observe_interval, [&, name = s.name](const ts::SystemState& st,
                                                                             const ts::RunStats& since) {
                                         std::lock_guard lock(io);
                                         std::cerr << name << " t=" << st.t << " newton=" << since.newton_iterations
                                                   << " gmres=" << since.gmres_iterations << '\n';
                                       }});
      try {
        const auto res = ts::simulate(s, opt);
        std::lock_guard lock(io);
        std::cout << s.name << ": " << res.stats.steps << " steps, " << res.stats.newton_iterations
                  << " Newton iterations, " << res.stats.gmres_iterations << " GMRES iterations -> " << dir.string()
                  << '\n';
      } catch (const std::exception& e) {
        std::lock_guard lock(io);
        std::cerr << "error: " << s.name << ": " << e.what() << '\n';
        status = kFailure;
      }
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(scenarios.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return status;
}

int validate_command(const ScenarioFlags& flags) {
  std::vector<ts::Scenario> scenarios;
  try {
    scenarios = scenarios_from(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  int status = kOk;
  for (const auto& s : scenarios) {
    const auto r = ts::validate(s);
    std::printf("%s\n", s.name.c_str());
    std::printf("  double-well  sup|m - m_ref u| = %.6g < 1/3 : %s\n", r.tilt_supremum,
                r.tilt_supremum < 1.0 / 3.0 ? "pass" : "FAIL");
    std::printf("  supply       sup s = %.6g <= S_c = %.6g : %s\n", r.antiangiogenic_supremum, s.params.S_c,
                r.antiangiogenic_supremum <= s.params.S_c ? "pass" : "FAIL");
    for (const auto& issue : r.issues) {
      std::printf("  issue [%s] %s", issue.check.c_str(), issue.message.c_str());
      if (issue.time) std::printf(" (t = %g)", *issue.time);
      std::printf("\n");
    }
    std::printf("  result: %s\n", r.passed ? "pass" : "FAIL");
    if (!r.passed) status = kFailure;
  }
  return status;
}

int verify_command(const std::string& suite, const std::string& report) {
  std::vector<ts::verification::ReportRow> rows;
  try {
    rows = ts::verification::run_suite(suite);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: verification run failed: " << e.what() << '\n';
    return kFailure;
  }
  const auto text = ts::verification::format_report(rows);
  if (report.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(report);
    if (!f) {
      std::cerr << "error: cannot write " << report << '\n';
      return kFailure;
    }
    f << text;
  }
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.passed; });
  for (const auto& r : rows)
    if (!r.passed) std::cerr << "FAIL " << r.suite << ' ' << r.metric << " = " << r.value << " (" << r.criterion << ")\n";
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-field prostate tumor growth simulator"};
  app.require_subcommand(1);

  ScenarioFlags run_flags;
  std::string out = "out";
  int jobs = 1;
  bool halt = false;
  bool progress = false;
  auto* run = app.add_subcommand("run", "Simulate presets or a config file");
  add_scenario_flags(run, run_flags, true);
  run->add_option("--out", out, "Output directory (one subdirectory per preset when several)");
  run->add_option("--jobs", jobs, "Presets simulated concurrently")->check(CLI::PositiveNumber);
  run->add_flag("--halt-on-bounds", halt, "Stop when phi leaves [-0.05, 1.05] or sigma, p < -0.05");
  run->add_flag("--progress", progress, "Print one line per observation to stderr");

  app.add_subcommand("list-presets", "Print the preset catalog");

  ScenarioFlags validate_flags;
  auto* validate = app.add_subcommand("validate", "Check the double-well and supply bounds");
  add_scenario_flags(validate, validate_flags, true);

  ScenarioFlags dump_flags;
  auto* dump = app.add_subcommand("dump-config", "Print a scenario as config text");
  add_scenario_flags(dump, dump_flags, false);

  std::string suite = "all";
  std::string report;
  auto* verify = app.add_subcommand("verify", "Run verification suites; CSV report on stdout or --report");
  verify->add_option("--suite", suite, "jacobian | oracle | mms-space | mms-time | dependence | all");
  verify->add_option("--report", report, "Write the CSV report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*run) return run_command(run_flags, out, jobs, halt, progress);
  if (app.got_subcommand("list-presets")) {
    for (const auto& name : ts::preset_names()) std::cout << name << '\n';
    return kOk;
  }
  if (*validate) return validate_command(validate_flags);
  if (*dump) {
    try {
      std::cout << ts::to_config(scenarios_from(dump_flags).front());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kUsage;
    }
    return kOk;
  }
  if (*verify) return verify_command(suite, report);
  return kUsage;
}
