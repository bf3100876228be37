#include "tumorsim/output.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "tumorsim/observables.hpp"
#include "tumorsim/scenario.hpp"

namespace tumorsim {

namespace {

void append(std::string& out, const char* fmt, double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, fmt, v);
  out.append(buf, static_cast<std::size_t>(n));
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing: " + std::strerror(errno));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string format_timeseries(std::span<const TimeSeriesRow> rows) {
  std::string out(kTimeseriesHeader);
  out += '\n';
  for (const auto& r : rows) {
    for (double v : {r.t, r.tumor_mm2, r.tumor_fraction, r.healthy_mm2, r.serum_raw, r.serum_mean, r.u, r.s,
                     r.min_phi, r.max_phi, r.min_sigma, r.min_p}) {
      append(out, "%.17g", v);
      out += ',';
    }
    out += std::to_string(r.newton_iterations) + ',' + std::to_string(r.gmres_iterations) + '\n';
  }
  return out;
}

void write_timeseries(const std::filesystem::path& path, std::span<const TimeSeriesRow> rows) {
  write_file(path, format_timeseries(rows));
}

std::string snapshot_filename(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fields_t%04lld.vtk", std::llround(t));
  return buf;
}

std::string format_snapshot(const SystemState& state, const SplineSpace2D& space) {
  const int m = 2 * space.elements_per_side() + 1;
  const double d = space.side() / (m - 1);
  std::string out = "# vtk DataFile Version 3.0\ntumorsim fields t=";
  append(out, "%.17g", state.t);
  out += "\nASCII\nDATASET STRUCTURED_POINTS\n";
  out += "DIMENSIONS " + std::to_string(m) + ' ' + std::to_string(m) + " 1\n";
  out += "ORIGIN 0 0 0\nSPACING ";
  append(out, "%.17g", d);
  out += ' ';
  append(out, "%.17g", d);
  out += " 1\nPOINT_DATA " + std::to_string(m * m) + '\n';
  const std::pair<const char*, std::span<const double>> fields[] = {
      {"phi", state.phi()}, {"sigma", state.sigma()}, {"p", state.psa()}};
  for (const auto& [name, coeffs] : fields) {
    out += "SCALARS ";
    out += name;
    out += " double 1\nLOOKUP_TABLE default\n";
    for (double v : sample_lattice(coeffs, space, 2)) {
      append(out, "%.10g", v);
      out += '\n';
    }
  }
  return out;
}

void write_snapshot(const SystemState& state, const SplineSpace2D& space, const std::filesystem::path& path) {
  write_file(path, format_snapshot(state, space));
}

}  // namespace tumorsim
