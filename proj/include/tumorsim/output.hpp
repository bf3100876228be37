#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "tumorsim/spline_space.hpp"
#include "tumorsim/state.hpp"

namespace tumorsim {

struct TimeSeriesRow;

inline constexpr std::string_view kTimeseriesHeader =
    "t_day,V_c_mm2,V_c_frac,V_h_mm2,P_s_raw,P_s_mean,u,s,min_phi,max_phi,min_sigma,min_p,newton_iters,gmres_iters";

/// CSV text: header plus one line per row, 17 significant digits, '\n' endings.
std::string format_timeseries(std::span<const TimeSeriesRow> rows);
/// Throws std::runtime_error naming the path on I/O failure.
void write_timeseries(const std::filesystem::path& path, std::span<const TimeSeriesRow> rows);

/// "fields_t0005.vtk" for t = 5 days.
std::string snapshot_filename(double t);

/// Legacy VTK structured points (ASCII) of phi, sigma and p evaluated on the
/// (2 n_el + 1)^2 lattice, origin (0, 0, 0), spacing L / (2 n_el).
///
///   # vtk DataFile Version 3.0
///   tumorsim fields t=<t>
///   ASCII
///   DATASET STRUCTURED_POINTS
///   DIMENSIONS m m 1
///   ORIGIN 0 0 0
///   SPACING d d 1
///   POINT_DATA m*m
///   SCALARS phi double 1 / LOOKUP_TABLE default / m*m values, x fastest
///   (then sigma and p the same way)
std::string format_snapshot(const SystemState& state, const SplineSpace2D& space);
void write_snapshot(const SystemState& state, const SplineSpace2D& space, const std::filesystem::path& path);

}  // namespace tumorsim
