#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tumorsim/model.hpp"
#include "tumorsim/spline_space.hpp"
#include "tumorsim/state.hpp"

namespace tumorsim {

struct TumorVolume {
  double tumor_um2 = 0.0;    ///< int phi dx
  double healthy_um2 = 0.0;  ///< |Omega| - V_c
  double fraction = 0.0;     ///< V_c / |Omega|
  [[nodiscard]] double tumor_mm2() const { return tumor_um2 * 1e-6; }
  [[nodiscard]] double healthy_mm2() const { return healthy_um2 * 1e-6; }
};

/// Diffuse-interface tumor volume V_c = int phi dx, by quadrature.
TumorVolume tumor_volume(std::span<const double> phi, const SplineSpace2D& space);
/// Thresholded tumor area |{phi > 1/2}| estimated on the quadrature points [um^2].
double thresholded_area(std::span<const double> phi, const SplineSpace2D& space);

struct SerumPsa {
  double raw = 0.0;   ///< int p dx [ng/mL/cc * um^2]
  double mean = 0.0;  ///< raw / |Omega|
};

/// Serum PSA as the integral of tissue PSA over the domain.
SerumPsa serum_psa(std::span<const double> psa, const SplineSpace2D& space);

struct PsaSample {
  double t = 0.0;
  double serum = 0.0;    ///< P_s
  double healthy = 0.0;  ///< V_h
  double tumor = 0.0;    ///< V_c
};

/// max over interior samples of |dP_s/dt - (alpha_h V_h + alpha_c V_c - gamma_p P_s)|
/// with a centred difference for dP_s/dt. Samples must be uniformly spaced.
/// Throws std::invalid_argument with fewer than 3 samples.
double psa_ode_residual(std::span<const PsaSample> samples, const ModelParameters& params);
/// max over interior samples of |dP_s/dt| (centred difference).
double psa_rate_max(std::span<const PsaSample> samples);

struct Extremum {
  double value = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct BoundsReport {
  Extremum min_phi, max_phi, min_sigma, min_psa;
  bool phi_below = false;    ///< min phi < -tolerance
  bool phi_above = false;    ///< max phi > 1 + tolerance
  bool sigma_negative = false;
  bool psa_negative = false;
  [[nodiscard]] bool violated() const { return phi_below || phi_above || sigma_negative || psa_negative; }
};

/// Field extrema at the quadrature points, flagged against the invariant
/// region 0 <= phi <= 1, sigma >= 0, p >= 0 widened by `tolerance`.
BoundsReport bounds_monitor(const SystemState& state, const SplineSpace2D& space, double tolerance = 0.0);

/// Samples a field on the (2 n_el + 1)^2 lattice with spacing h/2.
std::vector<double> sample_lattice(std::span<const double> coeffs, const SplineSpace2D& space,
                                   int samples_per_element = 2);

struct ContourShape {
  double area = 0.0;       ///< enclosed area of {phi > level} [um^2]
  double perimeter = 0.0;  ///< total length of the level line [um]
  /// 4 pi A / P^2; empty when there is no contour.
  std::optional<double> isoperimetric_ratio;
};

/// Marching-squares extraction of the phi = level contour on a regular
/// lattice of n x n samples with spacing `spacing`.
ContourShape contour_shape(std::span<const double> samples, int n, double spacing, double level = 0.5);
/// Convenience: contour_shape on the sampled phi field.
ContourShape tumor_shape(std::span<const double> phi, const SplineSpace2D& space, int samples_per_element = 2);

}  // namespace tumorsim
