#include "tumorsim/observables.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace tumorsim {

namespace {

// Calls fn(x, y, w, value) at every quadrature point of every element.
template <typename Fn>
void for_each_quadrature_value(std::span<const double> coeffs, const SplineSpace2D& space, Fn&& fn) {
  const int n_el = space.elements_per_side();
  const int nq = space.quad_per_dir();
  const int n1 = space.basis_per_direction();
  for (int ey = 0; ey < n_el; ++ey)
    for (int ex = 0; ex < n_el; ++ex)
      for (int qy = 0; qy < nq; ++qy)
        for (int qx = 0; qx < nq; ++qx) {
          double v = 0.0;
          for (int b = 0; b < 3; ++b)
            for (int a = 0; a < 3; ++a)
              v += coeffs[(ex + a) + n1 * (ey + b)] * space.table_value(ex, qx, a) * space.table_value(ey, qy, b);
          fn(space.quad_coordinate(ex, qx), space.quad_coordinate(ey, qy), space.quad_weight(qx, qy), v);
        }
}

}  // namespace

TumorVolume tumor_volume(std::span<const double> phi, const SplineSpace2D& space) {
  TumorVolume v;
  for_each_quadrature_value(phi, space, [&](double, double, double w, double val) { v.tumor_um2 += w * val; });
  v.healthy_um2 = space.area() - v.tumor_um2;
  v.fraction = v.tumor_um2 / space.area();
  return v;
}

double thresholded_area(std::span<const double> phi, const SplineSpace2D& space) {
  double area = 0.0;
  for_each_quadrature_value(phi, space, [&](double, double, double w, double val) {
    if (val > 0.5) area += w;
  });
  return area;
}

SerumPsa serum_psa(std::span<const double> psa, const SplineSpace2D& space) {
  SerumPsa s;
  for_each_quadrature_value(psa, space, [&](double, double, double w, double val) { s.raw += w * val; });
  s.mean = s.raw / space.area();
  return s;
}

double psa_ode_residual(std::span<const PsaSample> samples, const ModelParameters& params) {
  if (samples.size() < 3) throw std::invalid_argument("psa_ode_residual: need at least 3 samples");
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < samples.size(); ++k) {
    const auto& s = samples[k];
    const double rate = (samples[k + 1].serum - samples[k - 1].serum) / (samples[k + 1].t - samples[k - 1].t);
    const double model = params.alpha_h * s.healthy + params.alpha_c * s.tumor - params.gamma_p * s.serum;
    worst = std::max(worst, std::abs(rate - model));
  }
  return worst;
}

double psa_rate_max(std::span<const PsaSample> samples) {
  if (samples.size() < 3) throw std::invalid_argument("psa_rate_max: need at least 3 samples");
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < samples.size(); ++k)
    worst = std::max(worst, std::abs((samples[k + 1].serum - samples[k - 1].serum) /
                                     (samples[k + 1].t - samples[k - 1].t)));
  return worst;
}

BoundsReport bounds_monitor(const SystemState& state, const SplineSpace2D& space, double tolerance) {
  BoundsReport r;
  constexpr double inf = std::numeric_limits<double>::infinity();
  r.min_phi.value = inf;
  r.max_phi.value = -inf;
  r.min_sigma.value = inf;
  r.min_psa.value = inf;
  auto lower = [](Extremum& e, double x, double y, double v) {
    if (v < e.value) e = {v, x, y};
  };
  for_each_quadrature_value(state.phi(), space, [&](double x, double y, double, double v) {
    lower(r.min_phi, x, y, v);
    if (v > r.max_phi.value) r.max_phi = {v, x, y};
  });
  for_each_quadrature_value(state.sigma(), space, [&](double x, double y, double, double v) { lower(r.min_sigma, x, y, v); });
  for_each_quadrature_value(state.psa(), space, [&](double x, double y, double, double v) { lower(r.min_psa, x, y, v); });
  r.phi_below = r.min_phi.value < -tolerance;
  r.phi_above = r.max_phi.value > 1.0 + tolerance;
  r.sigma_negative = r.min_sigma.value < -tolerance;
  r.psa_negative = r.min_psa.value < -tolerance;
  return r;
}

std::vector<double> sample_lattice(std::span<const double> coeffs, const SplineSpace2D& space,
                                   int samples_per_element) {
  const int m = samples_per_element * space.elements_per_side() + 1;
  const double d = space.side() / (m - 1);
  std::vector<double> out(static_cast<std::size_t>(m) * m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(j) * m + i] = space.evaluate(coeffs, i * d, j * d);
  return out;
}

ContourShape contour_shape(std::span<const double> s, int n, double spacing, double level) {
  if (s.size() != static_cast<std::size_t>(n) * n || n < 2)
    throw std::invalid_argument("contour_shape: sample count does not match lattice size");
  ContourShape out;
  auto at = [&](int i, int j) { return s[static_cast<std::size_t>(j) * n + i]; };
  auto cross = [&](double a, double b) { return (level - a) / (b - a); };

  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      // corners counter-clockwise from (i, j)
      const std::array<double, 4> v{at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      const std::array<std::array<double, 2>, 4> c{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
      std::array<bool, 4> in{};
      int count = 0;
      for (int k = 0; k < 4; ++k) count += (in[k] = v[k] > level) ? 1 : 0;
      if (count == 0) continue;
      if (count == 4) {
        out.area += spacing * spacing;
        continue;
      }
      // points where the level line crosses each edge k -> k+1
      std::array<std::array<double, 2>, 4> e{};
      for (int k = 0; k < 4; ++k) {
        const int k1 = (k + 1) % 4;
        if (in[k] != in[k1]) {
          const double f = cross(v[k], v[k1]);
          e[k] = {c[k][0] + f * (c[k1][0] - c[k][0]), c[k][1] + f * (c[k1][1] - c[k][1])};
        }
      }
      auto len = [&](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        return std::hypot(a[0] - b[0], a[1] - b[1]) * spacing;
      };
      auto shoelace = [&](const std::vector<std::array<double, 2>>& poly) {
        double a = 0.0;
        for (std::size_t k = 0; k < poly.size(); ++k) {
          const auto& p = poly[k];
          const auto& q = poly[(k + 1) % poly.size()];
          a += p[0] * q[1] - q[0] * p[1];
        }
        return 0.5 * std::abs(a) * spacing * spacing;
      };
      const bool saddle = count == 2 && in[0] == in[2];
      if (saddle) {
        const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        const int a = in[0] ? 0 : 1;  // the two inside corners are a and a + 2
        if (centre > level) {
          // inside corners connected through the centre: hexagon
          std::vector<std::array<double, 2>> poly;
          for (int k = 0; k < 4; ++k) {
            if (in[k]) poly.push_back(c[k]);
            if (in[k] != in[(k + 1) % 4]) poly.push_back(e[k]);
          }
          out.area += shoelace(poly);
          // segments cut off the two outside corners
          out.perimeter += len(e[a], e[(a + 1) % 4]) + len(e[(a + 2) % 4], e[(a + 3) % 4]);
        } else {
          // two separate corner triangles
          const int b0 = (a + 3) % 4, b2 = (a + 1) % 4;
          out.area += shoelace({c[a], e[a], e[b0]}) + shoelace({c[(a + 2) % 4], e[(a + 2) % 4], e[b2]});
          out.perimeter += len(e[a], e[b0]) + len(e[(a + 2) % 4], e[b2]);
        }
        continue;
      }
      std::vector<std::array<double, 2>> poly;
      std::vector<std::array<double, 2>> crossings;
      for (int k = 0; k < 4; ++k) {
        if (in[k]) poly.push_back(c[k]);
        if (in[k] != in[(k + 1) % 4]) {
          poly.push_back(e[k]);
          crossings.push_back(e[k]);
        }
      }
      out.area += shoelace(poly);
      if (crossings.size() == 2) out.perimeter += len(crossings[0], crossings[1]);
    }
  if (out.perimeter > 0.0) out.isoperimetric_ratio = 4.0 * std::numbers::pi * out.area / (out.perimeter * out.perimeter);
  return out;
}

ContourShape tumor_shape(std::span<const double> phi, const SplineSpace2D& space, int samples_per_element) {
  const auto samples = sample_lattice(phi, space, samples_per_element);
  const int m = samples_per_element * space.elements_per_side() + 1;
  return contour_shape(samples, m, space.side() / (m - 1), 0.5);
}

}  // namespace tumorsim
