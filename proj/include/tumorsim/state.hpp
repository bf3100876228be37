#pragma once

#include <span>
#include <vector>

namespace tumorsim {

/// Control variables of (phi, sigma, p), blocked by field, their time
/// derivatives, and the time level. Dirichlet entries of the phi block are
/// kept at exactly zero.
struct SystemState {
  std::vector<double> U;
  std::vector<double> Udot;
  double t = 0.0;

  SystemState() = default;
  explicit SystemState(int field_size, double time = 0.0)
      : U(3 * static_cast<std::size_t>(field_size), 0.0), Udot(U.size(), 0.0), t(time) {}

  [[nodiscard]] std::size_t field_size() const { return U.size() / 3; }
  [[nodiscard]] std::span<const double> phi() const { return {U.data(), field_size()}; }
  [[nodiscard]] std::span<const double> sigma() const { return {U.data() + field_size(), field_size()}; }
  [[nodiscard]] std::span<const double> psa() const { return {U.data() + 2 * field_size(), field_size()}; }
  [[nodiscard]] std::span<double> phi() { return {U.data(), field_size()}; }
  [[nodiscard]] std::span<double> sigma() { return {U.data() + field_size(), field_size()}; }
  [[nodiscard]] std::span<double> psa() { return {U.data() + 2 * field_size(), field_size()}; }
};

}  // namespace tumorsim
