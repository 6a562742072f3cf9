#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "panoma/config.hpp"

namespace panoma {

// Ground-level user coordinate inside the service rectangle; z is always 0.
struct UserPosition {
  double x_m = 0.0;
  double y_m = 0.0;
  double z_m = 0.0;
};

// Along-waveguide activation coordinates, ascending with spacing >= d_min.
struct PaLayout {
  std::vector<double> positions_m;

  int size() const { return static_cast<int>(positions_m.size()); }
};

struct Wavelengths {
  double lambda_m;
  double lambda_g_m;
};

inline Wavelengths wavelengths(const SystemConfig& cfg) {
  const double lambda = kSpeedOfLight / cfg.carrier_frequency_hz;
  return {lambda, lambda / cfg.effective_refractive_index};
}

inline std::array<double, 3> pa_position(double x_m, const SystemConfig& cfg) {
  return {x_m, 0.0, cfg.pa_height_m};
}

inline double distance(const UserPosition& user, const std::array<double, 3>& pa) {
  const double dx = user.x_m - pa[0];
  const double dy = user.y_m - pa[1];
  const double dz = user.z_m - pa[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Spherical-spreading amplitude with propagation phase. The phase argument is
// kept unreduced; reduce mod 2*pi only when presenting.
inline std::complex<double> free_space_coeff(const UserPosition& user,
                                             const std::array<double, 3>& pa, double lambda_m) {
  const double d = distance(user, pa);
  if (d <= 0.0) throw std::domain_error("free_space_coeff: coincident user and antenna");
  const double magnitude = lambda_m / (4.0 * M_PI * d);
  const double phase = -2.0 * M_PI * d / lambda_m;
  return std::polar(magnitude, phase);
}

// Fraction of guided power radiated by the n-th activation point (1-based).
inline double power_split_coeff(int antenna_index, double coupling_delta) {
  const double d2 = coupling_delta * coupling_delta;
  return d2 * std::pow(1.0 - d2, antenna_index - 1);
}

// In-guide attenuation from the feed to position x, as a linear power factor.
inline double waveguide_loss(double x_m, const SystemConfig& cfg) {
  return std::pow(10.0, -cfg.attenuation_db_per_m * std::abs(cfg.feed_position_m - x_m) / 10.0);
}

inline std::complex<double> waveguide_coeff(int antenna_index, double x_m,
                                            const SystemConfig& cfg) {
  if (antenna_index < 1 || antenna_index > cfg.num_pas)
    throw std::domain_error("waveguide_coeff: antenna index out of range");
  if (x_m < 0.0 || x_m > cfg.waveguide_length_m)
    throw std::domain_error("waveguide_coeff: position outside the waveguide");
  const double psi = power_split_coeff(antenna_index, cfg.coupling_delta);
  const double loss = waveguide_loss(x_m, cfg);
  const double lambda_g = wavelengths(cfg).lambda_g_m;
  const double phase = -2.0 * M_PI * std::abs(cfg.feed_position_m - x_m) / lambda_g;
  return std::polar(std::sqrt(psi) * std::sqrt(loss), phase);
}

// Coherent superposition of all per-antenna contributions.
inline std::complex<double> composite_gain(const UserPosition& user, const PaLayout& layout,
                                           const SystemConfig& cfg) {
  const double lambda = wavelengths(cfg).lambda_m;
  std::complex<double> sum{0.0, 0.0};
  for (int n = 0; n < layout.size(); ++n) {
    const double x = layout.positions_m[static_cast<std::size_t>(n)];
    sum += free_space_coeff(user, pa_position(x, cfg), lambda) * waveguide_coeff(n + 1, x, cfg);
  }
  return sum;
}

inline std::vector<std::complex<double>> composite_gains(
    const std::vector<UserPosition>& users, const PaLayout& layout, const SystemConfig& cfg) {
  std::vector<std::complex<double>> gains;
  gains.reserve(users.size());
  for (const auto& u : users) gains.push_back(composite_gain(u, layout, cfg));
  return gains;
}

inline bool layout_feasible(const PaLayout& layout, const SystemConfig& cfg, double slack = 0.0) {
  const auto& x = layout.positions_m;
  if (x.empty()) return false;
  if (x.front() < -slack || x.back() > cfg.waveguide_length_m + slack) return false;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] - x[i - 1] < cfg.min_spacing_m - slack) return false;
  return true;
}

// Nearest-feasible projection: sort, sweep gaps forward from the left edge,
// then sweep back from the clipped right edge. Feasible inputs pass through
// unchanged and the projection is idempotent.
inline PaLayout project_layout(std::vector<double> raw, const SystemConfig& cfg) {
  const int n = static_cast<int>(raw.size());
  if (n < 1) throw std::domain_error("project_layout: empty layout");
  if (n * cfg.min_spacing_m > cfg.waveguide_length_m)
    throw ConfigError("project_layout: num_pas * min_spacing_m exceeds waveguide_length_m");
  std::sort(raw.begin(), raw.end());
  raw[0] = std::max(raw[0], 0.0);
  for (int i = 1; i < n; ++i) raw[i] = std::max(raw[i], raw[i - 1] + cfg.min_spacing_m);
  raw[n - 1] = std::min(raw[n - 1], cfg.waveguide_length_m);
  for (int i = n - 2; i >= 0; --i) raw[i] = std::min(raw[i], raw[i + 1] - cfg.min_spacing_m);
  return PaLayout{std::move(raw)};
}

}  // namespace panoma
