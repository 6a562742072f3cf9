#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "panoma/config.hpp"

namespace panoma {

// Sigmoidal rectifier response, normalized so zero input harvests exactly
// zero and the output saturates at beta * ts * iota.
inline double harvested_energy(double beta, double ts, double rx_power_w, const EhParams& eh) {
  if (beta < 0.0 || beta > 1.0) throw std::domain_error("harvested_energy: beta outside [0, 1]");
  if (ts < 0.0) throw std::domain_error("harvested_energy: negative slot duration");
  if (rx_power_w < 0.0) throw std::domain_error("harvested_energy: negative receive power");
  const double omega = eh.omega();
  const double upsilon =
      eh.saturation_iota / (1.0 + std::exp(-eh.sensitivity_a * (rx_power_w - eh.threshold_b)));
  return beta * ts * (upsilon - eh.saturation_iota * omega) / (1.0 - omega);
}

inline double consumed_energy(double beta, double ts, double tx_power_w,
                              const BatteryParams& battery) {
  if (beta < 0.0 || beta > 1.0) throw std::domain_error("consumed_energy: beta outside [0, 1]");
  if (tx_power_w < 0.0) throw std::domain_error("consumed_energy: negative transmit power");
  return (1.0 - beta) * ts * tx_power_w + battery.fixed_circuit_energy_j;
}

// Largest transmit power the energy budget admits, clipped to the hardware
// cap. At beta = 1 the uplink phase has zero duration and the budget places
// no bound, so the hardware cap is returned.
inline double feasible_power_cap(double battery_j, double eta, double harvested_j, double beta,
                                 double ts, const BatteryParams& battery, double max_tx_power_w) {
  if (battery_j < 0.0 || harvested_j < 0.0 || eta < 0.0)
    throw std::domain_error("feasible_power_cap: negative input");
  if (beta < 0.0 || beta > 1.0) throw std::domain_error("feasible_power_cap: beta outside [0, 1]");
  if (beta >= 1.0) return max_tx_power_w;
  const double budget = battery_j + eta * harvested_j - battery.fixed_circuit_energy_j;
  const double cap = std::max(0.0, budget / ((1.0 - beta) * ts));
  return std::min(cap, max_tx_power_w);
}

inline double battery_update(double battery_j, double eta, double harvested_j, double consumed_j,
                             const BatteryParams& battery) {
  if (battery_j < 0.0 || harvested_j < 0.0 || consumed_j < 0.0 || eta < 0.0)
    throw std::domain_error("battery_update: negative input");
  return std::min(battery.capacity_j, std::max(battery_j + eta * harvested_j - consumed_j, 0.0));
}

}  // namespace panoma
