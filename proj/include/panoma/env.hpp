#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "panoma/config.hpp"
#include "panoma/energy.hpp"
#include "panoma/geometry.hpp"
#include "panoma/rates.hpp"
#include "panoma/rng.hpp"

namespace panoma {

using Vecd = Eigen::VectorXd;

struct EnvState {
  int slot_index = 0;
  std::vector<double> true_batteries_j;
  std::vector<double> est_batteries_j;
  std::vector<UserPosition> true_positions;
  std::vector<UserPosition> est_positions;
};

// Physical action for one slot. `raw` is the normalized control vector
// [powers | positions | beta] in [-1, 1]; the decoded fields satisfy the
// layout, time-split, and energy-causality constraints by construction.
struct ActionVector {
  Vecd raw;
  std::vector<double> powers_w;
  PaLayout layout;
  double beta = 0.0;
  bool projected = false;  // true when a requested value had to be clipped
};

struct SlotDiagnostics {
  std::vector<double> rates_bpshz;
  std::vector<double> harvested_j;
  std::vector<double> consumed_j;
  double ee_bpshz_per_w = 0.0;
  double sum_rate_bpshz = 0.0;
  bool rate_violation = false;
  bool action_projected = false;
};

struct StepOutcome {
  double reward = 0.0;
  EnvState next_state;
  SlotDiagnostics diagnostics;
  bool done = false;
};

inline double perturb_battery(double true_j, double bound_j, double capacity_j, Rng& rng) {
  if (bound_j < 0.0) throw std::domain_error("perturb_battery: negative bound");
  const double est = true_j + (bound_j > 0.0 ? rng.uniform(-bound_j, bound_j) : 0.0);
  return std::clamp(est, 0.0, capacity_j);
}

// Zero-mean isotropic Gaussian error, redrawn until its norm fits the bound,
// then clipped to the service rectangle.
inline UserPosition perturb_location(const UserPosition& true_pos, double sigma_m, double bound_m,
                                     const SystemConfig& cfg, Rng& rng) {
  if (bound_m < 0.0 || sigma_m < 0.0) throw std::domain_error("perturb_location: negative bound");
  double ex = 0.0, ey = 0.0;
  if (sigma_m > 0.0 && bound_m > 0.0) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      ex = rng.normal(0.0, sigma_m);
      ey = rng.normal(0.0, sigma_m);
      if (std::hypot(ex, ey) <= bound_m) break;
      if (attempt == 999) {  // pathological bound/sigma ratio: clamp the radius
        const double scale = bound_m / std::hypot(ex, ey);
        ex *= scale;
        ey *= scale;
      }
    }
  }
  UserPosition est;
  est.x_m = std::clamp(true_pos.x_m + ex, 0.0, cfg.region_x_m);
  est.y_m = std::clamp(true_pos.y_m + ey, -cfg.region_y_m / 2.0, cfg.region_y_m / 2.0);
  return est;
}

// Episodic decision process for one waveguide serving K users. Owns its RNG
// stream; a single instance is single-threaded, independent instances can run
// in parallel.
class NomaEnv {
 public:
  NomaEnv(const ExperimentConfig& cfg, RateMode mode = RateMode::noma)
      : cfg_(cfg), mode_(mode), rng_(0) {
    cfg_.materialize_per_user();
    cfg_.validate();
  }

  int num_users() const { return cfg_.system.num_users; }
  int num_pas() const { return cfg_.system.num_pas; }
  int obs_dim() const { return 3 * num_users(); }
  int action_dim() const { return num_users() + num_pas() + 1; }
  int episode_length() const { return cfg_.system.num_slots; }
  RateMode mode() const { return mode_; }
  const ExperimentConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }

  // Uplink time base per user: the whole uplink fraction for NOMA, an equal
  // 1/K share for the orthogonal benchmark.
  double uplink_ts() const {
    const double ts = cfg_.system.slot_duration_s;
    return mode_ == RateMode::oma ? ts / num_users() : ts;
  }

  Vecd reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    const auto& s = cfg_.system;
    const int k = num_users();
    state_ = EnvState{};
    state_.true_batteries_j.resize(k);
    state_.true_positions.resize(k);
    for (int i = 0; i < k; ++i)
      state_.true_batteries_j[i] = rng_.uniform(0.0, cfg_.battery_per_user[i].capacity_j);
    for (int i = 0; i < k; ++i) {
      state_.true_positions[i].x_m = rng_.uniform(0.0, s.region_x_m);
      state_.true_positions[i].y_m = rng_.uniform(-s.region_y_m / 2.0, s.region_y_m / 2.0);
    }
    refresh_estimates();
    return observe(state_);
  }

  void restore_state(const EnvState& state) { state_ = state; }

  Vecd observe(const EnvState& state) const {
    const auto& s = cfg_.system;
    const int k = num_users();
    Vecd obs(obs_dim());
    for (int i = 0; i < k; ++i)
      obs[i] = state.est_batteries_j[i] / cfg_.battery_per_user[i].capacity_j;
    for (int i = 0; i < k; ++i) {
      obs[k + 2 * i] = state.est_positions[i].x_m / s.region_x_m;
      obs[k + 2 * i + 1] = state.est_positions[i].y_m / s.region_y_m;
    }
    return obs;
  }

  ActionVector decode_action(const Vecd& raw) const { return decode_action(raw, nullptr); }

  ActionVector decode_action(const Vecd& raw, const PaLayout& layout_override) const {
    return decode_action(raw, &layout_override);
  }

  SlotDiagnostics preview(const EnvState& state, const ActionVector& action) const {
    SlotDiagnostics diag;
    slot_physics(state, action, diag, nullptr);
    return diag;
  }

  StepOutcome step(const ActionVector& action) {
    if (state_.slot_index >= cfg_.system.num_slots)
      throw std::logic_error("step: episode already terminated");
    StepOutcome out;
    std::vector<double> next_batteries;
    slot_physics(state_, action, out.diagnostics, &next_batteries);
    out.reward = out.diagnostics.rate_violation ? cfg_.system.penalty_reward
                                                : out.diagnostics.ee_bpshz_per_w;
    state_.true_batteries_j = next_batteries;
    refresh_estimates();
    state_.slot_index += 1;
    out.done = state_.slot_index >= cfg_.system.num_slots;
    out.next_state = state_;
    return out;
  }

  struct RawStep {
    Vecd observation;
    double reward;
    bool done;
  };

  RawStep step_raw(const Vecd& raw) {
    const StepOutcome out = step(decode_action(raw));
    return {observe(out.next_state), out.reward, out.done};
  }

  // Outcome of executing (beta, requested powers) under a candidate layout on
  // a frozen state. Used by the placement searches.
  SlotDiagnostics layout_outcome(const EnvState& state, double beta,
                                 const std::vector<double>& nominal_powers_w,
                                 const PaLayout& layout) const {
    ActionVector action;
    action.beta = beta;
    action.layout = layout;
    action.powers_w = cap_powers(state, beta, nominal_powers_w, layout);
    return preview(state, action);
  }

  // Clips requested powers to the per-user energy budget given the slot's
  // true batteries and true harvested energy.
  std::vector<double> cap_powers(const EnvState& state, double beta,
                                 const std::vector<double>& nominal_powers_w,
                                 const PaLayout& layout) const {
    const auto& s = cfg_.system;
    const int k = num_users();
    std::vector<double> powers(k, 0.0);
    if (beta >= 1.0) return powers;  // no uplink phase, nothing transmits
    const auto gains = composite_gains(state.true_positions, layout, s);
    for (int i = 0; i < k; ++i) {
      const double rx = s.bs_wpt_power_w * std::norm(gains[static_cast<std::size_t>(i)]);
      const double harvested =
          harvested_energy(beta, s.slot_duration_s, rx, cfg_.eh_per_user[i]);
      const double cap = feasible_power_cap(
          state.true_batteries_j[i], cfg_.battery_per_user[i].storage_efficiency, harvested, beta,
          uplink_ts(), cfg_.battery_per_user[i], s.max_tx_power_w);
      powers[i] = std::min(nominal_powers_w[static_cast<std::size_t>(i)], cap);
    }
    return powers;
  }

 private:
  ActionVector decode_action(const Vecd& raw, const PaLayout* layout_override) const {
    const auto& s = cfg_.system;
    const int k = num_users();
    const int n = num_pas();
    if (raw.size() != action_dim()) throw std::logic_error("decode_action: dimension mismatch");
    ActionVector action;
    action.raw = raw.cwiseMax(-1.0).cwiseMin(1.0);
    action.beta = (action.raw[k + n] + 1.0) / 2.0;

    if (layout_override != nullptr) {
      action.layout = project_layout(layout_override->positions_m, s);
    } else {
      std::vector<double> positions(n);
      for (int i = 0; i < n; ++i)
        positions[i] = (action.raw[k + i] + 1.0) / 2.0 * s.waveguide_length_m;
      action.layout = project_layout(positions, s);
      for (int i = 0; i < n; ++i)
        if (action.layout.positions_m[i] != positions[i]) action.projected = true;
    }

    std::vector<double> nominal(k);
    for (int i = 0; i < k; ++i) nominal[i] = (action.raw[i] + 1.0) / 2.0 * s.max_tx_power_w;
    action.powers_w = cap_powers(state_, action.beta, nominal, action.layout);
    for (int i = 0; i < k; ++i)
      if (action.powers_w[i] < nominal[i]) action.projected = true;
    return action;
  }

  void refresh_estimates() {
    const int k = num_users();
    state_.est_batteries_j.resize(k);
    state_.est_positions.resize(k);
    for (int i = 0; i < k; ++i)
      state_.est_batteries_j[i] =
          perturb_battery(state_.true_batteries_j[i], cfg_.uncertainty.battery_bound_j,
                          cfg_.battery_per_user[i].capacity_j, rng_);
    for (int i = 0; i < k; ++i)
      state_.est_positions[i] =
          perturb_location(state_.true_positions[i], cfg_.uncertainty.location_sigma_m,
                           cfg_.uncertainty.location_bound_m, cfg_.system, rng_);
  }

  // One slot of physics: harvest with the true geometry, decode rates in gain
  // order, charge energy, and report. A user whose budget cannot even cover
  // the fixed circuit energy stays dark for the slot and consumes nothing.
  void slot_physics(const EnvState& state, const ActionVector& action, SlotDiagnostics& diag,
                    std::vector<double>* next_batteries) const {
    const auto& s = cfg_.system;
    const int k = num_users();
    const auto gains = composite_gains(state.true_positions, action.layout, s);

    diag.harvested_j.resize(k);
    diag.consumed_j.resize(k);
    for (int i = 0; i < k; ++i) {
      const double rx = s.bs_wpt_power_w * std::norm(gains[static_cast<std::size_t>(i)]);
      diag.harvested_j[i] =
          harvested_energy(action.beta, s.slot_duration_s, rx, cfg_.eh_per_user[i]);
    }

    const RateReport report = rate_report(action.powers_w, gains, s.noise_power_w, action.beta,
                                          mode_, s.fixed_circuit_power_w);
    diag.rates_bpshz = report.per_user_rate_bpshz;
    diag.sum_rate_bpshz = report.sum_rate_bpshz;
    diag.ee_bpshz_per_w = report.ee_bpshz_per_w;
    diag.rate_violation = false;
    for (double r : diag.rates_bpshz)
      if (r < s.min_rate_bpshz) diag.rate_violation = true;
    diag.action_projected = action.projected;

    if (next_batteries != nullptr) next_batteries->resize(k);
    for (int i = 0; i < k; ++i) {
      const auto& bp = cfg_.battery_per_user[i];
      const double budget =
          state.true_batteries_j[i] + bp.storage_efficiency * diag.harvested_j[i];
      if (action.powers_w[i] > 0.0) {
        diag.consumed_j[i] = (1.0 - action.beta) * uplink_ts() * action.powers_w[i] +
                             bp.fixed_circuit_energy_j;
      } else {
        diag.consumed_j[i] = budget >= bp.fixed_circuit_energy_j ? bp.fixed_circuit_energy_j : 0.0;
      }
      if (next_batteries != nullptr)
        (*next_batteries)[i] = battery_update(state.true_batteries_j[i], bp.storage_efficiency,
                                              diag.harvested_j[i], diag.consumed_j[i], bp);
    }
  }

  ExperimentConfig cfg_;
  RateMode mode_;
  EnvState state_;
  Rng rng_;
};

}  // namespace panoma
