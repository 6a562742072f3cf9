#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "panoma/ddpg.hpp"
#include "panoma/env.hpp"

namespace panoma {

struct PolicySpec {
  enum class Kind { drl, fixed, discrete, continuous_constrained, oma_drl };
  Kind kind = Kind::drl;
  int grid_points = 8;    // discrete positioning grid per antenna
  int offset_steps = 16;  // sweep resolution of the equal-spacing search
};

inline PolicySpec::Kind policy_kind_from_string(const std::string& name) {
  if (name == "drl") return PolicySpec::Kind::drl;
  if (name == "fixed") return PolicySpec::Kind::fixed;
  if (name == "discrete") return PolicySpec::Kind::discrete;
  if (name == "continuous_constrained") return PolicySpec::Kind::continuous_constrained;
  if (name == "oma") return PolicySpec::Kind::oma_drl;
  throw ConfigError("unknown policy kind: " + name);
}

inline std::string to_string(PolicySpec::Kind kind) {
  switch (kind) {
    case PolicySpec::Kind::drl: return "drl";
    case PolicySpec::Kind::fixed: return "fixed";
    case PolicySpec::Kind::discrete: return "discrete";
    case PolicySpec::Kind::continuous_constrained: return "continuous_constrained";
    case PolicySpec::Kind::oma_drl: return "oma";
  }
  return "?";
}

// Static uniform placement: x_n = (n - 1/2) * L / N.
inline PaLayout fixed_layout_policy(const SystemConfig& cfg) {
  const int n = cfg.num_pas;
  const double pitch = cfg.waveguide_length_m / n;
  if (pitch < cfg.min_spacing_m)
    throw ConfigError("fixed_layout_policy: uniform pitch below min_spacing_m");
  PaLayout layout;
  for (int i = 1; i <= n; ++i) layout.positions_m.push_back((i - 0.5) * pitch);
  return layout;
}

// Inclusive uniform grid over [0, length]; a single point sits at the middle.
inline std::vector<double> uniform_grid(double length, int points) {
  if (points < 1) throw std::domain_error("uniform_grid: points must be >= 1");
  if (points == 1) return {length / 2.0};
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = length * static_cast<double>(i) / (points - 1);
  return grid;
}

namespace detail {

// Lexicographic enumeration of ascending N-subsets of `grid` whose gaps
// respect d_min.
template <class Fn>
void for_each_feasible_subset(const std::vector<double>& grid, int n, double d_min, Fn&& fn) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::vector<double> layout(static_cast<std::size_t>(n));
  auto rec = [&](auto&& self, int depth, int start) -> void {
    if (depth == n) {
      fn(layout);
      return;
    }
    for (int i = start; i < static_cast<int>(grid.size()); ++i) {
      const double x = grid[static_cast<std::size_t>(i)];
      if (depth > 0 && x - layout[static_cast<std::size_t>(depth - 1)] < d_min) continue;
      layout[static_cast<std::size_t>(depth)] = x;
      self(self, depth + 1, i + 1);
    }
  };
  rec(rec, 0, 0);
}

// Feasible-first maximization with the scan order as tie-break.
struct BestTracker {
  bool has_any = false;
  bool feasible = false;
  double ee = 0.0;

  bool offer(bool candidate_feasible, double candidate_ee) {
    const bool better =
        !has_any || (candidate_feasible && !feasible) ||
        (candidate_feasible == feasible && candidate_ee > ee);
    if (better) {
      has_any = true;
      feasible = candidate_feasible;
      ee = candidate_ee;
    }
    return better;
  }
};

}  // namespace detail

// Exhaustive placement search over a fixed grid, holding the caller's beta
// and requested powers. Candidates violating the rate floor rank below any
// satisfying one; ties keep the lexicographically smallest layout.
inline PaLayout discrete_position_search(const NomaEnv& env, const EnvState& state, double beta,
                                         const std::vector<double>& nominal_powers_w,
                                         int grid_points) {
  const auto& s = env.config().system;
  if (grid_points < s.num_pas)
    throw ConfigError("discrete_position_search: grid smaller than the antenna count");
  const auto grid = uniform_grid(s.waveguide_length_m, grid_points);
  detail::BestTracker best;
  PaLayout best_layout;
  detail::for_each_feasible_subset(grid, s.num_pas, s.min_spacing_m,
                                   [&](const std::vector<double>& candidate) {
                                     PaLayout layout{candidate};
                                     const SlotDiagnostics diag =
                                         env.layout_outcome(state, beta, nominal_powers_w, layout);
                                     if (best.offer(!diag.rate_violation, diag.ee_bpshz_per_w))
                                       best_layout = layout;
                                   });
  if (!best.has_any)
    throw ConfigError("discrete_position_search: no feasible layout on the grid");
  return best_layout;
}

// Equal displacement intervals for all elements; only the common offset is
// searched. The interval is max(d_min, L/N).
inline PaLayout equal_spacing_offset_search(const NomaEnv& env, const EnvState& state, double beta,
                                            const std::vector<double>& nominal_powers_w,
                                            int offset_steps) {
  if (offset_steps < 1)
    throw ConfigError("equal_spacing_offset_search: offset_steps must be >= 1");
  const auto& s = env.config().system;
  const int n = s.num_pas;
  const double delta = std::max(s.min_spacing_m, s.waveguide_length_m / n);
  const double span = (n - 1) * delta;
  if (span > s.waveguide_length_m)
    throw ConfigError("equal_spacing_offset_search: spacing interval does not fit the waveguide");
  const double offset_max = s.waveguide_length_m - span;
  detail::BestTracker best;
  PaLayout best_layout;
  for (int j = 0; j < offset_steps; ++j) {
    const double offset =
        offset_steps == 1 ? 0.0 : offset_max * static_cast<double>(j) / (offset_steps - 1);
    PaLayout layout;
    for (int i = 0; i < n; ++i) layout.positions_m.push_back(offset + i * delta);
    const SlotDiagnostics diag = env.layout_outcome(state, beta, nominal_powers_w, layout);
    if (best.offer(!diag.rate_violation, diag.ee_bpshz_per_w)) best_layout = layout;
  }
  return best_layout;
}

struct OracleGrids {
  int beta_points = 11;
  int power_points = 11;
  int position_points = 8;
};

// How candidate powers are interpreted: exact grid values discarded when the
// energy budget is violated, or requests clipped to the budget the way the
// environment executes actions.
enum class OraclePowerHandling { grid_exact, request_clip };

struct OracleResult {
  double best_ee = 0.0;
  double best_beta = 0.0;
  std::vector<double> best_powers_w;
  PaLayout best_layout;
  OracleGrids grids;
  long evaluations = 0;
  bool feasible_found = false;  // some candidate met the rate floor
};

// Exhaustive single-slot maximizer over the (beta, power, position) grid on
// the true state. Scan order: beta ascending, layouts lexicographic, power
// tuples lexicographic; the first best is kept on ties.
inline OracleResult brute_force_oracle(const NomaEnv& env, const EnvState& state,
                                       const OracleGrids& grids,
                                       OraclePowerHandling handling = OraclePowerHandling::grid_exact) {
  const auto& s = env.config().system;
  const int k = env.num_users();
  const int n = env.num_pas();

  const auto beta_grid = uniform_grid(1.0, grids.beta_points);
  const auto power_grid = uniform_grid(s.max_tx_power_w, grids.power_points);
  const auto position_grid = uniform_grid(s.waveguide_length_m, grids.position_points);

  std::vector<PaLayout> layouts;
  detail::for_each_feasible_subset(position_grid, n, s.min_spacing_m,
                                   [&](const std::vector<double>& x) {
                                     layouts.push_back(PaLayout{x});
                                   });
  if (layouts.empty()) throw ConfigError("brute_force_oracle: no feasible layout on the grid");

  double total = static_cast<double>(grids.beta_points) * static_cast<double>(layouts.size()) *
                 std::pow(static_cast<double>(grids.power_points), k);
  if (total > 1e7) throw std::logic_error("brute_force_oracle: grid size guard exceeded (1e7)");

  OracleResult result;
  result.grids = grids;
  detail::BestTracker best;

  std::vector<double> powers(static_cast<std::size_t>(k));
  std::vector<int> power_idx(static_cast<std::size_t>(k), 0);
  for (double beta : beta_grid) {
    for (const PaLayout& layout : layouts) {
      std::fill(power_idx.begin(), power_idx.end(), 0);
      while (true) {
        for (int i = 0; i < k; ++i)
          powers[static_cast<std::size_t>(i)] =
              power_grid[static_cast<std::size_t>(power_idx[static_cast<std::size_t>(i)])];
        result.evaluations += 1;

        bool executable = true;
        ActionVector action;
        action.beta = beta;
        action.layout = layout;
        if (handling == OraclePowerHandling::grid_exact) {
          action.powers_w = powers;
          if (beta >= 1.0) {
            for (double p : powers)
              if (p > 0.0) executable = false;  // no uplink phase at beta = 1
          } else {
            const auto caps = env.cap_powers(state, beta, powers, layout);
            for (int i = 0; i < k; ++i)
              if (powers[static_cast<std::size_t>(i)] >
                  caps[static_cast<std::size_t>(i)])
                executable = false;  // energy budget violated
          }
        } else {
          action.powers_w = env.cap_powers(state, beta, powers, layout);
        }

        if (executable) {
          const SlotDiagnostics diag = env.preview(state, action);
          if (best.offer(!diag.rate_violation, diag.ee_bpshz_per_w)) {
            result.best_ee = diag.ee_bpshz_per_w;
            result.best_beta = beta;
            result.best_powers_w = action.powers_w;
            result.best_layout = layout;
            result.feasible_found = !diag.rate_violation;
          }
        }

        int digit = k - 1;
        while (digit >= 0 && ++power_idx[static_cast<std::size_t>(digit)] == grids.power_points) {
          power_idx[static_cast<std::size_t>(digit)] = 0;
          --digit;
        }
        if (digit < 0) break;
      }
    }
  }
  return result;
}

struct PolicyStats {
  double mean_ee = 0.0;
  double median_ee = 0.0;
  double std_ee = 0.0;
  double rate_satisfaction = 0.0;  // fraction of user-slots meeting the floor
  double mean_harvested_j = 0.0;   // per user-slot
  std::vector<double> per_seed_mean_ee;
};

// Builds the slot action for a policy: the actor supplies beta and requested
// powers everywhere; placement comes from the policy.
inline ActionVector policy_action(const NomaEnv& env, const Vecd& raw, const PolicySpec& policy,
                                  const PaLayout* fixed_layout) {
  const auto& s = env.config().system;
  const int k = env.num_users();
  const int n = env.num_pas();
  switch (policy.kind) {
    case PolicySpec::Kind::drl:
    case PolicySpec::Kind::oma_drl:
      return env.decode_action(raw);
    case PolicySpec::Kind::fixed:
      return env.decode_action(raw, *fixed_layout);
    case PolicySpec::Kind::discrete:
    case PolicySpec::Kind::continuous_constrained: {
      const double beta = (std::clamp(raw[k + n], -1.0, 1.0) + 1.0) / 2.0;
      std::vector<double> nominal(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i)
        nominal[static_cast<std::size_t>(i)] =
            (std::clamp(raw[i], -1.0, 1.0) + 1.0) / 2.0 * s.max_tx_power_w;
      const PaLayout layout =
          policy.kind == PolicySpec::Kind::discrete
              ? discrete_position_search(env, env.state(), beta, nominal, policy.grid_points)
              : equal_spacing_offset_search(env, env.state(), beta, nominal,
                                            policy.offset_steps);
      return env.decode_action(raw, layout);
    }
  }
  throw std::logic_error("policy_action: unknown policy kind");
}

// Frozen-policy rollouts; no learning. Statistics are computed over the
// pooled per-episode sums of per-slot EE, sorted first so they are invariant
// to seed ordering.
inline PolicyStats evaluate_policy(const PolicySpec& policy, const ExperimentConfig& cfg,
                                   int episodes, const std::vector<std::uint64_t>& seeds,
                                   const Mlp& actor) {
  if (seeds.empty()) throw ConfigError("evaluate_policy: seed list is empty");
  const RateMode mode =
      policy.kind == PolicySpec::Kind::oma_drl ? RateMode::oma : RateMode::noma;
  PolicyStats stats;
  std::vector<double> episode_ee;
  long satisfied = 0, user_slots = 0;
  double harvested_total = 0.0;

  for (std::uint64_t seed : seeds) {
    NomaEnv env(cfg, mode);
    const PaLayout fixed = policy.kind == PolicySpec::Kind::fixed
                               ? fixed_layout_policy(env.config().system)
                               : PaLayout{};
    double seed_sum = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
      Vecd obs = env.reset(mix_seed(seed, static_cast<std::uint64_t>(ep)));
      double ee_sum = 0.0;
      bool done = false;
      while (!done) {
        const Vecd raw = forward(actor, obs);
        const ActionVector action = policy_action(env, raw, policy, &fixed);
        const StepOutcome out = env.step(action);
        ee_sum += out.diagnostics.ee_bpshz_per_w;
        for (std::size_t u = 0; u < out.diagnostics.rates_bpshz.size(); ++u) {
          user_slots += 1;
          if (out.diagnostics.rates_bpshz[u] >= cfg.system.min_rate_bpshz) satisfied += 1;
          harvested_total += out.diagnostics.harvested_j[u];
        }
        obs = env.observe(out.next_state);
        done = out.done;
      }
      episode_ee.push_back(ee_sum);
      seed_sum += ee_sum;
    }
    stats.per_seed_mean_ee.push_back(seed_sum / episodes);
  }

  std::sort(episode_ee.begin(), episode_ee.end());
  const double n = static_cast<double>(episode_ee.size());
  stats.mean_ee = std::accumulate(episode_ee.begin(), episode_ee.end(), 0.0) / n;
  stats.median_ee = episode_ee.size() % 2 == 1
                        ? episode_ee[episode_ee.size() / 2]
                        : 0.5 * (episode_ee[episode_ee.size() / 2 - 1] +
                                 episode_ee[episode_ee.size() / 2]);
  double var = 0.0;
  for (double v : episode_ee) var += (v - stats.mean_ee) * (v - stats.mean_ee);
  stats.std_ee = episode_ee.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  stats.rate_satisfaction = user_slots > 0 ? static_cast<double>(satisfied) / user_slots : 0.0;
  stats.mean_harvested_j = user_slots > 0 ? harvested_total / user_slots : 0.0;
  return stats;
}

}  // namespace panoma
