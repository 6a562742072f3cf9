#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "panoma/rng.hpp"

namespace panoma {

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kSpeedOfLight = 299792458.0;

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

// Physical and economic parameters of the network. One record drives every
// module; all values are SI (meters, watts, joules, seconds).
struct SystemConfig {
  double carrier_frequency_hz = 28e9;
  double pa_height_m = 3.0;
  double region_x_m = 60.0;
  double region_y_m = 20.0;
  int num_users = 3;
  int num_pas = 3;
  double feed_position_m = 0.0;
  double effective_refractive_index = 1.4;
  double coupling_delta = 0.70710678118654752;  // sin(pi/4)
  double attenuation_db_per_m = 0.5;
  double min_spacing_m = 0.5 * kSpeedOfLight / 28e9;  // half wavelength
  double noise_power_w = 1e-12;                       // -90 dBm
  double bs_wpt_power_w = 1.0;
  double slot_duration_s = 1.0;
  double fixed_circuit_power_w = 0.1;
  double min_rate_bpshz = 0.1;
  double waveguide_length_m = 60.0;
  double max_tx_power_w = 0.1;   // hardware transmit cap
  int num_slots = 20;            // slots per episode
  double penalty_reward = -1.0;  // reward when any user misses the rate floor
};

// Nonlinear rectifier response: sensitivity, activation threshold, saturation.
struct EhParams {
  double sensitivity_a = 150.0;
  double threshold_b = 0.0014;
  double saturation_iota = 0.024;

  double omega() const { return 1.0 / (1.0 + std::exp(sensitivity_a * threshold_b)); }
};

struct BatteryParams {
  double capacity_j = 0.1;
  double storage_efficiency = 0.9;
  double fixed_circuit_energy_j = 1e-5;
};

struct UncertaintyParams {
  double battery_bound_j = 0.0;   // max battery estimation error
  double location_bound_m = 0.0;  // max location estimation error norm
  double location_sigma_m = 0.0;  // per-axis std of the location error
};

struct AgentConfig {
  double discount = 0.9;
  double soft_update_tau = 0.001;
  double learning_rate = 5e-4;
  int batch_size = 64;
  int buffer_capacity = 10000;
  std::vector<int> hidden_widths = {256, 256};
  double noise_std_initial = 0.2;
  double noise_std_final = 0.01;
  int updates_per_episode = 20;  // defaults to slots per episode
  double target_policy_noise_std = 0.0;
};

struct RunConfig {
  std::vector<std::uint64_t> seeds = {0};
  int episodes = 2000;
  std::string output_dir = "runs";
  std::string experiment_id = "exp";
};

// Full experiment record: system + EH + battery + uncertainty + agent + run
// metadata. Per-user EH/battery vectors are materialized at ingestion (scalar
// fields broadcast to all users unless an array override was given).
struct ExperimentConfig {
  SystemConfig system;
  EhParams eh;
  BatteryParams battery;
  UncertaintyParams uncertainty;
  AgentConfig agent;
  RunConfig run;
  std::vector<EhParams> eh_per_user;
  std::vector<BatteryParams> battery_per_user;

  void materialize_per_user() {
    const auto k = static_cast<std::size_t>(system.num_users);
    if (eh_per_user.size() != k) eh_per_user.assign(k, eh);
    if (battery_per_user.size() != k) battery_per_user.assign(k, battery);
  }

  void validate() const;
  json canonical_json() const;
  std::string canonical_dump() const { return canonical_json().dump(2) + "\n"; }
  std::string hash() const;

  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig from_file(const std::string& path);
};

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  const auto& s = system;
  if (!(s.carrier_frequency_hz > 0)) fail("carrier_frequency_hz", "must be > 0");
  if (!(s.pa_height_m > 0)) fail("pa_height_m", "must be > 0");
  if (!(s.region_x_m > 0)) fail("region_x_m", "must be > 0");
  if (!(s.region_y_m > 0)) fail("region_y_m", "must be > 0");
  if (s.num_users < 1) fail("num_users", "must be >= 1");
  if (s.num_pas < 1) fail("num_pas", "must be >= 1");
  if (!(s.coupling_delta > 0 && s.coupling_delta <= 1))
    fail("coupling_delta", "must be in (0, 1]");
  if (!(s.effective_refractive_index >= 1)) fail("effective_refractive_index", "must be >= 1");
  if (s.attenuation_db_per_m < 0) fail("attenuation_db_per_m", "must be >= 0");
  if (s.min_spacing_m < 0) fail("min_spacing_m", "must be >= 0");
  if (!(s.waveguide_length_m > 0)) fail("waveguide_length_m", "must be > 0");
  if (s.num_pas * s.min_spacing_m > s.waveguide_length_m)
    fail("min_spacing_m", "num_pas * min_spacing_m exceeds waveguide_length_m");
  if (s.feed_position_m < 0 || s.feed_position_m > s.waveguide_length_m)
    fail("feed_position_m", "must be within [0, waveguide_length_m]");
  if (!(s.noise_power_w > 0)) fail("noise_power_w", "must be > 0");
  if (s.bs_wpt_power_w < 0) fail("bs_wpt_power_w", "must be >= 0");
  if (!(s.slot_duration_s > 0)) fail("slot_duration_s", "must be > 0");
  if (!(s.fixed_circuit_power_w > 0)) fail("fixed_circuit_power_w", "must be > 0");
  if (s.min_rate_bpshz < 0) fail("min_rate_bpshz", "must be >= 0");
  if (!(s.max_tx_power_w > 0)) fail("max_tx_power_w", "must be > 0");
  if (s.num_slots < 1) fail("num_slots", "must be >= 1");

  auto check_eh = [&](const EhParams& e, const std::string& where) {
    if (!(e.sensitivity_a > 0)) fail(where + ".sensitivity_a", "must be > 0");
    if (e.threshold_b < 0) fail(where + ".threshold_b", "must be >= 0");
    if (!(e.saturation_iota > 0)) fail(where + ".saturation_iota", "must be > 0");
  };
  auto check_battery = [&](const BatteryParams& b, const std::string& where) {
    if (!(b.capacity_j > 0)) fail(where + ".capacity_j", "must be > 0");
    if (!(b.storage_efficiency > 0 && b.storage_efficiency <= 1))
      fail(where + ".storage_efficiency", "must be in (0, 1]");
    if (b.fixed_circuit_energy_j < 0) fail(where + ".fixed_circuit_energy_j", "must be >= 0");
  };
  check_eh(eh, "eh");
  check_battery(battery, "battery");
  for (const auto& e : eh_per_user) check_eh(e, "eh");
  for (const auto& b : battery_per_user) check_battery(b, "battery");
  if (!eh_per_user.empty() && eh_per_user.size() != static_cast<std::size_t>(s.num_users))
    fail("eh", "per-user array length must equal num_users");
  if (!battery_per_user.empty() &&
      battery_per_user.size() != static_cast<std::size_t>(s.num_users))
    fail("battery", "per-user array length must equal num_users");

  if (uncertainty.battery_bound_j < 0) fail("uncertainty.battery_bound_j", "must be >= 0");
  if (uncertainty.location_bound_m < 0) fail("uncertainty.location_bound_m", "must be >= 0");
  if (uncertainty.location_sigma_m < 0) fail("uncertainty.location_sigma_m", "must be >= 0");

  const auto& a = agent;
  if (!(a.discount >= 0 && a.discount < 1)) fail("agent.discount", "must be in [0, 1)");
  if (!(a.soft_update_tau >= 0 && a.soft_update_tau <= 1))
    fail("agent.soft_update_tau", "must be in [0, 1]");
  if (!(a.learning_rate > 0)) fail("agent.learning_rate", "must be > 0");
  if (a.batch_size < 1) fail("agent.batch_size", "must be >= 1");
  if (a.buffer_capacity < a.batch_size)
    fail("agent.buffer_capacity", "must be >= agent.batch_size");
  if (a.hidden_widths.empty()) fail("agent.hidden_widths", "must be non-empty");
  for (int w : a.hidden_widths)
    if (w < 1) fail("agent.hidden_widths", "entries must be >= 1");
  if (a.noise_std_initial < 0) fail("agent.noise_std_initial", "must be >= 0");
  if (a.noise_std_final < 0) fail("agent.noise_std_final", "must be >= 0");
  if (a.updates_per_episode < 0) fail("agent.updates_per_episode", "must be >= 0");
  if (a.target_policy_noise_std < 0) fail("agent.target_policy_noise_std", "must be >= 0");

  if (run.seeds.empty()) fail("run.seeds", "must be non-empty");
  if (run.episodes < 1) fail("run.episodes", "must be >= 1");
  if (run.experiment_id.empty()) fail("run.experiment_id", "must be non-empty");
}

namespace detail {

inline void require_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok)
      throw ConfigError("unknown config key '" + (scope.empty() ? "" : scope + ".") + it.key() +
                        "'");
  }
}

inline double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "': expected a number");
  return v.get<double>();
}

inline int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "': expected an integer");
  return v.get<int>();
}

// Accepts a scalar or an array of length num_users; returns one value per user.
inline std::vector<double> per_user_values(const json& v, int num_users, const std::string& key) {
  std::vector<double> out;
  if (v.is_array()) {
    if (static_cast<int>(v.size()) != num_users)
      throw ConfigError("config key '" + key + "': array length must equal num_users");
    for (const auto& e : v) out.push_back(as_number(e, key));
  } else {
    out.assign(static_cast<std::size_t>(num_users), as_number(v, key));
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  using detail::as_int;
  using detail::as_number;
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  detail::require_keys(
      j,
      {"carrier_frequency_hz", "pa_height_m", "region_x_m", "region_y_m", "num_users", "num_pas",
       "feed_position_m", "effective_refractive_index", "coupling_delta", "attenuation_db_per_m",
       "min_spacing_m", "noise_power_w", "noise_power_dbm", "bs_wpt_power_w", "slot_duration_s",
       "fixed_circuit_power_w", "min_rate_bpshz", "waveguide_length_m", "max_tx_power_w",
       "num_slots", "penalty_reward", "eh", "battery", "uncertainty", "agent", "run"},
      "");

  auto& s = cfg.system;
  auto num = [&](const char* key, double& field) {
    if (j.contains(key)) field = as_number(j.at(key), key);
  };
  num("carrier_frequency_hz", s.carrier_frequency_hz);
  num("pa_height_m", s.pa_height_m);
  num("region_x_m", s.region_x_m);
  num("region_y_m", s.region_y_m);
  if (j.contains("num_users")) s.num_users = as_int(j.at("num_users"), "num_users");
  if (j.contains("num_pas")) s.num_pas = as_int(j.at("num_pas"), "num_pas");
  num("feed_position_m", s.feed_position_m);
  num("effective_refractive_index", s.effective_refractive_index);
  num("coupling_delta", s.coupling_delta);
  num("attenuation_db_per_m", s.attenuation_db_per_m);
  num("bs_wpt_power_w", s.bs_wpt_power_w);
  num("slot_duration_s", s.slot_duration_s);
  num("fixed_circuit_power_w", s.fixed_circuit_power_w);
  num("min_rate_bpshz", s.min_rate_bpshz);
  num("max_tx_power_w", s.max_tx_power_w);
  if (j.contains("num_slots")) s.num_slots = as_int(j.at("num_slots"), "num_slots");
  num("penalty_reward", s.penalty_reward);

  // dBm -> W happens here, once; everything downstream sees watts.
  if (j.contains("noise_power_w") && j.contains("noise_power_dbm"))
    throw ConfigError("config keys 'noise_power_w' and 'noise_power_dbm' are mutually exclusive");
  if (j.contains("noise_power_w")) s.noise_power_w = as_number(j.at("noise_power_w"), "noise_power_w");
  if (j.contains("noise_power_dbm"))
    s.noise_power_w = dbm_to_watt(as_number(j.at("noise_power_dbm"), "noise_power_dbm"));

  // Derived defaults: waveguide spans the service region; spacing floor is a
  // half wavelength at the configured carrier.
  if (j.contains("waveguide_length_m"))
    s.waveguide_length_m = as_number(j.at("waveguide_length_m"), "waveguide_length_m");
  else
    s.waveguide_length_m = s.region_x_m;
  if (j.contains("min_spacing_m"))
    s.min_spacing_m = as_number(j.at("min_spacing_m"), "min_spacing_m");
  else
    s.min_spacing_m = 0.5 * kSpeedOfLight / s.carrier_frequency_hz;

  cfg.eh_per_user.assign(static_cast<std::size_t>(s.num_users), cfg.eh);
  cfg.battery_per_user.assign(static_cast<std::size_t>(s.num_users), cfg.battery);

  if (j.contains("eh")) {
    const json& e = j.at("eh");
    detail::require_keys(e, {"sensitivity_a", "threshold_b", "saturation_iota"}, "eh");
    auto field = [&](const char* key, auto setter) {
      if (!e.contains(key)) return;
      auto vals = detail::per_user_values(e.at(key), s.num_users, std::string("eh.") + key);
      for (int k = 0; k < s.num_users; ++k) setter(cfg.eh_per_user[k], vals[k]);
      setter(cfg.eh, vals[0]);
    };
    field("sensitivity_a", [](EhParams& p, double v) { p.sensitivity_a = v; });
    field("threshold_b", [](EhParams& p, double v) { p.threshold_b = v; });
    field("saturation_iota", [](EhParams& p, double v) { p.saturation_iota = v; });
  }
  if (j.contains("battery")) {
    const json& b = j.at("battery");
    detail::require_keys(b, {"capacity_j", "storage_efficiency", "fixed_circuit_energy_j"},
                         "battery");
    auto field = [&](const char* key, auto setter) {
      if (!b.contains(key)) return;
      auto vals = detail::per_user_values(b.at(key), s.num_users, std::string("battery.") + key);
      for (int k = 0; k < s.num_users; ++k) setter(cfg.battery_per_user[k], vals[k]);
      setter(cfg.battery, vals[0]);
    };
    field("capacity_j", [](BatteryParams& p, double v) { p.capacity_j = v; });
    field("storage_efficiency", [](BatteryParams& p, double v) { p.storage_efficiency = v; });
    field("fixed_circuit_energy_j", [](BatteryParams& p, double v) { p.fixed_circuit_energy_j = v; });
  }
  if (j.contains("uncertainty")) {
    const json& u = j.at("uncertainty");
    detail::require_keys(u, {"battery_bound_j", "location_bound_m", "location_sigma_m"},
                         "uncertainty");
    if (u.contains("battery_bound_j"))
      cfg.uncertainty.battery_bound_j = as_number(u.at("battery_bound_j"), "uncertainty.battery_bound_j");
    if (u.contains("location_bound_m"))
      cfg.uncertainty.location_bound_m = as_number(u.at("location_bound_m"), "uncertainty.location_bound_m");
    if (u.contains("location_sigma_m"))
      cfg.uncertainty.location_sigma_m = as_number(u.at("location_sigma_m"), "uncertainty.location_sigma_m");
  }
  if (j.contains("agent")) {
    const json& a = j.at("agent");
    detail::require_keys(a,
                         {"discount", "soft_update_tau", "learning_rate", "batch_size",
                          "buffer_capacity", "hidden_widths", "noise_std_initial",
                          "noise_std_final", "updates_per_episode", "target_policy_noise_std"},
                         "agent");
    auto& ac = cfg.agent;
    if (a.contains("discount")) ac.discount = as_number(a.at("discount"), "agent.discount");
    if (a.contains("soft_update_tau"))
      ac.soft_update_tau = as_number(a.at("soft_update_tau"), "agent.soft_update_tau");
    if (a.contains("learning_rate"))
      ac.learning_rate = as_number(a.at("learning_rate"), "agent.learning_rate");
    if (a.contains("batch_size")) ac.batch_size = as_int(a.at("batch_size"), "agent.batch_size");
    if (a.contains("buffer_capacity"))
      ac.buffer_capacity = as_int(a.at("buffer_capacity"), "agent.buffer_capacity");
    if (a.contains("hidden_widths")) {
      const json& w = a.at("hidden_widths");
      if (!w.is_array()) throw ConfigError("config key 'agent.hidden_widths': expected an array");
      ac.hidden_widths.clear();
      for (const auto& e : w) ac.hidden_widths.push_back(as_int(e, "agent.hidden_widths"));
    }
    if (a.contains("noise_std_initial"))
      ac.noise_std_initial = as_number(a.at("noise_std_initial"), "agent.noise_std_initial");
    if (a.contains("noise_std_final"))
      ac.noise_std_final = as_number(a.at("noise_std_final"), "agent.noise_std_final");
    if (a.contains("updates_per_episode"))
      ac.updates_per_episode = as_int(a.at("updates_per_episode"), "agent.updates_per_episode");
    else
      ac.updates_per_episode = s.num_slots;
    if (a.contains("target_policy_noise_std"))
      ac.target_policy_noise_std =
          as_number(a.at("target_policy_noise_std"), "agent.target_policy_noise_std");
  } else {
    cfg.agent.updates_per_episode = s.num_slots;
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    detail::require_keys(r, {"seeds", "episodes", "output_dir", "experiment_id"}, "run");
    if (r.contains("seeds")) {
      const json& sd = r.at("seeds");
      if (!sd.is_array()) throw ConfigError("config key 'run.seeds': expected an array");
      cfg.run.seeds.clear();
      for (const auto& e : sd) {
        if (!e.is_number_integer()) throw ConfigError("config key 'run.seeds': expected integers");
        cfg.run.seeds.push_back(e.get<std::uint64_t>());
      }
    }
    if (r.contains("episodes")) cfg.run.episodes = as_int(r.at("episodes"), "run.episodes");
    if (r.contains("output_dir")) {
      if (!r.at("output_dir").is_string())
        throw ConfigError("config key 'run.output_dir': expected a string");
      cfg.run.output_dir = r.at("output_dir").get<std::string>();
    }
    if (r.contains("experiment_id")) {
      if (!r.at("experiment_id").is_string())
        throw ConfigError("config key 'run.experiment_id': expected a string");
      cfg.run.experiment_id = r.at("experiment_id").get<std::string>();
    }
  }

  cfg.validate();
  return cfg;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

// Canonical form: every field explicit, per-user values materialized as
// arrays, keys in a fixed order. The config hash is computed over this dump.
inline json ExperimentConfig::canonical_json() const {
  json j;
  const auto& s = system;
  j["carrier_frequency_hz"] = s.carrier_frequency_hz;
  j["pa_height_m"] = s.pa_height_m;
  j["region_x_m"] = s.region_x_m;
  j["region_y_m"] = s.region_y_m;
  j["num_users"] = s.num_users;
  j["num_pas"] = s.num_pas;
  j["feed_position_m"] = s.feed_position_m;
  j["effective_refractive_index"] = s.effective_refractive_index;
  j["coupling_delta"] = s.coupling_delta;
  j["attenuation_db_per_m"] = s.attenuation_db_per_m;
  j["min_spacing_m"] = s.min_spacing_m;
  j["noise_power_w"] = s.noise_power_w;
  j["bs_wpt_power_w"] = s.bs_wpt_power_w;
  j["slot_duration_s"] = s.slot_duration_s;
  j["fixed_circuit_power_w"] = s.fixed_circuit_power_w;
  j["min_rate_bpshz"] = s.min_rate_bpshz;
  j["waveguide_length_m"] = s.waveguide_length_m;
  j["max_tx_power_w"] = s.max_tx_power_w;
  j["num_slots"] = s.num_slots;
  j["penalty_reward"] = s.penalty_reward;

  ExperimentConfig tmp = *this;
  tmp.materialize_per_user();
  json eh_j, bat_j;
  auto arr = [](auto&& get, const auto& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back(get(e));
    return a;
  };
  eh_j["sensitivity_a"] = arr([](const EhParams& p) { return p.sensitivity_a; }, tmp.eh_per_user);
  eh_j["threshold_b"] = arr([](const EhParams& p) { return p.threshold_b; }, tmp.eh_per_user);
  eh_j["saturation_iota"] =
      arr([](const EhParams& p) { return p.saturation_iota; }, tmp.eh_per_user);
  bat_j["capacity_j"] = arr([](const BatteryParams& p) { return p.capacity_j; }, tmp.battery_per_user);
  bat_j["storage_efficiency"] =
      arr([](const BatteryParams& p) { return p.storage_efficiency; }, tmp.battery_per_user);
  bat_j["fixed_circuit_energy_j"] =
      arr([](const BatteryParams& p) { return p.fixed_circuit_energy_j; }, tmp.battery_per_user);
  j["eh"] = eh_j;
  j["battery"] = bat_j;

  j["uncertainty"] = {{"battery_bound_j", uncertainty.battery_bound_j},
                      {"location_bound_m", uncertainty.location_bound_m},
                      {"location_sigma_m", uncertainty.location_sigma_m}};
  j["agent"] = {{"discount", agent.discount},
                {"soft_update_tau", agent.soft_update_tau},
                {"learning_rate", agent.learning_rate},
                {"batch_size", agent.batch_size},
                {"buffer_capacity", agent.buffer_capacity},
                {"hidden_widths", agent.hidden_widths},
                {"noise_std_initial", agent.noise_std_initial},
                {"noise_std_final", agent.noise_std_final},
                {"updates_per_episode", agent.updates_per_episode},
                {"target_policy_noise_std", agent.target_policy_noise_std}};
  j["run"] = {{"seeds", run.seeds},
              {"episodes", run.episodes},
              {"output_dir", run.output_dir},
              {"experiment_id", run.experiment_id}};
  return j;
}

inline std::string ExperimentConfig::hash() const {
  std::uint64_t h = fnv1a64(canonical_dump());
  std::ostringstream os;
  os << std::hex;
  for (int i = 15; i >= 0; --i) os << ((h >> (4 * i)) & 0xf);
  return os.str();
}

}  // namespace panoma
