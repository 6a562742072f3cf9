#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "panoma/baselines.hpp"
#include "panoma/config.hpp"
#include "panoma/ddpg.hpp"
#include "panoma/env.hpp"

namespace panoma {

namespace csv {

// Shortest round-trip decimal form (via the JSON serializer) so emitted
// files re-parse to the exact double.
inline std::string fmt(double v) { return nlohmann::json(v).dump(); }

inline std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ',';
    line += fields[i];
  }
  return line;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv column not found: " + name);
  }
};

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path);
  Table table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (first) {
      table.header = fields;
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw std::runtime_error("ragged csv row in " + path);
      table.rows.push_back(fields);
    }
  }
  return table;
}

}  // namespace csv

struct TrainResult {
  TrainLog log;
  double wall_time_s = 0.0;
};

// One full training run; pure function of (config, seed, episodes, mode).
inline TrainResult train_run(const ExperimentConfig& cfg, DdpgAgent& agent, std::uint64_t seed,
                             int episodes, RateMode mode = RateMode::noma) {
  NomaEnv env(cfg, mode);
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  result.log = train_agent(env, agent, episodes, seed);
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline DdpgAgent make_agent(const ExperimentConfig& cfg, std::uint64_t seed) {
  NomaEnv env(cfg);  // for dimensions only
  return DdpgAgent(env.obs_dim(), env.action_dim(), cfg.agent, seed);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write file: " + path.string());
  os << content;
}

inline void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::string out = "episode,return,moving_avg_100,noise_std,critic_loss\n";
  for (const auto& row : log) {
    out += csv::join({std::to_string(row.episode), csv::fmt(row.episode_return),
                      csv::fmt(row.moving_avg_100), csv::fmt(row.noise_std),
                      csv::fmt(row.critic_loss)});
    out += '\n';
  }
  write_text_file(path, out);
}

// One greedy-policy episode, one row per slot.
inline void write_trace_csv(const std::filesystem::path& path, const ExperimentConfig& cfg,
                            const Mlp& actor, std::uint64_t seed, RateMode mode = RateMode::noma) {
  NomaEnv env(cfg, mode);
  const int k = env.num_users();
  const int n = env.num_pas();
  std::vector<std::string> header = {"t", "beta"};
  for (int i = 1; i <= k; ++i) header.push_back("p_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) header.push_back("x_" + std::to_string(i));
  for (int i = 1; i <= k; ++i) header.push_back("rate_" + std::to_string(i));
  header.push_back("reward");
  for (int i = 1; i <= k; ++i) header.push_back("battery_" + std::to_string(i));
  std::string out = csv::join(header) + "\n";

  Vecd obs = env.reset(seed);
  bool done = false;
  int t = 0;
  while (!done) {
    const ActionVector action = env.decode_action(forward(actor, obs));
    const StepOutcome step = env.step(action);
    std::vector<std::string> row = {std::to_string(t), csv::fmt(action.beta)};
    for (double p : action.powers_w) row.push_back(csv::fmt(p));
    for (double x : action.layout.positions_m) row.push_back(csv::fmt(x));
    for (double r : step.diagnostics.rates_bpshz) row.push_back(csv::fmt(r));
    row.push_back(csv::fmt(step.reward));
    for (double b : step.next_state.true_batteries_j) row.push_back(csv::fmt(b));
    out += csv::join(row) + "\n";
    obs = env.observe(step.next_state);
    done = step.done;
    ++t;
  }
  write_text_file(path, out);
}

inline std::string eval_csv_text(const std::vector<std::pair<PolicySpec::Kind, PolicyStats>>& rows,
                                 const std::vector<std::uint64_t>& seeds, int episodes) {
  std::string seeds_str;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i > 0) seeds_str += ';';
    seeds_str += std::to_string(seeds[i]);
  }
  std::string out =
      "policy,seeds,episodes,mean_ee,median_ee,std_ee,rate_satisfaction,mean_harvested_j\n";
  for (const auto& [kind, stats] : rows) {
    out += csv::join({to_string(kind), seeds_str, std::to_string(episodes),
                      csv::fmt(stats.mean_ee), csv::fmt(stats.median_ee), csv::fmt(stats.std_ee),
                      csv::fmt(stats.rate_satisfaction), csv::fmt(stats.mean_harvested_j)});
    out += '\n';
  }
  return out;
}

struct TrainCommandResult {
  std::filesystem::path out_dir;
  double final_moving_avg = 0.0;
  std::string config_hash;
};

// train: writes config.json, train_log.csv, checkpoint.ckpt, eval.csv (greedy
// policy, small fixed episode count) and summary.json into one directory.
inline TrainCommandResult cmd_train(ExperimentConfig cfg, std::optional<std::uint64_t> seed_flag,
                                    std::optional<int> episodes_flag,
                                    std::optional<std::string> out_flag) {
  if (episodes_flag) cfg.run.episodes = *episodes_flag;
  if (out_flag) cfg.run.output_dir = *out_flag;
  if (seed_flag) cfg.run.seeds = {*seed_flag};
  cfg.validate();
  const std::uint64_t seed = cfg.run.seeds.front();

  const std::filesystem::path dir =
      std::filesystem::path(cfg.run.output_dir) / cfg.run.experiment_id;
  std::filesystem::create_directories(dir);
  write_text_file(dir / "config.json", cfg.canonical_dump());

  DdpgAgent agent = make_agent(cfg, seed);
  const TrainResult result = train_run(cfg, agent, seed, cfg.run.episodes);
  write_train_log_csv(dir / "train_log.csv", result.log);
  agent.save_file((dir / "checkpoint.ckpt").string());

  constexpr int kEvalEpisodes = 10;
  const PolicyStats stats =
      evaluate_policy(PolicySpec{PolicySpec::Kind::drl}, cfg, kEvalEpisodes, {seed}, agent.actor());
  write_text_file(dir / "eval.csv",
                  eval_csv_text({{PolicySpec::Kind::drl, stats}}, {seed}, kEvalEpisodes));
  write_trace_csv(dir / "trace.csv", cfg, agent.actor(), mix_seed(seed, fnv1a64("trace")));

  json summary;
  summary["experiment_id"] = cfg.run.experiment_id;
  summary["config_hash"] = cfg.hash();
  summary["seed"] = seed;
  summary["episodes"] = cfg.run.episodes;
  summary["final_moving_avg_100"] = result.log.back().moving_avg_100;
  summary["final_noise_std"] = result.log.back().noise_std;
  summary["eval_mean_ee"] = stats.mean_ee;
  summary["wall_time_s"] = result.wall_time_s;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");

  return {dir, result.log.back().moving_avg_100, cfg.hash()};
}

// eval: loads a checkpoint and reports frozen-policy statistics.
inline PolicyStats cmd_eval(ExperimentConfig cfg, const std::string& policy_name,
                            const std::string& checkpoint_path, int episodes = 10) {
  PolicySpec policy;
  policy.kind = policy_kind_from_string(policy_name);
  DdpgAgent agent = make_agent(cfg, 0);
  agent.load_file(checkpoint_path);
  const PolicyStats stats = evaluate_policy(policy, cfg, episodes, cfg.run.seeds, agent.actor());

  const std::filesystem::path dir =
      std::filesystem::path(cfg.run.output_dir) / cfg.run.experiment_id;
  std::filesystem::create_directories(dir);
  write_text_file(dir / "eval.csv", eval_csv_text({{policy.kind, stats}}, cfg.run.seeds, episodes));
  write_trace_csv(dir / "trace.csv", cfg, agent.actor(),
                  mix_seed(cfg.run.seeds.front(), fnv1a64("trace")),
                  policy.kind == PolicySpec::Kind::oma_drl ? RateMode::oma : RateMode::noma);
  return stats;
}

enum class SweepAxis { pas, users };

struct SweepRow {
  int axis_value = 0;
  PolicySpec::Kind policy;
  double mean_ee = 0.0;
  double std_ee = 0.0;
};

inline ExperimentConfig config_for_axis(ExperimentConfig cfg, SweepAxis axis, int value) {
  if (axis == SweepAxis::pas) {
    cfg.system.num_pas = value;
  } else {
    cfg.system.num_users = value;
    cfg.eh_per_user.clear();       // re-broadcast the scalar parameters
    cfg.battery_per_user.clear();
  }
  cfg.materialize_per_user();
  cfg.validate();
  return cfg;
}

// sweep: trains per (axis value, seed) with matched seeds, evaluates every
// benchmark, and emits (axis_value, policy, mean_ee, std_ee). The orthogonal
// benchmark trains its own agent on the orthogonal rate law.
inline std::vector<SweepRow> cmd_sweep(const ExperimentConfig& base, SweepAxis axis,
                                       const std::vector<int>& values,
                                       const std::vector<std::uint64_t>& seeds,
                                       int eval_episodes = 10, std::ostream* progress = nullptr) {
  struct Task {
    int value_idx;
    int seed_idx;
  };
  std::vector<Task> tasks;
  for (std::size_t vi = 0; vi < values.size(); ++vi)
    for (std::size_t si = 0; si < seeds.size(); ++si)
      tasks.push_back({static_cast<int>(vi), static_cast<int>(si)});

  const std::vector<PolicySpec::Kind> kinds = {
      PolicySpec::Kind::drl, PolicySpec::Kind::fixed, PolicySpec::Kind::discrete,
      PolicySpec::Kind::continuous_constrained, PolicySpec::Kind::oma_drl};

  // per (value, seed, policy): mean episodic EE
  std::vector<std::vector<std::vector<double>>> ee(
      values.size(),
      std::vector<std::vector<double>>(seeds.size(), std::vector<double>(kinds.size(), 0.0)));

  std::atomic<std::size_t> next{0};
  std::atomic<int> done_count{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const Task task = tasks[t];
      const ExperimentConfig cfg = config_for_axis(base, axis, values[task.value_idx]);
      const std::uint64_t seed = seeds[task.seed_idx];

      DdpgAgent noma_agent = make_agent(cfg, seed);
      train_run(cfg, noma_agent, seed, cfg.run.episodes, RateMode::noma);
      DdpgAgent oma_agent = make_agent(cfg, mix_seed(seed, fnv1a64("oma")));
      train_run(cfg, oma_agent, mix_seed(seed, fnv1a64("oma")), cfg.run.episodes, RateMode::oma);

      for (std::size_t pi = 0; pi < kinds.size(); ++pi) {
        PolicySpec policy;
        policy.kind = kinds[pi];
        const Mlp& actor =
            policy.kind == PolicySpec::Kind::oma_drl ? oma_agent.actor() : noma_agent.actor();
        const PolicyStats stats = evaluate_policy(policy, cfg, eval_episodes, {seed}, actor);
        ee[task.value_idx][task.seed_idx][pi] = stats.mean_ee;
      }
      if (progress != nullptr)
        (*progress) << "sweep task " << done_count.fetch_add(1) + 1 << "/" << tasks.size()
                    << " done\n";
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min<std::size_t>(hw, tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::vector<SweepRow> rows;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    for (std::size_t pi = 0; pi < kinds.size(); ++pi) {
      std::vector<double> vals;
      for (std::size_t si = 0; si < seeds.size(); ++si) vals.push_back(ee[vi][si][pi]);
      std::sort(vals.begin(), vals.end());
      const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      const double stddev = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1.0)) : 0.0;
      rows.push_back({values[vi], kinds[pi], mean, stddev});
    }
  }
  return rows;
}

inline std::string sweep_csv_text(const std::vector<SweepRow>& rows) {
  std::string out = "axis_value,policy,mean_ee,std_ee\n";
  for (const auto& row : rows) {
    out += csv::join({std::to_string(row.axis_value), to_string(row.policy),
                      csv::fmt(row.mean_ee), csv::fmt(row.std_ee)});
    out += '\n';
  }
  return out;
}

struct OracleCheckReport {
  OracleResult oracle;
  double agent_ee = 0.0;
  double ratio = 0.0;
  double replay_relative_error = 0.0;
  std::uint64_t seed = 0;
};

// Freezes one state, runs the exhaustive maximizer, replays its action
// through the environment, and scores the actor's greedy action on the same
// state.
inline OracleCheckReport oracle_check_report(const ExperimentConfig& cfg, const Mlp& actor,
                                             std::uint64_t seed,
                                             const OracleGrids& grids = OracleGrids{}) {
  const auto& s = cfg.system;
  if (s.num_users > 2 || s.num_pas > 2)
    throw std::logic_error("oracle-check: instance guard requires num_users <= 2 and num_pas <= 2");

  NomaEnv env(cfg);
  env.reset(mix_seed(seed, fnv1a64("oracle-state")));
  const EnvState frozen = env.state();

  OracleCheckReport report;
  report.seed = seed;
  report.oracle = brute_force_oracle(env, frozen, grids);

  // Replay through the environment via the decode path.
  const int k = s.num_users;
  const int n = s.num_pas;
  Vecd raw(k + n + 1);
  for (int i = 0; i < k; ++i)
    raw[i] = 2.0 * report.oracle.best_powers_w[static_cast<std::size_t>(i)] / s.max_tx_power_w - 1.0;
  for (int i = 0; i < n; ++i)
    raw[k + i] =
        2.0 * report.oracle.best_layout.positions_m[static_cast<std::size_t>(i)] /
            s.waveguide_length_m - 1.0;
  raw[k + n] = 2.0 * report.oracle.best_beta - 1.0;
  env.restore_state(frozen);
  const StepOutcome replay = env.step(env.decode_action(raw));
  report.replay_relative_error =
      report.oracle.best_ee != 0.0
          ? std::abs(replay.diagnostics.ee_bpshz_per_w - report.oracle.best_ee) /
                std::abs(report.oracle.best_ee)
          : std::abs(replay.diagnostics.ee_bpshz_per_w);

  env.restore_state(frozen);
  const ActionVector agent_action = env.decode_action(forward(actor, env.observe(frozen)));
  report.agent_ee = env.preview(frozen, agent_action).ee_bpshz_per_w;
  report.ratio = report.oracle.best_ee > 0.0 ? report.agent_ee / report.oracle.best_ee : 0.0;
  return report;
}

inline std::string oracle_check_csv_text(const OracleCheckReport& r) {
  std::string out =
      "beta_points,power_points,position_points,seed,evaluations,oracle_ee,agent_ee,ratio,"
      "replay_relative_error\n";
  out += csv::join({std::to_string(r.oracle.grids.beta_points),
                    std::to_string(r.oracle.grids.power_points),
                    std::to_string(r.oracle.grids.position_points), std::to_string(r.seed),
                    std::to_string(r.oracle.evaluations), csv::fmt(r.oracle.best_ee),
                    csv::fmt(r.agent_ee), csv::fmt(r.ratio), csv::fmt(r.replay_relative_error)});
  out += '\n';
  return out;
}

inline OracleCheckReport cmd_oracle_check(const ExperimentConfig& cfg,
                                          const std::string& checkpoint_path) {
  DdpgAgent agent = make_agent(cfg, 0);
  agent.load_file(checkpoint_path);
  const OracleCheckReport report = oracle_check_report(cfg, agent.actor(), cfg.run.seeds.front());
  const std::filesystem::path dir =
      std::filesystem::path(cfg.run.output_dir) / cfg.run.experiment_id;
  std::filesystem::create_directories(dir);
  write_text_file(dir / "oracle_check.csv", oracle_check_csv_text(report));
  return report;
}

}  // namespace panoma
