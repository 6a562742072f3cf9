// Command-line driver: reproducible training, evaluation, sweeps, and oracle
// comparison for the pinching-antenna NOMA simulator.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "panoma/experiment.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Wireless-powered pinching-antenna NOMA simulator and optimizer"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> episodes_flag;
  std::optional<std::string> out_flag;

  auto* train = app.add_subcommand("train", "Train the learning agent");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required();
  std::uint64_t seed_value = 0;
  auto* seed_opt = train->add_option("--seed", seed_value, "Override the run seed");
  int episodes_value = 0;
  auto* episodes_opt = train->add_option("--episodes", episodes_value, "Override episode count");
  std::string out_value;
  auto* out_opt = train->add_option("--out", out_value, "Override the output directory");

  auto* sweep = app.add_subcommand("sweep", "Sweep the antenna or user count");
  std::string sweep_config, axis;
  std::vector<int> values;
  std::vector<std::uint64_t> sweep_seeds;
  sweep->add_option("--config", sweep_config, "Experiment config (JSON)")->required();
  sweep->add_option("--axis", axis, "pas|users")->required();
  sweep->add_option("--values", values, "Axis values, comma separated")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "Seeds, comma separated")->delimiter(',');

  auto* eval = app.add_subcommand("eval", "Evaluate a frozen policy from a checkpoint");
  std::string eval_config, policy, checkpoint;
  int eval_episodes = 10;
  eval->add_option("--config", eval_config, "Experiment config (JSON)")->required();
  eval->add_option("--policy", policy, "drl|fixed|discrete|continuous_constrained|oma")
      ->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes per seed");

  auto* oracle = app.add_subcommand("oracle-check", "Compare the agent against the grid oracle");
  std::string oracle_config, oracle_ckpt;
  oracle->add_option("--config", oracle_config, "Experiment config (JSON)")->required();
  oracle->add_option("--checkpoint", oracle_ckpt, "Checkpoint path")->required();

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    if (*seed_opt) seed_flag = seed_value;
    if (*episodes_opt) episodes_flag = episodes_value;
    if (*out_opt) out_flag = out_value;
    auto cfg = panoma::ExperimentConfig::from_file(config_path);
    const auto result = panoma::cmd_train(cfg, seed_flag, episodes_flag, out_flag);
    std::cout << "train: wrote " << result.out_dir.string() << " (final moving avg "
              << result.final_moving_avg << ", config " << result.config_hash << ")\n";
  } else if (sweep->parsed()) {
    auto cfg = panoma::ExperimentConfig::from_file(sweep_config);
    panoma::SweepAxis sweep_axis;
    if (axis == "pas")
      sweep_axis = panoma::SweepAxis::pas;
    else if (axis == "users")
      sweep_axis = panoma::SweepAxis::users;
    else
      throw panoma::ConfigError("--axis must be 'pas' or 'users'");
    const auto seeds = sweep_seeds.empty() ? cfg.run.seeds : sweep_seeds;
    const auto rows = panoma::cmd_sweep(cfg, sweep_axis, values, seeds, 10, &std::cerr);
    const std::filesystem::path dir =
        std::filesystem::path(cfg.run.output_dir) / cfg.run.experiment_id;
    std::filesystem::create_directories(dir);
    const auto path = dir / ("sweep_" + axis + ".csv");
    panoma::write_text_file(path, panoma::sweep_csv_text(rows));
    std::cout << "sweep: wrote " << path.string() << "\n";
  } else if (eval->parsed()) {
    auto cfg = panoma::ExperimentConfig::from_file(eval_config);
    const auto stats = panoma::cmd_eval(cfg, policy, checkpoint, eval_episodes);
    std::cout << "eval: policy " << policy << " mean_ee " << stats.mean_ee
              << " rate_satisfaction " << stats.rate_satisfaction << "\n";
  } else if (oracle->parsed()) {
    auto cfg = panoma::ExperimentConfig::from_file(oracle_config);
    const auto report = panoma::cmd_oracle_check(cfg, oracle_ckpt);
    std::cout << "oracle-check: oracle_ee " << report.oracle.best_ee << " agent_ee "
              << report.agent_ee << " ratio " << report.ratio << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const panoma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
