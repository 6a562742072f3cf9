#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "panoma/config.hpp"
#include "panoma/mlp.hpp"
#include "panoma/replay.hpp"
#include "panoma/rng.hpp"

namespace panoma {

inline Matd clip_unit(const Matd& x) { return x.cwiseMax(-1.0).cwiseMin(1.0); }

// Y = r + gamma * Q'(s', clip(pi'(s') + xi')) with Y = r on terminal steps.
inline Vecd compute_td_targets(const Mlp& target_actor, const Mlp& target_critic,
                               const Batch& batch, double gamma, double target_noise_std,
                               Rng& rng) {
  if (batch.size() == 0) throw std::logic_error("compute_td_targets: empty batch");
  Matd next_actions = forward(target_actor, batch.next_observations);
  if (target_noise_std > 0.0) {
    for (int j = 0; j < next_actions.cols(); ++j)
      for (int i = 0; i < next_actions.rows(); ++i)
        next_actions(i, j) += rng.normal(0.0, target_noise_std);
    next_actions = clip_unit(next_actions);
  }
  Matd critic_in(batch.next_observations.rows() + next_actions.rows(), batch.size());
  critic_in.topRows(batch.next_observations.rows()) = batch.next_observations;
  critic_in.bottomRows(next_actions.rows()) = next_actions;
  const Matd q_next = forward(target_critic, critic_in);
  Vecd targets(batch.size());
  for (int i = 0; i < batch.size(); ++i)
    targets[i] = batch.rewards[i] + gamma * (1.0 - batch.terminal[i]) * q_next(0, i);
  return targets;
}

// One Adam step on the mean squared error between Q(s, a) and the targets.
// Returns the pre-step loss.
inline double critic_update(Mlp& critic, AdamState& opt, const Batch& batch, const Vecd& targets,
                            double lr) {
  const int h = batch.size();
  if (targets.size() != h) throw std::logic_error("critic_update: target size mismatch");
  Matd critic_in(batch.observations.rows() + batch.actions.rows(), h);
  critic_in.topRows(batch.observations.rows()) = batch.observations;
  critic_in.bottomRows(batch.actions.rows()) = batch.actions;
  ForwardCache cache;
  const Matd q = forward(critic, critic_in, &cache);
  const Vecd err = q.row(0).transpose() - targets;
  const double loss = err.squaredNorm() / static_cast<double>(h);
  Matd d_q(1, h);
  d_q.row(0) = (2.0 / static_cast<double>(h)) * err.transpose();
  adam_step(critic, opt, backward(critic, cache, d_q), lr);
  return loss;
}

// One Adam ascent step on mean Q(s, pi(s)); the critic only supplies the
// action gradient and keeps its parameters. Returns the pre-step objective.
inline double actor_update(Mlp& actor, AdamState& opt, const Mlp& critic, const Batch& batch,
                           double lr) {
  const int h = batch.size();
  if (h == 0) throw std::logic_error("actor_update: empty batch");
  ForwardCache actor_cache;
  const Matd actions = forward(actor, batch.observations, &actor_cache);
  Matd critic_in(batch.observations.rows() + actions.rows(), h);
  critic_in.topRows(batch.observations.rows()) = batch.observations;
  critic_in.bottomRows(actions.rows()) = actions;
  ForwardCache critic_cache;
  const Matd q = forward(critic, critic_in, &critic_cache);
  const double objective = q.row(0).mean();

  Matd d_q = Matd::Constant(1, h, -1.0 / static_cast<double>(h));  // minimize -mean(Q)
  const Gradients critic_grads = backward(critic, critic_cache, d_q);
  const Matd d_actions = critic_grads.d_input.bottomRows(actions.rows());
  adam_step(actor, opt, backward(actor, actor_cache, d_actions), lr);
  return objective;
}

struct TrainLogRow {
  int episode = 0;
  double episode_return = 0.0;
  double moving_avg_100 = 0.0;
  double noise_std = 0.0;
  double critic_loss = 0.0;
};

using TrainLog = std::vector<TrainLogRow>;

// Deterministic-policy learner with one critic and slowly tracking targets.
class DdpgAgent {
 public:
  DdpgAgent(int obs_dim, int action_dim, const AgentConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), obs_dim_(obs_dim), action_dim_(action_dim) {
    Rng init_rng = Rng(seed).split("init");
    std::vector<LayerSpec> actor_spec, critic_spec;
    int prev = obs_dim;
    for (int w : cfg.hidden_widths) {
      actor_spec.push_back({prev, w, Activation::relu, false});
      prev = w;
    }
    actor_spec.push_back({prev, action_dim, Activation::tanh, false});
    prev = obs_dim + action_dim;
    bool first = true;
    for (int w : cfg.hidden_widths) {
      critic_spec.push_back({prev, w, Activation::relu, first});  // norm after first affine
      prev = w;
      first = false;
    }
    critic_spec.push_back({prev, 1, Activation::identity, false});
    actor_ = init_mlp(actor_spec, init_rng);
    critic_ = init_mlp(critic_spec, init_rng);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_opt_ = make_adam_state(actor_);
    critic_opt_ = make_adam_state(critic_);
  }

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  const AgentConfig& config() const { return cfg_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target_critic() const { return target_critic_; }
  Mlp& mutable_actor() { return actor_; }
  Mlp& mutable_critic() { return critic_; }

  Vecd greedy(const Vecd& observation) const { return forward(actor_, observation); }

  Vecd act(const Vecd& observation, double noise_std, Rng& rng) const {
    if (noise_std < 0.0) throw std::domain_error("act: negative noise std");
    Vecd a = greedy(observation);
    for (int i = 0; i < a.size(); ++i) a[i] += noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0;
    return a.cwiseMax(-1.0).cwiseMin(1.0);
  }

  struct UpdateStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
  };

  UpdateStats update_round(const Batch& batch, Rng& rng) {
    const Vecd targets = compute_td_targets(target_actor_, target_critic_, batch, cfg_.discount,
                                            cfg_.target_policy_noise_std, rng);
    UpdateStats stats;
    stats.critic_loss = critic_update(critic_, critic_opt_, batch, targets, cfg_.learning_rate);
    stats.actor_objective = actor_update(actor_, actor_opt_, critic_, batch, cfg_.learning_rate);
    soft_update(target_actor_, actor_, cfg_.soft_update_tau);
    soft_update(target_critic_, critic_, cfg_.soft_update_tau);
    return stats;
  }

  void save(std::ostream& os) const {
    os << "PANOMA-CKPT 1\n";
    save_mlp(os, actor_);
    save_mlp(os, critic_);
    save_mlp(os, target_actor_);
    save_mlp(os, target_critic_);
    save_adam_state(os, actor_opt_);
    save_adam_state(os, critic_opt_);
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    save(os);
  }

  void load(std::istream& is) {
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != "PANOMA-CKPT" || version != 1)
      throw std::runtime_error("unrecognized checkpoint format");
    is.get();  // newline
    actor_ = load_mlp(is);
    critic_ = load_mlp(is);
    target_actor_ = load_mlp(is);
    target_critic_ = load_mlp(is);
    actor_opt_ = load_adam_state(is);
    critic_opt_ = load_adam_state(is);
    obs_dim_ = actor_.input_dim();
    action_dim_ = actor_.output_dim();
  }

  void load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    load(is);
  }

 private:
  AgentConfig cfg_;
  int obs_dim_;
  int action_dim_;
  Mlp actor_, critic_, target_actor_, target_critic_;
  AdamState actor_opt_, critic_opt_;
};

// Linear decay from the initial to the final exploration std over training.
inline double noise_schedule(const AgentConfig& cfg, int episode, int episodes) {
  if (episodes <= 1) return cfg.noise_std_initial;
  const double frac = static_cast<double>(episode) / static_cast<double>(episodes - 1);
  return cfg.noise_std_initial + (cfg.noise_std_final - cfg.noise_std_initial) * frac;
}

// Episode loop: act with exploration noise, store transitions, and after each
// episode run batched update rounds once the buffer can fill a batch. The
// whole run is a pure function of (seed, configs).
template <class EnvT>
TrainLog train_agent(EnvT& env, DdpgAgent& agent, int episodes, std::uint64_t seed) {
  const AgentConfig& cfg = agent.config();
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng root(seed);
  Rng noise_rng = root.split("exploration");
  Rng sample_rng = root.split("replay");
  Rng target_rng = root.split("target-noise");
  Rng episode_seeds = root.split("episodes");

  TrainLog log;
  std::vector<double> returns;
  for (int e = 0; e < episodes; ++e) {
    const double noise_std = noise_schedule(cfg, e, episodes);
    Vecd obs = env.reset(episode_seeds.next_u64());
    double episode_return = 0.0;
    bool done = false;
    while (!done) {
      const Vecd action = agent.act(obs, noise_std, noise_rng);
      const auto step = env.step_raw(action);
      buffer.push({obs, action, step.reward, step.observation, step.done});
      episode_return += step.reward;
      obs = step.observation;
      done = step.done;
    }

    double critic_loss = 0.0;
    int rounds = 0;
    if (buffer.size() >= cfg.batch_size) {
      for (int u = 0; u < cfg.updates_per_episode; ++u) {
        const Batch batch = buffer.sample(cfg.batch_size, sample_rng);
        critic_loss += agent.update_round(batch, target_rng).critic_loss;
        rounds += 1;
      }
    }

    returns.push_back(episode_return);
    const int window = std::min<int>(100, static_cast<int>(returns.size()));
    double avg = 0.0;
    for (int i = 0; i < window; ++i) avg += returns[returns.size() - 1 - i];
    avg /= window;
    log.push_back({e, episode_return, avg, noise_std, rounds > 0 ? critic_loss / rounds : 0.0});
  }
  return log;
}

}  // namespace panoma
