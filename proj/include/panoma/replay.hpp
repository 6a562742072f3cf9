#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "panoma/mlp.hpp"
#include "panoma/rng.hpp"

namespace panoma {

struct Transition {
  Vecd observation;
  Vecd action_raw;
  double reward = 0.0;
  Vecd next_observation;
  bool terminal = false;
};

struct Batch {
  Matd observations;       // obs_dim x H
  Matd actions;            // action_dim x H
  Vecd rewards;            // H
  Matd next_observations;  // obs_dim x H
  Vecd terminal;           // H, 1.0 when terminal

  int size() const { return static_cast<int>(rewards.size()); }
};

// Fixed-capacity ring; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::logic_error("ReplayBuffer: capacity must be >= 1");
    storage_.reserve(static_cast<std::size_t>(capacity));
  }

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(storage_.size()); }

  void push(Transition t) {
    if (size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[static_cast<std::size_t>(cursor_)] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  const Transition& at(int i) const { return storage_.at(static_cast<std::size_t>(i)); }

  Batch sample(int batch_size, Rng& rng) const {
    if (size() == 0) throw std::logic_error("ReplayBuffer: sample from empty buffer");
    const int obs_dim = static_cast<int>(storage_.front().observation.size());
    const int act_dim = static_cast<int>(storage_.front().action_raw.size());
    Batch batch;
    batch.observations.resize(obs_dim, batch_size);
    batch.actions.resize(act_dim, batch_size);
    batch.rewards.resize(batch_size);
    batch.next_observations.resize(obs_dim, batch_size);
    batch.terminal.resize(batch_size);
    for (int i = 0; i < batch_size; ++i) {
      const Transition& t = storage_[rng.index(storage_.size())];
      batch.observations.col(i) = t.observation;
      batch.actions.col(i) = t.action_raw;
      batch.rewards[i] = t.reward;
      batch.next_observations.col(i) = t.next_observation;
      batch.terminal[i] = t.terminal ? 1.0 : 0.0;
    }
    return batch;
  }

 private:
  int capacity_;
  int cursor_ = 0;
  std::vector<Transition> storage_;
};

}  // namespace panoma
