#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sdqn/envs.hpp"
#include "sdqn/learn.hpp"
#include "sdqn/qnet.hpp"
#include "sdqn/rng.hpp"

// DQN harness: bounded FIFO replay, epsilon-greedy action selection, frozen
// target copies synced on a fixed period, the training loop, and greedy
// evaluation episodes. Fully deterministic given the seed.

namespace sdqn {

struct Transition {
  Tensor state;
  std::size_t action = 0;
  double reward = 0.0;
  Tensor next_state;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t cursor_ = 0;  // oldest element once full
};

// With probability 1-epsilon the argmax (lowest index wins ties), otherwise a
// uniform random action.
std::size_t epsilon_greedy(const Tensor& q, double epsilon, Rng& rng);

struct TrainConfig {
  double gamma = 0.99;
  double lr = 1e-4;
  std::size_t replay_capacity = 50000;
  std::size_t batch_size = 32;
  std::size_t target_sync = 1000;    // frames between target copies
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::size_t eps_decay_frames = 20000;
  std::size_t total_frames = 50000;
  std::size_t train_period = 4;      // gradient update every N frames
  std::size_t learn_start = 1000;    // frames of pure experience collection
  std::size_t eval_every = 2000;     // 0 disables periodic evaluation
  std::size_t eval_episodes = 30;
  double early_stop_return = std::numeric_limits<double>::infinity();
  double clip_norm = 10.0;
  int n_threads = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 1;

  double epsilon_at(std::size_t frame) const {
    if (frame >= eps_decay_frames) return eps_end;
    return eps_start -
           (eps_start - eps_end) * static_cast<double>(frame) /
               static_cast<double>(eps_decay_frames);
  }
};

struct EvalPoint {
  std::size_t frame = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::size_t frames_run = 0;
  std::size_t episodes = 0;
  std::vector<EvalPoint> evals;
  double final_loss = 0.0;
  bool early_stopped = false;
};

// act -> store -> sample -> td_loss -> bptt -> adam, with periodic target
// sync and greedy evaluations. Writes metrics.csv, summary.json and
// checkpoint.sdqn under out_dir (pass "" to keep everything in memory).
TrainResult train(const Architecture& arch, const TrainConfig& cfg, Env& env,
                  const std::string& out_dir);

// Greedy rollouts; returns mean and population std of episode returns.
std::pair<double, double> evaluate(const NetworkParams& params, const Architecture& arch,
                                   Env& env, std::size_t episodes, std::uint64_t seed);

}  // namespace sdqn
