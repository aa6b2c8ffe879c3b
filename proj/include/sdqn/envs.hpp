#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "sdqn/rng.hpp"
#include "sdqn/tensor.hpp"

// Desk-scale pixel environments. Observations are [1,H,W] tensors with values
// in [0,1]; dynamics are deterministic given the reset seed.

namespace sdqn {

struct StepResult {
  double reward = 0.0;
  bool terminal = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual void reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::size_t action) = 0;
  virtual Tensor observe() const = 0;
  virtual std::size_t n_actions() const = 0;
  virtual std::size_t height() const = 0;
  virtual std::size_t width() const = 0;
  virtual std::string name() const = 0;
};

// A ball falls one row per step down a 24x24 grid; the paddle on the bottom
// row moves one cell per action (left, stay, right). Catching the ball on the
// bottom row pays +1, missing pays -1. The ball column is the only
// stochasticity and is fixed at reset.
class CatchEnv final : public Env {
 public:
  static constexpr std::size_t kSize = 24;

  void reset(std::uint64_t seed) override;
  StepResult step(std::size_t action) override;
  Tensor observe() const override;
  std::size_t n_actions() const override { return 3; }
  std::size_t height() const override { return kSize; }
  std::size_t width() const override { return kSize; }
  std::string name() const override { return "catch"; }

  std::size_t ball_row() const { return ball_row_; }
  std::size_t ball_col() const { return ball_col_; }
  std::size_t paddle_col() const { return paddle_col_; }

 private:
  std::size_t ball_row_ = 0;
  std::size_t ball_col_ = 0;
  std::size_t paddle_col_ = kSize / 2;
  bool done_ = false;
};

// A fixed 24x24 maze rendered to pixels (walls 0.5, goal 0.75, agent 1.0).
// Four actions (up, down, left, right); +1 at the goal, -0.01 per step,
// horizon 200. The agent spawn cell is seeded.
class GridViewEnv final : public Env {
 public:
  static constexpr std::size_t kSize = 24;
  static constexpr std::size_t kHorizon = 200;

  GridViewEnv();
  void reset(std::uint64_t seed) override;
  StepResult step(std::size_t action) override;
  Tensor observe() const override;
  std::size_t n_actions() const override { return 4; }
  std::size_t height() const override { return kSize; }
  std::size_t width() const override { return kSize; }
  std::string name() const override { return "gridview"; }

  std::size_t agent_row() const { return agent_row_; }
  std::size_t agent_col() const { return agent_col_; }

 private:
  bool wall(std::size_t r, std::size_t c) const { return walls_[r * kSize + c]; }

  std::vector<bool> walls_;
  std::size_t goal_row_ = 0, goal_col_ = 0;
  std::size_t agent_row_ = 0, agent_col_ = 0;
  std::size_t steps_ = 0;
  bool done_ = false;
};

std::unique_ptr<Env> make_env(const std::string& name);

// Sliding window of the last n frames, newest last, padded with copies of the
// first frame at episode start.
class FrameStack {
 public:
  explicit FrameStack(std::size_t n = 4) : n_(n) {}

  void reset(const Tensor& frame);
  void push(const Tensor& frame);
  // Stacked [n,H,W] tensor, channel order oldest..newest.
  Tensor stacked() const;
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<Tensor> frames_;
};

}  // namespace sdqn
