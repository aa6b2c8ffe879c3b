#include "sdqn/envs.hpp"

#include <stdexcept>

namespace sdqn {

void CatchEnv::reset(std::uint64_t seed) {
  Rng rng = derive_rng(seed, "catch-spawn");
  ball_row_ = 0;
  ball_col_ = static_cast<std::size_t>(rng.uniform_int(kSize));
  paddle_col_ = kSize / 2;
  done_ = false;
}

StepResult CatchEnv::step(std::size_t action) {
  if (action >= n_actions()) throw std::invalid_argument("CatchEnv: invalid action");
  if (done_) throw std::logic_error("CatchEnv: step after terminal");
  if (action == 0 && paddle_col_ > 0) --paddle_col_;
  if (action == 2 && paddle_col_ + 1 < kSize) ++paddle_col_;
  ++ball_row_;
  StepResult r;
  if (ball_row_ == kSize - 1) {
    done_ = true;
    r.terminal = true;
    r.reward = (paddle_col_ == ball_col_) ? 1.0 : -1.0;
  }
  return r;
}

Tensor CatchEnv::observe() const {
  Tensor obs({1, kSize, kSize});
  obs.at(0, ball_row_, ball_col_) = 1.0;
  obs.at(0, kSize - 1, paddle_col_) = 1.0;
  return obs;
}

GridViewEnv::GridViewEnv() : walls_(kSize * kSize, false) {
  // Border walls plus a few internal baffles; goal in the far corner pocket.
  for (std::size_t i = 0; i < kSize; ++i) {
    walls_[0 * kSize + i] = walls_[(kSize - 1) * kSize + i] = true;
    walls_[i * kSize + 0] = walls_[i * kSize + (kSize - 1)] = true;
  }
  for (std::size_t r = 4; r < 20; ++r) walls_[r * kSize + 8] = true;
  for (std::size_t c = 8; c < 20; ++c) walls_[12 * kSize + c] = true;
  walls_[12 * kSize + 14] = false;  // gap in the horizontal baffle
  walls_[9 * kSize + 8] = false;    // gap in the vertical baffle
  goal_row_ = kSize - 3;
  goal_col_ = kSize - 3;
}

void GridViewEnv::reset(std::uint64_t seed) {
  Rng rng = derive_rng(seed, "gridview-spawn");
  do {
    agent_row_ = 1 + static_cast<std::size_t>(rng.uniform_int(kSize - 2));
    agent_col_ = 1 + static_cast<std::size_t>(rng.uniform_int(kSize - 2));
  } while (wall(agent_row_, agent_col_) ||
           (agent_row_ == goal_row_ && agent_col_ == goal_col_));
  steps_ = 0;
  done_ = false;
}

StepResult GridViewEnv::step(std::size_t action) {
  if (action >= n_actions()) throw std::invalid_argument("GridViewEnv: invalid action");
  if (done_) throw std::logic_error("GridViewEnv: step after terminal");
  std::ptrdiff_t dr = 0, dc = 0;
  switch (action) {
    case 0: dr = -1; break;
    case 1: dr = 1; break;
    case 2: dc = -1; break;
    case 3: dc = 1; break;
  }
  const std::size_t nr = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(agent_row_) + dr);
  const std::size_t nc = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(agent_col_) + dc);
  if (!wall(nr, nc)) {
    agent_row_ = nr;
    agent_col_ = nc;
  }
  ++steps_;
  StepResult r;
  r.reward = -0.01;
  if (agent_row_ == goal_row_ && agent_col_ == goal_col_) {
    r.reward += 1.0;
    r.terminal = true;
  } else if (steps_ >= kHorizon) {
    r.terminal = true;
  }
  done_ = r.terminal;
  return r;
}

Tensor GridViewEnv::observe() const {
  Tensor obs({1, kSize, kSize});
  for (std::size_t r = 0; r < kSize; ++r)
    for (std::size_t c = 0; c < kSize; ++c)
      if (wall(r, c)) obs.at(0, r, c) = 0.5;
  obs.at(0, goal_row_, goal_col_) = 0.75;
  obs.at(0, agent_row_, agent_col_) = 1.0;
  return obs;
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "catch") return std::make_unique<CatchEnv>();
  if (name == "gridview") return std::make_unique<GridViewEnv>();
  throw std::invalid_argument("make_env: unknown environment '" + name + "'");
}

void FrameStack::reset(const Tensor& frame) {
  frames_.assign(n_, frame);
}

void FrameStack::push(const Tensor& frame) {
  if (frames_.empty()) {
    reset(frame);
    return;
  }
  if (!frame.same_shape(frames_.back()))
    throw std::invalid_argument("FrameStack: frame " + frame.shape_str() +
                                " does not match stack " + frames_.back().shape_str());
  frames_.erase(frames_.begin());
  frames_.push_back(frame);
}

Tensor FrameStack::stacked() const {
  if (frames_.empty()) throw std::logic_error("FrameStack: empty stack");
  const auto& s = frames_[0].shape();
  const std::size_t H = s[1], W = s[2];
  Tensor out({n_, H, W});
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < H * W; ++j) out[i * H * W + j] = frames_[i][j];
  return out;
}

}  // namespace sdqn
