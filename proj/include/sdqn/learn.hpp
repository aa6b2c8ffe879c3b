#pragma once

#include <vector>

#include "sdqn/qnet.hpp"

// Training mathematics: TD loss, reverse-mode backpropagation through the
// forward trace (across layers and simulation steps, with the surrogate
// standing in for the Heaviside derivative and the reset treated as a
// detached constant), and bias-corrected Adam with global-norm clipping.

namespace sdqn {

struct ParamGrads {
  std::vector<Tensor> conv_kernels;
  std::vector<Tensor> pbln_lambda;
  std::vector<Tensor> pbln_beta;
  Tensor fc_pbln_lambda;  // empty unless the fc ablation switch is on
  Tensor fc_pbln_beta;
  Tensor fc_weights;
  Tensor readout_weights;

  static ParamGrads zeros_like(const NetworkParams& params);
  void accumulate(const ParamGrads& other);
  void scale(double s);
  double squared_norm() const;
  bool all_finite() const;
};

// Seeds reverse mode with dL/dq (one entry per action; zero rows contribute
// nothing) and accumulates exact gradients of the surrogate-smoothed graph
// into `grads`.
void bptt_accumulate(const ForwardTrace& trace, const Tensor& grad_q,
                     const NetworkParams& params, const Architecture& arch, ParamGrads& grads);

ParamGrads bptt(const ForwardTrace& trace, const Tensor& grad_q, const NetworkParams& params,
                const Architecture& arch);

struct Transition;  // defined in rl.hpp

struct TdResult {
  double loss = 0.0;
  std::vector<double> delta;  // per-sample signed TD error y - Q(s,a)
};

// Mean squared TD error over the batch; y = r + gamma * max_a Q_target(s',a)
// and y = r at terminal transitions. When `grads` is non-null, also
// accumulates dLoss/dtheta (per-sample forward + bptt, summed in batch
// order).
TdResult td_loss(const std::vector<Transition>& batch, const NetworkParams& online,
                 const NetworkParams& target, double gamma, const Architecture& arch,
                 ParamGrads* grads = nullptr, int n_threads = 1);

struct AdamState {
  ParamGrads m;
  ParamGrads v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global-norm gradient clip, 0 disables

  static AdamState init(const NetworkParams& params);
};

// In-place bias-corrected Adam update. Rejects non-finite gradients.
void adam_step(NetworkParams& params, const ParamGrads& grads, AdamState& state, double lr);

}  // namespace sdqn
