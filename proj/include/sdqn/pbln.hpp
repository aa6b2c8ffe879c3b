#pragma once

#include "sdqn/lif.hpp"
#include "sdqn/tensor.hpp"

// Potential-based layer normalization: standardizes the postsynaptic
// potential of one layer at one time step over all of its C*H*W elements,
// then applies a learnable per-channel scale and shift before the membrane
// update. Statistics are per-sample and per-step; nothing is batched and no
// running averages exist.

namespace sdqn {

struct PbLnParams {
  Tensor lambda;          // scale, one entry per channel
  Tensor beta;            // shift, one entry per channel
  double epsilon = 1e-5;  // variance guard
};

struct PbLnCache {
  Tensor x_hat;  // standardized input, pre-affine
  double mean = 0.0;
  double variance = 0.0;
  double inv_std = 0.0;
};

// lambda = v_th - v_reset, beta = v_reset: a unit normalized input exactly
// reaches threshold from rest.
PbLnParams pbln_init(const LifParams& lif, std::size_t channels);

// x is [C,H,W] or flat [C]; axis 0 is the channel axis.
std::pair<Tensor, PbLnCache> pbln_forward(const Tensor& x, const PbLnParams& p);

struct PbLnGrads {
  Tensor grad_x;
  Tensor grad_lambda;
  Tensor grad_beta;
};

PbLnGrads pbln_backward(const Tensor& grad_y, const PbLnCache& cache, const PbLnParams& p);

// lif_step with x replaced by pbln_forward(x).
LifLayerState pbln_lif_step(const LifLayerState& state, const Tensor& x, const LifParams& lif,
                            const PbLnParams& p);

}  // namespace sdqn
