#pragma once

#include "sdqn/tensor.hpp"

// Leaky integrate-and-fire dynamics: decay-integrate the postsynaptic
// potential, spike on threshold crossing, hard-reset fired neurons. The
// surrogate derivative below is what training substitutes for the Heaviside
// step at the firing discontinuity.

namespace sdqn {

struct LifParams {
  double tau = 2.0;      // membrane time constant, >= 1
  double v_th = 1.0;     // firing threshold
  double v_reset = 0.0;  // post-spike potential

  double alpha() const { return 1.0 - 1.0 / tau; }

  void validate() const {
    if (tau < 1.0) throw std::invalid_argument("LifParams: tau must be >= 1");
    if (!(v_th > v_reset)) throw std::invalid_argument("LifParams: v_th must exceed v_reset");
  }
};

struct LifLayerState {
  Tensor u;  // membrane potentials (post-reset)
  Tensor o;  // spikes, each element exactly 0 or 1

  static LifLayerState resting(std::vector<std::size_t> shape, const LifParams& p) {
    LifLayerState s;
    s.u = Tensor::full(shape, p.v_reset);
    s.o = Tensor::zeros(std::move(shape));
    return s;
  }
};

// u' = alpha*u + (1-alpha)*x, elementwise.
Tensor decay_integrate(const Tensor& u, const Tensor& x, const LifParams& p);

// 1.0 where u >= v_th, else 0.0. Equality fires.
Tensor heaviside_spike(const Tensor& u, double v_th);

// Overwrites u with v_reset wherever o = 1.
Tensor apply_reset(const Tensor& u, const Tensor& o, double v_reset);

// One integrate -> spike -> reset step.
LifLayerState lif_step(const LifLayerState& state, const Tensor& x, const LifParams& p);

// Smooth stand-in for dH/du, centered at the threshold:
//   2*tau / (4 + (pi*tau*(u - v_th))^2),
// evaluated at the pre-reset potential.
Tensor surrogate_grad(const Tensor& u, const LifParams& p);

double surrogate_grad_scalar(double u, const LifParams& p);

}  // namespace sdqn
