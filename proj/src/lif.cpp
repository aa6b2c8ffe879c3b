#include "sdqn/lif.hpp"

#include <cmath>
#include <numbers>

namespace sdqn {

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}
}  // namespace

Tensor decay_integrate(const Tensor& u, const Tensor& x, const LifParams& p) {
  check_same_shape(u, x, "decay_integrate");
  const double a = p.alpha();
  Tensor out(u.shape());
  for (std::size_t i = 0; i < u.numel(); ++i) out[i] = a * u[i] + (1.0 - a) * x[i];
  return out;
}

Tensor heaviside_spike(const Tensor& u, double v_th) {
  Tensor out(u.shape());
  for (std::size_t i = 0; i < u.numel(); ++i) out[i] = (u[i] >= v_th) ? 1.0 : 0.0;
  return out;
}

Tensor apply_reset(const Tensor& u, const Tensor& o, double v_reset) {
  check_same_shape(u, o, "apply_reset");
  Tensor out(u.shape());
  for (std::size_t i = 0; i < u.numel(); ++i) out[i] = (o[i] != 0.0) ? v_reset : u[i];
  return out;
}

LifLayerState lif_step(const LifLayerState& state, const Tensor& x, const LifParams& p) {
  p.validate();
  const Tensor u_pre = decay_integrate(state.u, x, p);
  LifLayerState next;
  next.o = heaviside_spike(u_pre, p.v_th);
  next.u = apply_reset(u_pre, next.o, p.v_reset);
  return next;
}

double surrogate_grad_scalar(double u, const LifParams& p) {
  const double v = std::numbers::pi * p.tau * (u - p.v_th);
  return 2.0 * p.tau / (4.0 + v * v);
}

Tensor surrogate_grad(const Tensor& u, const LifParams& p) {
  Tensor out(u.shape());
  for (std::size_t i = 0; i < u.numel(); ++i) out[i] = surrogate_grad_scalar(u[i], p);
  return out;
}

}  // namespace sdqn
