#include "sdqn/learn.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "sdqn/rl.hpp"

namespace sdqn {

namespace {

// Applies fn to every (param tensor, grad tensor, m, v) quadruple in a fixed
// declaration order.
template <typename Fn>
void visit_tensors(NetworkParams& params, const ParamGrads& grads, AdamState& state, Fn&& fn) {
  for (std::size_t l = 0; l < params.conv_kernels.size(); ++l) {
    fn(params.conv_kernels[l], grads.conv_kernels[l], state.m.conv_kernels[l],
       state.v.conv_kernels[l]);
    fn(params.pbln[l].lambda, grads.pbln_lambda[l], state.m.pbln_lambda[l],
       state.v.pbln_lambda[l]);
    fn(params.pbln[l].beta, grads.pbln_beta[l], state.m.pbln_beta[l], state.v.pbln_beta[l]);
  }
  if (params.pbln_fc) {
    fn(params.pbln_fc->lambda, grads.fc_pbln_lambda, state.m.fc_pbln_lambda,
       state.v.fc_pbln_lambda);
    fn(params.pbln_fc->beta, grads.fc_pbln_beta, state.m.fc_pbln_beta, state.v.fc_pbln_beta);
  }
  fn(params.fc_weights, grads.fc_weights, state.m.fc_weights, state.v.fc_weights);
  fn(params.readout_weights, grads.readout_weights, state.m.readout_weights,
     state.v.readout_weights);
}

template <typename Fn>
void visit_grads(ParamGrads& g, Fn&& fn) {
  for (auto& t : g.conv_kernels) fn(t);
  for (auto& t : g.pbln_lambda) fn(t);
  for (auto& t : g.pbln_beta) fn(t);
  fn(g.fc_pbln_lambda);
  fn(g.fc_pbln_beta);
  fn(g.fc_weights);
  fn(g.readout_weights);
}

template <typename Fn>
void visit_grads(const ParamGrads& g, Fn&& fn) {
  for (const auto& t : g.conv_kernels) fn(t);
  for (const auto& t : g.pbln_lambda) fn(t);
  for (const auto& t : g.pbln_beta) fn(t);
  fn(g.fc_pbln_lambda);
  fn(g.fc_pbln_beta);
  fn(g.fc_weights);
  fn(g.readout_weights);
}

Tensor flatten_copy(const Tensor& t) { return Tensor({t.numel()}, t.values()); }

}  // namespace

ParamGrads ParamGrads::zeros_like(const NetworkParams& params) {
  ParamGrads g;
  for (std::size_t l = 0; l < params.conv_kernels.size(); ++l) {
    g.conv_kernels.emplace_back(params.conv_kernels[l].shape());
    g.pbln_lambda.emplace_back(params.pbln[l].lambda.shape());
    g.pbln_beta.emplace_back(params.pbln[l].beta.shape());
  }
  if (params.pbln_fc) {
    g.fc_pbln_lambda = Tensor(params.pbln_fc->lambda.shape());
    g.fc_pbln_beta = Tensor(params.pbln_fc->beta.shape());
  }
  g.fc_weights = Tensor(params.fc_weights.shape());
  g.readout_weights = Tensor(params.readout_weights.shape());
  return g;
}

void ParamGrads::accumulate(const ParamGrads& other) {
  auto add = [](Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
  };
  for (std::size_t l = 0; l < conv_kernels.size(); ++l) {
    add(conv_kernels[l], other.conv_kernels[l]);
    add(pbln_lambda[l], other.pbln_lambda[l]);
    add(pbln_beta[l], other.pbln_beta[l]);
  }
  add(fc_pbln_lambda, other.fc_pbln_lambda);
  add(fc_pbln_beta, other.fc_pbln_beta);
  add(fc_weights, other.fc_weights);
  add(readout_weights, other.readout_weights);
}

void ParamGrads::scale(double s) {
  visit_grads(*this, [s](Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] *= s;
  });
}

double ParamGrads::squared_norm() const {
  double acc = 0.0;
  visit_grads(*this, [&acc](const Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i) acc += t[i] * t[i];
  });
  return acc;
}

bool ParamGrads::all_finite() const {
  bool ok = true;
  visit_grads(*this, [&ok](const Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i)
      if (!std::isfinite(t[i])) ok = false;
  });
  return ok;
}

void bptt_accumulate(const ForwardTrace& trace, const Tensor& grad_q,
                     const NetworkParams& params, const Architecture& arch, ParamGrads& grads) {
  const std::size_t L = arch.conv.size();
  const std::size_t T = arch.time_window;
  if (trace.steps.size() != T || (T > 0 && trace.steps[0].size() != L + 1))
    throw std::invalid_argument("bptt: trace does not match architecture");
  if (grad_q.numel() != arch.n_actions)
    throw std::invalid_argument("bptt: grad_q length " + std::to_string(grad_q.numel()) +
                                " does not match n_actions");
  if (grads.conv_kernels.size() != L)
    throw std::invalid_argument("bptt: gradient holder does not match params");
  const LifParams& lif = arch.lif;
  const double alpha = lif.alpha();
  const double inv_t = 1.0 / static_cast<double>(T);

  // dL/do for the fc layer is the readout pullback, identical at every step.
  Tensor gq_scaled({arch.n_actions});
  for (std::size_t m = 0; m < arch.n_actions; ++m) gq_scaled[m] = grad_q[m] * inv_t;
  const Tensor go_fc_base = linear_input_grad(gq_scaled, params.readout_weights);

  const auto conv_shapes = arch.conv_out_shapes();
  std::vector<Tensor> gu_next(L + 1);
  for (std::size_t l = 0; l < L; ++l) gu_next[l] = Tensor(conv_shapes[l]);
  gu_next[L] = Tensor({arch.fc_width});

  for (std::size_t ti = T; ti-- > 0;) {
    const auto& step = trace.steps[ti];
    Tensor go_carry;  // dL/do flowing into the layer below at this step

    // --- fc layer ---
    {
      const LayerTrace& lt = step[L];
      linear_weight_grad_sparse(gq_scaled, lt.o, grads.readout_weights);

      Tensor gu({arch.fc_width});
      for (std::size_t i = 0; i < gu.numel(); ++i) {
        const double surr = surrogate_grad_scalar(lt.u_pre[i], lif);
        gu[i] = go_fc_base[i] * surr + alpha * gu_next[L][i] * (lt.o[i] != 0.0 ? 0.0 : 1.0);
      }
      Tensor gx({arch.fc_width});
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = (1.0 - alpha) * gu[i];
      gu_next[L] = std::move(gu);

      Tensor ga;
      if (arch.pbln_fc) {
        PbLnGrads pg = pbln_backward(gx, *lt.pbln, *params.pbln_fc);
        for (std::size_t i = 0; i < pg.grad_lambda.numel(); ++i) {
          grads.fc_pbln_lambda[i] += pg.grad_lambda[i];
          grads.fc_pbln_beta[i] += pg.grad_beta[i];
        }
        ga = std::move(pg.grad_x);
      } else {
        ga = std::move(gx);
      }

      const Tensor fc_in =
          (L == 0) ? flatten_copy(trace.frames) : flatten_copy(step[L - 1].o);
      linear_weight_grad_sparse(ga, fc_in, grads.fc_weights);
      if (L > 0) {
        Tensor gin = linear_input_grad(ga, params.fc_weights);
        go_carry = Tensor(conv_shapes[L - 1], std::move(gin.values()));
      }
    }

    // --- conv layers, top down ---
    for (std::size_t li = L; li-- > 0;) {
      const LayerTrace& lt = step[li];
      const Tensor go = std::move(go_carry);

      Tensor gu(conv_shapes[li]);
      for (std::size_t i = 0; i < gu.numel(); ++i) {
        const double surr = surrogate_grad_scalar(lt.u_pre[i], lif);
        gu[i] = go[i] * surr + alpha * gu_next[li][i] * (lt.o[i] != 0.0 ? 0.0 : 1.0);
      }
      Tensor gx(conv_shapes[li]);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = (1.0 - alpha) * gu[i];
      gu_next[li] = std::move(gu);

      Tensor ga;
      if (arch.pbln_conv) {
        PbLnGrads pg = pbln_backward(gx, *lt.pbln, params.pbln[li]);
        for (std::size_t i = 0; i < pg.grad_lambda.numel(); ++i) {
          grads.pbln_lambda[li][i] += pg.grad_lambda[i];
          grads.pbln_beta[li][i] += pg.grad_beta[i];
        }
        ga = std::move(pg.grad_x);
      } else {
        ga = std::move(gx);
      }

      const Tensor& in = (li == 0) ? trace.frames : step[li - 1].o;
      conv2d_kernel_grad_sparse(ga, in, arch.conv[li], grads.conv_kernels[li]);
      if (li > 0)
        go_carry = conv2d_input_grad(ga, params.conv_kernels[li], arch.conv[li],
                                     conv_shapes[li - 1]);
    }
  }
}

ParamGrads bptt(const ForwardTrace& trace, const Tensor& grad_q, const NetworkParams& params,
                const Architecture& arch) {
  ParamGrads grads = ParamGrads::zeros_like(params);
  bptt_accumulate(trace, grad_q, params, arch, grads);
  return grads;
}

TdResult td_loss(const std::vector<Transition>& batch, const NetworkParams& online,
                 const NetworkParams& target, double gamma, const Architecture& arch,
                 ParamGrads* grads, int n_threads) {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("td_loss: gamma must lie in [0,1]");

  const std::size_t B = batch.size();
  TdResult result;
  result.delta.resize(B);

  std::vector<double> losses(B, 0.0);
  std::vector<ParamGrads> slots;
  if (grads) {
    slots.reserve(B);
    for (std::size_t i = 0; i < B; ++i) slots.push_back(ParamGrads::zeros_like(online));
  }

  auto run_sample = [&](std::size_t i) {
    const Transition& tr = batch[i];
    if (tr.action >= arch.n_actions)
      throw std::invalid_argument("td_loss: action index out of range");
    double y = tr.reward;
    if (!tr.terminal) {
      const Tensor qn = forward_q(tr.next_state, target, arch);
      double best = qn[0];
      for (std::size_t a = 1; a < qn.numel(); ++a) best = std::max(best, qn[a]);
      y += gamma * best;
    }
    if (grads) {
      auto [q, trace] = forward(tr.state, online, arch);
      const double delta = y - q[tr.action];
      result.delta[i] = delta;
      losses[i] = delta * delta;
      Tensor grad_q({arch.n_actions});
      grad_q[tr.action] = -2.0 * delta / static_cast<double>(B);
      bptt_accumulate(trace, grad_q, online, arch, slots[i]);
    } else {
      const Tensor q = forward_q(tr.state, online, arch);
      const double delta = y - q[tr.action];
      result.delta[i] = delta;
      losses[i] = delta * delta;
    }
  };

  const int workers = std::max(1, std::min<int>(n_threads, static_cast<int>(B)));
  if (workers == 1) {
    for (std::size_t i = 0; i < B; ++i) run_sample(i);
  } else {
    // Striped per-sample work; the reduction below runs in batch order, so
    // the result is independent of the thread count.
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w]() {
        for (std::size_t i = static_cast<std::size_t>(w); i < B;
             i += static_cast<std::size_t>(workers))
          run_sample(i);
      });
    for (auto& th : pool) th.join();
  }

  double loss_sum = 0.0;
  for (std::size_t i = 0; i < B; ++i) loss_sum += losses[i];
  result.loss = loss_sum / static_cast<double>(B);
  if (grads)
    for (std::size_t i = 0; i < B; ++i) grads->accumulate(slots[i]);
  return result;
}

AdamState AdamState::init(const NetworkParams& params) {
  AdamState s;
  s.m = ParamGrads::zeros_like(params);
  s.v = ParamGrads::zeros_like(params);
  return s;
}

void adam_step(NetworkParams& params, const ParamGrads& grads, AdamState& state, double lr) {
  if (!grads.all_finite())
    throw std::runtime_error("adam_step: non-finite gradient rejected (norm^2=" +
                             std::to_string(grads.squared_norm()) + ")");
  double clip_scale = 1.0;
  if (state.clip_norm > 0.0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > state.clip_norm) clip_scale = state.clip_norm / norm;
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  visit_tensors(params, grads, state,
                [&](Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
                  for (std::size_t i = 0; i < p.numel(); ++i) {
                    const double gi = g[i] * clip_scale;
                    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
                    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
                    const double mhat = m[i] / bc1;
                    const double vhat = v[i] / bc2;
                    p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
                  }
                });
}

}  // namespace sdqn
