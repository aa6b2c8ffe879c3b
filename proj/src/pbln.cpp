#include "sdqn/pbln.hpp"

#include <cmath>

namespace sdqn {

namespace {

std::size_t channel_count(const Tensor& x) { return x.shape()[0]; }

std::size_t per_channel(const Tensor& x) { return x.numel() / x.shape()[0]; }

void check_params(const Tensor& x, const PbLnParams& p, const char* op) {
  if (p.lambda.numel() != channel_count(x) || p.beta.numel() != channel_count(x))
    throw std::invalid_argument(std::string(op) + ": params sized for " +
                                std::to_string(p.lambda.numel()) + " channels, input " +
                                x.shape_str());
  if (!(p.epsilon > 0.0)) throw std::invalid_argument(std::string(op) + ": epsilon must be > 0");
}

}  // namespace

PbLnParams pbln_init(const LifParams& lif, std::size_t channels) {
  lif.validate();
  if (channels == 0) throw std::invalid_argument("pbln_init: channels must be >= 1");
  PbLnParams p;
  p.lambda = Tensor::full({channels}, lif.v_th - lif.v_reset);
  p.beta = Tensor::full({channels}, lif.v_reset);
  p.epsilon = 1e-5;
  return p;
}

std::pair<Tensor, PbLnCache> pbln_forward(const Tensor& x, const PbLnParams& p) {
  if (x.empty()) throw std::invalid_argument("pbln_forward: empty tensor");
  check_params(x, p, "pbln_forward");

  const auto [mean, variance] = mean_and_variance(x);
  PbLnCache cache;
  cache.mean = mean;
  cache.variance = variance;
  cache.inv_std = 1.0 / std::sqrt(variance + p.epsilon);

  const std::size_t C = channel_count(x), stride = per_channel(x);
  cache.x_hat = Tensor(x.shape());
  Tensor y(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const double lam = p.lambda[c], bet = p.beta[c];
    for (std::size_t i = c * stride; i < (c + 1) * stride; ++i) {
      const double xh = (x[i] - mean) * cache.inv_std;
      cache.x_hat[i] = xh;
      y[i] = lam * xh + bet;
    }
  }
  return {std::move(y), std::move(cache)};
}

PbLnGrads pbln_backward(const Tensor& grad_y, const PbLnCache& cache, const PbLnParams& p) {
  if (cache.x_hat.empty() || cache.inv_std == 0.0)
    throw std::invalid_argument("pbln_backward: cache not produced by pbln_forward");
  if (!grad_y.same_shape(cache.x_hat))
    throw std::invalid_argument("pbln_backward: grad_y " + grad_y.shape_str() +
                                " does not match cached forward " + cache.x_hat.shape_str());
  check_params(grad_y, p, "pbln_backward");

  const std::size_t C = channel_count(grad_y), stride = per_channel(grad_y);
  const std::size_t n = grad_y.numel();
  const double inv_n = 1.0 / static_cast<double>(n);

  PbLnGrads g;
  g.grad_x = Tensor(grad_y.shape());
  g.grad_lambda = Tensor({C});
  g.grad_beta = Tensor({C});

  // gh = dL/dx_hat; the mean/variance coupling makes every input gradient
  // depend on the two reductions below.
  Tensor gh(grad_y.shape());
  double sum_gh = 0.0, sum_gh_xh = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double lam = p.lambda[c];
    double gl = 0.0, gb = 0.0;
    for (std::size_t i = c * stride; i < (c + 1) * stride; ++i) {
      gl += grad_y[i] * cache.x_hat[i];
      gb += grad_y[i];
      const double v = grad_y[i] * lam;
      gh[i] = v;
      sum_gh += v;
      sum_gh_xh += v * cache.x_hat[i];
    }
    g.grad_lambda[c] = gl;
    g.grad_beta[c] = gb;
  }

  const double m1 = sum_gh * inv_n;
  const double m2 = sum_gh_xh * inv_n;
  for (std::size_t i = 0; i < n; ++i)
    g.grad_x[i] = cache.inv_std * (gh[i] - m1 - cache.x_hat[i] * m2);
  return g;
}

LifLayerState pbln_lif_step(const LifLayerState& state, const Tensor& x, const LifParams& lif,
                            const PbLnParams& p) {
  auto [y, cache] = pbln_forward(x, p);
  return lif_step(state, y, lif);
}

}  // namespace sdqn
