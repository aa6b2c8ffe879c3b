#include "sdqn/tensor.hpp"

namespace sdqn {

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
  const auto& is = input.shape();
  const auto& ks = kernels.shape();
  if (is.size() != 3)
    throw std::invalid_argument("conv2d: input must be [C,H,W], got " + input.shape_str());
  if (ks.size() != 4)
    throw std::invalid_argument("conv2d: kernels must be [O,C,K,K], got " + kernels.shape_str());
  if (is[0] != spec.in_channels || ks[1] != spec.in_channels)
    throw std::invalid_argument("conv2d: channel mismatch, input " + input.shape_str() +
                                " kernels " + kernels.shape_str() + " spec in_channels " +
                                std::to_string(spec.in_channels));
  if (ks[0] != spec.out_channels || ks[2] != spec.kernel_size || ks[3] != spec.kernel_size)
    throw std::invalid_argument("conv2d: kernel shape " + kernels.shape_str() +
                                " inconsistent with spec");
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
  check_conv_shapes(input, kernels, spec);
  const auto& is = input.shape();
  const std::size_t C = is[0], H = is[1], W = is[2];
  const std::size_t K = spec.kernel_size, S = spec.stride, P = spec.padding;
  const std::size_t OH = spec.out_extent(H), OW = spec.out_extent(W);
  const std::size_t O = spec.out_channels;

  Tensor out({O, OH, OW});
  const double* in = input.data();
  const double* ker = kernels.data();
  double* dst = out.data();

  for (std::size_t o = 0; o < O; ++o) {
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          const double* kbase = ker + ((o * C + c) * K) * K;
          const double* ibase = in + c * H * W;
          for (std::size_t p = 0; p < K; ++p) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * S + p) -
                                     static_cast<std::ptrdiff_t>(P);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t q = 0; q < K; ++q) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * S + q) -
                                       static_cast<std::ptrdiff_t>(P);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += ibase[y * static_cast<std::ptrdiff_t>(W) + x] * kbase[p * K + q];
            }
          }
        }
        dst[(o * OH + i) * OW + j] = acc;
      }
    }
  }
  return out;
}

std::pair<Tensor, Tensor> conv2d_backward(const Tensor& grad_out, const Tensor& input,
                                          const Tensor& kernels, const ConvSpec& spec) {
  check_conv_shapes(input, kernels, spec);
  const auto& is = input.shape();
  const std::size_t C = is[0], H = is[1], W = is[2];
  const std::size_t K = spec.kernel_size, S = spec.stride, P = spec.padding;
  const std::size_t OH = spec.out_extent(H), OW = spec.out_extent(W);
  const std::size_t O = spec.out_channels;

  const auto& gs = grad_out.shape();
  if (gs.size() != 3 || gs[0] != O || gs[1] != OH || gs[2] != OW)
    throw std::invalid_argument("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                                " does not match forward output [" + std::to_string(O) + "," +
                                std::to_string(OH) + "," + std::to_string(OW) + "]");

  Tensor grad_input(input.shape());
  Tensor grad_kernels(kernels.shape());
  const double* g = grad_out.data();
  const double* in = input.data();
  const double* ker = kernels.data();
  double* gin = grad_input.data();
  double* gker = grad_kernels.data();

  for (std::size_t o = 0; o < O; ++o) {
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        const double gv = g[(o * OH + i) * OW + j];
        if (gv == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t kbase = ((o * C + c) * K) * K;
          const std::size_t ibase = c * H * W;
          for (std::size_t p = 0; p < K; ++p) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * S + p) -
                                     static_cast<std::ptrdiff_t>(P);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t q = 0; q < K; ++q) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * S + q) -
                                       static_cast<std::ptrdiff_t>(P);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(W)) continue;
              const std::size_t ii = ibase + static_cast<std::size_t>(y) * W +
                                     static_cast<std::size_t>(x);
              gin[ii] += gv * ker[kbase + p * K + q];
              gker[kbase + p * K + q] += gv * in[ii];
            }
          }
        }
      }
    }
  }
  return {std::move(grad_input), std::move(grad_kernels)};
}

Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& kernels, const ConvSpec& spec,
                         const std::vector<std::size_t>& input_shape) {
  if (input_shape.size() != 3)
    throw std::invalid_argument("conv2d_input_grad: input_shape must be [C,H,W]");
  const std::size_t C = input_shape[0], H = input_shape[1], W = input_shape[2];
  const std::size_t K = spec.kernel_size, S = spec.stride, P = spec.padding;
  const std::size_t OH = spec.out_extent(H), OW = spec.out_extent(W);
  const std::size_t O = spec.out_channels;
  const auto& gs = grad_out.shape();
  if (gs.size() != 3 || gs[0] != O || gs[1] != OH || gs[2] != OW)
    throw std::invalid_argument("conv2d_input_grad: grad_out shape " + grad_out.shape_str() +
                                " inconsistent with spec");

  Tensor grad_input(input_shape);
  const double* g = grad_out.data();
  const double* ker = kernels.data();
  double* gin = grad_input.data();
  for (std::size_t o = 0; o < O; ++o) {
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        const double gv = g[(o * OH + i) * OW + j];
        if (gv == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t kbase = ((o * C + c) * K) * K;
          const std::size_t ibase = c * H * W;
          for (std::size_t p = 0; p < K; ++p) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * S + p) -
                                     static_cast<std::ptrdiff_t>(P);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
            double* row = gin + ibase + static_cast<std::size_t>(y) * W;
            const double* krow = ker + kbase + p * K;
            for (std::size_t q = 0; q < K; ++q) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * S + q) -
                                       static_cast<std::ptrdiff_t>(P);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(W)) continue;
              row[x] += gv * krow[q];
            }
          }
        }
      }
    }
  }
  return grad_input;
}

Tensor linear_input_grad(const Tensor& grad_out, const Tensor& weights) {
  const std::size_t M = weights.shape()[0], N = weights.shape()[1];
  if (grad_out.numel() != M)
    throw std::invalid_argument("linear_input_grad: grad_out length " +
                                std::to_string(grad_out.numel()) + " does not match weights " +
                                weights.shape_str());
  Tensor grad_input({N});
  const double* g = grad_out.data();
  const double* w = weights.data();
  double* gin = grad_input.data();
  for (std::size_t m = 0; m < M; ++m) {
    const double gv = g[m];
    if (gv == 0.0) continue;
    const double* row = w + m * N;
    for (std::size_t n = 0; n < N; ++n) gin[n] += gv * row[n];
  }
  return grad_input;
}

Tensor linear_forward(const Tensor& input, const Tensor& weights) {
  const auto& ws = weights.shape();
  if (ws.size() != 2)
    throw std::invalid_argument("linear: weights must be [M,N], got " + weights.shape_str());
  if (input.numel() != ws[1])
    throw std::invalid_argument("linear: input length " + std::to_string(input.numel()) +
                                " does not match weights " + weights.shape_str());
  const std::size_t M = ws[0], N = ws[1];
  Tensor out({M});
  const double* in = input.data();
  const double* w = weights.data();
  for (std::size_t m = 0; m < M; ++m) {
    double acc = 0.0;
    const double* row = w + m * N;
    for (std::size_t n = 0; n < N; ++n) acc += row[n] * in[n];
    out[m] = acc;
  }
  return out;
}

std::pair<Tensor, Tensor> linear_backward(const Tensor& grad_out, const Tensor& input,
                                          const Tensor& weights) {
  const auto& ws = weights.shape();
  if (ws.size() != 2 || input.numel() != ws[1])
    throw std::invalid_argument("linear_backward: shape mismatch, input " + input.shape_str() +
                                " weights " + weights.shape_str());
  if (grad_out.numel() != ws[0])
    throw std::invalid_argument("linear_backward: grad_out length " +
                                std::to_string(grad_out.numel()) + " does not match weights " +
                                weights.shape_str());
  const std::size_t M = ws[0], N = ws[1];
  Tensor grad_input(input.shape());
  Tensor grad_weights(weights.shape());
  const double* g = grad_out.data();
  const double* in = input.data();
  const double* w = weights.data();
  double* gin = grad_input.data();
  double* gw = grad_weights.data();
  for (std::size_t m = 0; m < M; ++m) {
    const double gv = g[m];
    if (gv == 0.0) continue;
    const double* row = w + m * N;
    double* grow = gw + m * N;
    for (std::size_t n = 0; n < N; ++n) {
      gin[n] += gv * row[n];
      grow[n] += gv * in[n];
    }
  }
  return {std::move(grad_input), std::move(grad_weights)};
}

std::pair<double, double> mean_and_variance(const Tensor& x) {
  if (x.empty()) throw std::invalid_argument("mean_and_variance: empty tensor");
  const std::size_t n = x.numel();
  const double* v = x.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += v[i];
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - mean;
    sq += d * d;
  }
  return {mean, sq / static_cast<double>(n)};
}

Tensor conv2d_forward_sparse(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
  check_conv_shapes(input, kernels, spec);
  const auto& is = input.shape();
  const std::size_t C = is[0], H = is[1], W = is[2];
  const std::size_t K = spec.kernel_size, S = spec.stride, P = spec.padding;
  const std::size_t OH = spec.out_extent(H), OW = spec.out_extent(W);
  const std::size_t O = spec.out_channels;

  Tensor out({O, OH, OW});
  const double* in = input.data();
  const double* ker = kernels.data();
  double* dst = out.data();

  // Scatter each active input site into every output it contributes to.
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double v = in[(c * H + y) * W + x];
        if (v == 0.0) continue;
        // Output rows i with i*S <= y+P <= i*S+K-1.
        const std::size_t yp = y + P, xp = x + P;
        const std::size_t i_lo = (yp >= K - 1) ? (yp - (K - 1) + S - 1) / S : 0;
        const std::size_t j_lo = (xp >= K - 1) ? (xp - (K - 1) + S - 1) / S : 0;
        for (std::size_t i = i_lo; i < OH && i * S <= yp; ++i) {
          const std::size_t p = yp - i * S;
          for (std::size_t j = j_lo; j < OW && j * S <= xp; ++j) {
            const std::size_t q = xp - j * S;
            for (std::size_t o = 0; o < O; ++o)
              dst[(o * OH + i) * OW + j] += v * ker[(((o * C + c) * K) + p) * K + q];
          }
        }
      }
    }
  }
  return out;
}

Tensor linear_forward_sparse(const Tensor& input, const Tensor& weights) {
  const auto& ws = weights.shape();
  if (ws.size() != 2 || input.numel() != ws[1])
    throw std::invalid_argument("linear_forward_sparse: shape mismatch, input " +
                                input.shape_str() + " weights " + weights.shape_str());
  const std::size_t M = ws[0], N = ws[1];
  Tensor out({M});
  const double* in = input.data();
  const double* w = weights.data();
  double* dst = out.data();
  for (std::size_t n = 0; n < N; ++n) {
    const double v = in[n];
    if (v == 0.0) continue;
    for (std::size_t m = 0; m < M; ++m) dst[m] += v * w[m * N + n];
  }
  return out;
}

void conv2d_kernel_grad_sparse(const Tensor& grad_out, const Tensor& input,
                               const ConvSpec& spec, Tensor& grad_kernels) {
  const auto& is = input.shape();
  const std::size_t C = is[0], H = is[1], W = is[2];
  const std::size_t K = spec.kernel_size, S = spec.stride, P = spec.padding;
  const std::size_t OH = spec.out_extent(H), OW = spec.out_extent(W);
  const std::size_t O = spec.out_channels;
  const double* g = grad_out.data();
  const double* in = input.data();
  double* gker = grad_kernels.data();

  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double v = in[(c * H + y) * W + x];
        if (v == 0.0) continue;
        const std::size_t yp = y + P, xp = x + P;
        const std::size_t i_lo = (yp >= K - 1) ? (yp - (K - 1) + S - 1) / S : 0;
        const std::size_t j_lo = (xp >= K - 1) ? (xp - (K - 1) + S - 1) / S : 0;
        for (std::size_t i = i_lo; i < OH && i * S <= yp; ++i) {
          const std::size_t p = yp - i * S;
          for (std::size_t j = j_lo; j < OW && j * S <= xp; ++j) {
            const std::size_t q = xp - j * S;
            for (std::size_t o = 0; o < O; ++o)
              gker[(((o * C + c) * K) + p) * K + q] += v * g[(o * OH + i) * OW + j];
          }
        }
      }
    }
  }
}

void linear_weight_grad_sparse(const Tensor& grad_out, const Tensor& input,
                               Tensor& grad_weights) {
  const std::size_t M = grad_weights.shape()[0], N = grad_weights.shape()[1];
  const double* g = grad_out.data();
  const double* in = input.data();
  double* gw = grad_weights.data();
  for (std::size_t n = 0; n < N; ++n) {
    const double v = in[n];
    if (v == 0.0) continue;
    for (std::size_t m = 0; m < M; ++m) gw[m * N + n] += v * g[m];
  }
}

}  // namespace sdqn
