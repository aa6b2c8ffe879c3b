#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Dense row-major tensor kernels with explicit backward passes. Everything is
// 64-bit and every reduction runs in a fixed left-to-right order so repeated
// runs are bitwise identical.

namespace sdqn {

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_numel(shape_))
      throw std::invalid_argument("Tensor: data length " +
                                  std::to_string(data_.size()) +
                                  " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double v) { return Tensor(std::move(shape), v); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 3-axis access for [C,H,W] tensors.
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }
  std::string shape_str() const { return shape_str(shape_); }

 private:
  static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 4)
      throw std::invalid_argument("Tensor: rank must be 1..4, got " + shape_str(shape));
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_str(shape));
      n *= e;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_extent(std::size_t in) const {
    const std::size_t padded = in + 2 * padding;
    if (padded < kernel_size)
      throw std::invalid_argument("ConvSpec: kernel " + std::to_string(kernel_size) +
                                  " larger than padded input " + std::to_string(padded));
    return (padded - kernel_size) / stride + 1;
  }
};

// Cross-correlation (machine-learning convention): no kernel flip.
// input [C,H,W], kernels [O,C,K,K] -> [O,H',W'].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const ConvSpec& spec);

// Exact adjoints of conv2d_forward as a linear map in (input, kernels).
std::pair<Tensor, Tensor> conv2d_backward(const Tensor& grad_out, const Tensor& input,
                                          const Tensor& kernels, const ConvSpec& spec);

// Input adjoint only (the kernel half is handled by the sparse variant below
// in the training loop).
Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& kernels, const ConvSpec& spec,
                         const std::vector<std::size_t>& input_shape);
Tensor linear_input_grad(const Tensor& grad_out, const Tensor& weights);

// out[m] = sum_n weights[m,n] * input[n]; no bias term.
Tensor linear_forward(const Tensor& input, const Tensor& weights);

std::pair<Tensor, Tensor> linear_backward(const Tensor& grad_out, const Tensor& input,
                                          const Tensor& weights);

// Population mean/variance over all elements, sequential summation.
std::pair<double, double> mean_and_variance(const Tensor& x);

// Sparse fast paths. Mathematically the same maps as the dense kernels, but
// they walk only the nonzero input sites, so the floating-point accumulation
// order differs (input-determined, still deterministic). Spike tensors and
// desk-scale pixel frames are both mostly zero, which is where the training
// loop spends its time.
Tensor conv2d_forward_sparse(const Tensor& input, const Tensor& kernels, const ConvSpec& spec);
Tensor linear_forward_sparse(const Tensor& input, const Tensor& weights);
void conv2d_kernel_grad_sparse(const Tensor& grad_out, const Tensor& input,
                               const ConvSpec& spec, Tensor& grad_kernels);
void linear_weight_grad_sparse(const Tensor& grad_out, const Tensor& input, Tensor& grad_weights);

}  // namespace sdqn
