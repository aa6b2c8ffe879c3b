#pragma once

#include <cmath>
#include <functional>

#include "sdqn/rng.hpp"
#include "sdqn/tensor.hpp"

// Shared test helpers: random tensors and the central finite-difference
// oracle used to check every analytic backward pass.

namespace sdqn::test {

inline Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_binary(const std::vector<std::size_t>& shape, Rng& rng, double p = 0.3) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.bernoulli(p) ? 1.0 : 0.0;
  return t;
}

// Central finite differences of a scalar functional with respect to each
// element of x.
inline Tensor fd_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                      double step = 1e-5) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double hi = f(probe);
    probe[i] = orig - step;
    const double lo = f(probe);
    probe[i] = orig;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

inline double max_rel_err(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

}  // namespace sdqn::test
