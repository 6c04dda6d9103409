#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "descdist/tensor.hpp"

namespace descdist {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moment accumulators.
template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;
};

// Standard Adam update with bias correction. Reads param.grad, writes
// param.data, advances the step counter.
template <typename T>
void adam_step(Tensor<T>& param, AdamState<T>& state, const AdamConfig& cfg) {
  require<ShapeError>(param.has_grad(), "adam_step: parameter has no gradient buffer");
  const std::size_t n = param.data.size();
  if (state.m.empty()) {
    state.m.assign(n, T(0));
    state.v.assign(n, T(0));
  }
  require<ShapeError>(state.m.size() == n && state.v.size() == n,
                      "adam_step: moment buffers do not match parameter shape");
  state.step += 1;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T c2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < n; ++i) {
    const T g = param.grad[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T mhat = state.m[i] / c1;
    const T vhat = state.v[i] / c2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace descdist
