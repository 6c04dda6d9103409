#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "descdist/tensor.hpp"

// Forward/backward kernels for the exact layer set the descriptor networks
// need. Everything is a pure function over value tensors; backward functions
// accumulate into the parameter grad buffers (which must be allocated) and
// return the gradient w.r.t. the layer input.

namespace descdist {

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
struct ConvParams {
  Tensor<T> weight;  // [C_out, C_in, k, k] (depthwise: [C, 1, k, k])
  Tensor<T> bias;    // [C_out], may be empty

  bool has_bias() const { return bias.numel() > 0; }
  std::int64_t count() const { return weight.numel() + bias.numel(); }
  void alloc_grads() {
    weight.alloc_grad();
    if (has_bias()) bias.alloc_grad();
  }
};

inline int conv_out_extent(int in, int k, int stride, int padding) {
  return (in + 2 * padding - k) / stride + 1;
}

namespace detail {

// Truncating division equals ceil for the negative numerators we see here.
inline int ceil_div(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }

// Range of output columns whose input column ow*stride + kc - padding lies in [0, W).
inline void ow_range(int w_in, int w_out, int stride, int padding, int kc, int& lo, int& hi) {
  lo = std::max(0, ceil_div(padding - kc, stride));
  hi = std::min(w_out, (w_in - 1 - kc + padding) / stride + 1);
}

}  // namespace detail

template <typename T>
inline void check_conv_args(const Tensor<T>& x, const ConvParams<T>& p, int stride, int padding,
                            bool depthwise) {
  require<ShapeError>(x.rank() == 4, "conv: input must be [N,C,H,W], got " + x.shape_str());
  require<ShapeError>(p.weight.rank() == 4, "conv: weight must be rank 4");
  require<ShapeError>(stride >= 1 && padding >= 0, "conv: bad stride/padding");
  const int c_in = x.dim(1);
  if (depthwise) {
    require<ShapeError>(p.weight.dim(0) == c_in && p.weight.dim(1) == 1,
                        "depthwise conv: expected one 3x3-style filter per input channel, got weight " +
                            p.weight.shape_str() + " for input " + x.shape_str());
  } else {
    require<ShapeError>(p.weight.dim(1) == c_in,
                        "conv: input channels (" + std::to_string(c_in) + ") do not match kernel (" +
                            std::to_string(p.weight.dim(1)) + ")");
  }
  if (p.has_bias())
    require<ShapeError>(p.bias.numel() == p.weight.dim(0), "conv: bias length mismatch");
  const int ho = conv_out_extent(x.dim(2), p.weight.dim(2), stride, padding);
  const int wo = conv_out_extent(x.dim(3), p.weight.dim(3), stride, padding);
  require<ShapeError>(ho >= 1 && wo >= 1, "conv: kernel larger than padded input");
}

// Standard cross-correlation.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvParams<T>& p, int stride, int padding) {
  check_conv_args(x, p, stride, padding, /*depthwise=*/false);
  const int n_b = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int c_out = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
  const int ho = conv_out_extent(h, kh, stride, padding);
  const int wo = conv_out_extent(w, kw, stride, padding);
  Tensor<T> y({n_b, c_out, ho, wo});
  for (int n = 0; n < n_b; ++n) {
    for (int co = 0; co < c_out; ++co) {
      T* ybase = &y.data[y.idx4(n, co, 0, 0)];
      const T b = p.has_bias() ? p.bias.data[co] : T(0);
      std::fill(ybase, ybase + static_cast<std::size_t>(ho) * wo, b);
      for (int ci = 0; ci < c_in; ++ci) {
        const T* xbase = &x.data[x.idx4(n, ci, 0, 0)];
        for (int kr = 0; kr < kh; ++kr) {
          for (int kc = 0; kc < kw; ++kc) {
            const T wv = p.weight.at4(co, ci, kr, kc);
            if (wv == T(0)) continue;
            int lo, hi;
            detail::ow_range(w, wo, stride, padding, kc, lo, hi);
            for (int oh = 0; oh < ho; ++oh) {
              const int ih = oh * stride + kr - padding;
              if (ih < 0 || ih >= h) continue;
              const T* xrow = xbase + static_cast<std::size_t>(ih) * w + (kc - padding);
              T* yrow = ybase + static_cast<std::size_t>(oh) * wo;
              if (stride == 1) {
                for (int ow = lo; ow < hi; ++ow) yrow[ow] += wv * xrow[ow];
              } else {
                for (int ow = lo; ow < hi; ++ow) yrow[ow] += wv * xrow[ow * stride];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

// Gradients w.r.t. input (returned), weights and bias (accumulated).
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, ConvParams<T>& p, int stride, int padding,
                          const Tensor<T>& dy) {
  check_conv_args(x, p, stride, padding, /*depthwise=*/false);
  p.alloc_grads();
  const int n_b = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int c_out = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
  const int ho = dy.dim(2), wo = dy.dim(3);
  require<ShapeError>(dy.dim(0) == n_b && dy.dim(1) == c_out, "conv backward: dy shape mismatch");
  Tensor<T> dx(x.shape);
  for (int n = 0; n < n_b; ++n) {
    for (int co = 0; co < c_out; ++co) {
      const T* dybase = &dy.data[dy.idx4(n, co, 0, 0)];
      if (p.has_bias()) {
        T s = 0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(ho) * wo; ++i) s += dybase[i];
        p.bias.grad[co] += s;
      }
      for (int ci = 0; ci < c_in; ++ci) {
        const T* xbase = &x.data[x.idx4(n, ci, 0, 0)];
        T* dxbase = &dx.data[dx.idx4(n, ci, 0, 0)];
        for (int kr = 0; kr < kh; ++kr) {
          for (int kc = 0; kc < kw; ++kc) {
            const T wv = p.weight.at4(co, ci, kr, kc);
            T dw = 0;
            int lo, hi;
            detail::ow_range(w, wo, stride, padding, kc, lo, hi);
            for (int oh = 0; oh < ho; ++oh) {
              const int ih = oh * stride + kr - padding;
              if (ih < 0 || ih >= h) continue;
              const std::size_t xoff = static_cast<std::size_t>(ih) * w + (kc - padding);
              const T* xrow = xbase + xoff;
              T* dxrow = dxbase + xoff;
              const T* dyrow = dybase + static_cast<std::size_t>(oh) * wo;
              for (int ow = lo; ow < hi; ++ow) {
                const T g = dyrow[ow];
                dw += g * xrow[ow * stride];
                dxrow[ow * stride] += g * wv;
              }
            }
            p.weight.grad[p.weight.idx4(co, ci, kr, kc)] += dw;
          }
        }
      }
    }
  }
  return dx;
}

// Depthwise convolution: one spatial filter per input channel.
template <typename T>
Tensor<T> depthwise_conv2d_forward(const Tensor<T>& x, const ConvParams<T>& p, int stride,
                                   int padding) {
  check_conv_args(x, p, stride, padding, /*depthwise=*/true);
  const int n_b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int kh = p.weight.dim(2), kw = p.weight.dim(3);
  const int ho = conv_out_extent(h, kh, stride, padding);
  const int wo = conv_out_extent(w, kw, stride, padding);
  Tensor<T> y({n_b, c, ho, wo});
  for (int n = 0; n < n_b; ++n) {
    for (int ci = 0; ci < c; ++ci) {
      T* ybase = &y.data[y.idx4(n, ci, 0, 0)];
      const T b = p.has_bias() ? p.bias.data[ci] : T(0);
      std::fill(ybase, ybase + static_cast<std::size_t>(ho) * wo, b);
      const T* xbase = &x.data[x.idx4(n, ci, 0, 0)];
      for (int kr = 0; kr < kh; ++kr) {
        for (int kc = 0; kc < kw; ++kc) {
          const T wv = p.weight.at4(ci, 0, kr, kc);
          int lo, hi;
          detail::ow_range(w, wo, stride, padding, kc, lo, hi);
          for (int oh = 0; oh < ho; ++oh) {
            const int ih = oh * stride + kr - padding;
            if (ih < 0 || ih >= h) continue;
            const T* xrow = xbase + static_cast<std::size_t>(ih) * w + (kc - padding);
            T* yrow = ybase + static_cast<std::size_t>(oh) * wo;
            for (int ow = lo; ow < hi; ++ow) yrow[ow] += wv * xrow[ow * stride];
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> depthwise_conv2d_backward(const Tensor<T>& x, ConvParams<T>& p, int stride, int padding,
                                    const Tensor<T>& dy) {
  check_conv_args(x, p, stride, padding, /*depthwise=*/true);
  p.alloc_grads();
  const int n_b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int kh = p.weight.dim(2), kw = p.weight.dim(3);
  const int ho = dy.dim(2), wo = dy.dim(3);
  Tensor<T> dx(x.shape);
  for (int n = 0; n < n_b; ++n) {
    for (int ci = 0; ci < c; ++ci) {
      const T* dybase = &dy.data[dy.idx4(n, ci, 0, 0)];
      if (p.has_bias()) {
        T s = 0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(ho) * wo; ++i) s += dybase[i];
        p.bias.grad[ci] += s;
      }
      const T* xbase = &x.data[x.idx4(n, ci, 0, 0)];
      T* dxbase = &dx.data[dx.idx4(n, ci, 0, 0)];
      for (int kr = 0; kr < kh; ++kr) {
        for (int kc = 0; kc < kw; ++kc) {
          const T wv = p.weight.at4(ci, 0, kr, kc);
          T dw = 0;
          int lo, hi;
          detail::ow_range(w, wo, stride, padding, kc, lo, hi);
          for (int oh = 0; oh < ho; ++oh) {
            const int ih = oh * stride + kr - padding;
            if (ih < 0 || ih >= h) continue;
            const std::size_t xoff = static_cast<std::size_t>(ih) * w + (kc - padding);
            const T* xrow = xbase + xoff;
            T* dxrow = dxbase + xoff;
            const T* dyrow = dybase + static_cast<std::size_t>(oh) * wo;
            for (int ow = lo; ow < hi; ++ow) {
              const T g = dyrow[ow];
              dw += g * xrow[ow * stride];
              dxrow[ow * stride] += g * wv;
            }
          }
          p.weight.grad[p.weight.idx4(ci, 0, kr, kc)] += dw;
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Depthwise-separable convolution: depthwise kxk followed by pointwise 1x1.

template <typename T>
struct DscParams {
  ConvParams<T> depthwise;  // [C_in, 1, k, k]
  ConvParams<T> pointwise;  // [C_out, C_in, 1, 1]

  std::int64_t count() const { return depthwise.count() + pointwise.count(); }
  void alloc_grads() {
    depthwise.alloc_grads();
    pointwise.alloc_grads();
  }
};

// mid, when given, receives the depthwise output so backward can avoid a recompute.
template <typename T>
Tensor<T> dsc_forward(const Tensor<T>& x, const DscParams<T>& p, int stride, int padding,
                      Tensor<T>* mid = nullptr) {
  Tensor<T> d = depthwise_conv2d_forward(x, p.depthwise, stride, padding);
  Tensor<T> y = conv2d_forward(d, p.pointwise, 1, 0);
  if (mid) *mid = std::move(d);
  return y;
}

template <typename T>
Tensor<T> dsc_backward(const Tensor<T>& x, const Tensor<T>& mid, DscParams<T>& p, int stride,
                       int padding, const Tensor<T>& dy) {
  Tensor<T> dmid = conv2d_backward(mid, p.pointwise, 1, 0, dy);
  return depthwise_conv2d_backward(x, p.depthwise, stride, padding, dmid);
}

// Parameter count C_in*k^2 + C_in*C_out plus biases; always below the standard
// conv count for the channel pairs the student uses.
inline std::int64_t dsc_param_count(int c_in, int c_out, int k, bool biases) {
  std::int64_t n = static_cast<std::int64_t>(c_in) * k * k + static_cast<std::int64_t>(c_in) * c_out;
  if (biases) n += c_in + c_out;
  return n;
}

inline std::int64_t conv_param_count(int c_in, int c_out, int k, bool biases) {
  std::int64_t n = static_cast<std::int64_t>(c_in) * c_out * k * k;
  if (biases) n += c_out;
  return n;
}

// ---------------------------------------------------------------------------
// Filter response normalization: per sample and channel,
// y = gamma * x / sqrt(mean_{H,W}(x^2) + eps) + beta.

template <typename T>
struct FrnParams {
  Tensor<T> gamma;  // [C]
  Tensor<T> beta;   // [C]
  T eps = T(1e-6);

  std::int64_t count() const { return gamma.numel() + beta.numel(); }
  void alloc_grads() {
    gamma.alloc_grad();
    beta.alloc_grad();
  }
};

template <typename T>
Tensor<T> frn_forward(const Tensor<T>& x, const FrnParams<T>& p) {
  require<ShapeError>(x.rank() == 4, "frn: input must be [N,C,H,W]");
  require<ShapeError>(p.gamma.numel() == x.dim(1) && p.beta.numel() == x.dim(1),
                      "frn: parameter length must equal channel count");
  require<Error>(p.eps > T(0), "frn: eps must be positive");
  const int n_b = x.dim(0), c = x.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y(x.shape);
  for (int n = 0; n < n_b; ++n) {
    for (int ci = 0; ci < c; ++ci) {
      const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
      T* yr = &y.data[y.idx4(n, ci, 0, 0)];
      T nu2 = 0;
      for (std::int64_t i = 0; i < hw; ++i) nu2 += xr[i] * xr[i];
      nu2 /= static_cast<T>(hw);
      const T inv = T(1) / std::sqrt(nu2 + p.eps);
      const T g = p.gamma.data[ci], b = p.beta.data[ci];
      for (std::int64_t i = 0; i < hw; ++i) yr[i] = g * xr[i] * inv + b;
    }
  }
  return y;
}

template <typename T>
Tensor<T> frn_backward(const Tensor<T>& x, FrnParams<T>& p, const Tensor<T>& dy) {
  check_same_shape(x, dy, "frn backward");
  p.alloc_grads();
  const int n_b = x.dim(0), c = x.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor<T> dx(x.shape);
  for (int n = 0; n < n_b; ++n) {
    for (int ci = 0; ci < c; ++ci) {
      const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
      const T* gr = &dy.data[dy.idx4(n, ci, 0, 0)];
      T* dxr = &dx.data[dx.idx4(n, ci, 0, 0)];
      T nu2 = 0;
      for (std::int64_t i = 0; i < hw; ++i) nu2 += xr[i] * xr[i];
      nu2 /= static_cast<T>(hw);
      const T inv = T(1) / std::sqrt(nu2 + p.eps);
      const T g = p.gamma.data[ci];
      T dot = 0, gsum = 0, ghat = 0;
      for (std::int64_t i = 0; i < hw; ++i) {
        dot += gr[i] * xr[i];
        gsum += gr[i];
        ghat += gr[i] * xr[i] * inv;
      }
      // d(x_i*inv)/dx_j = inv*delta_ij - x_i*x_j*inv^3/HW
      const T k = dot * inv * inv * inv / static_cast<T>(hw);
      for (std::int64_t i = 0; i < hw; ++i) dxr[i] = g * (gr[i] * inv - xr[i] * k);
      p.gamma.grad[ci] += ghat;
      p.beta.grad[ci] += gsum;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Thresholded linear unit: y = max(x, tau_c) with learnable per-channel tau.
// At x == tau the subgradient is assigned to the input branch.

template <typename T>
struct TluParams {
  Tensor<T> tau;  // [C]

  std::int64_t count() const { return tau.numel(); }
  void alloc_grads() { tau.alloc_grad(); }
};

template <typename T>
Tensor<T> tlu_forward(const Tensor<T>& x, const TluParams<T>& p) {
  require<ShapeError>(x.rank() == 4, "tlu: input must be [N,C,H,W]");
  require<ShapeError>(p.tau.numel() == x.dim(1), "tlu: tau length must equal channel count");
  const int n_b = x.dim(0), c = x.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y(x.shape);
  for (int n = 0; n < n_b; ++n) {
    for (int ci = 0; ci < c; ++ci) {
      const T t = p.tau.data[ci];
      const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
      T* yr = &y.data[y.idx4(n, ci, 0, 0)];
      for (std::int64_t i = 0; i < hw; ++i) yr[i] = xr[i] >= t ? xr[i] : t;
    }
  }
  return y;
}

template <typename T>
Tensor<T> tlu_backward(const Tensor<T>& x, TluParams<T>& p, const Tensor<T>& dy) {
  check_same_shape(x, dy, "tlu backward");
  p.alloc_grads();
  const int n_b = x.dim(0), c = x.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor<T> dx(x.shape);
  for (int n = 0; n < n_b; ++n) {
    for (int ci = 0; ci < c; ++ci) {
      const T t = p.tau.data[ci];
      const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
      const T* gr = &dy.data[dy.idx4(n, ci, 0, 0)];
      T* dxr = &dx.data[dx.idx4(n, ci, 0, 0)];
      T dtau = 0;
      for (std::int64_t i = 0; i < hw; ++i) {
        if (xr[i] >= t) {
          dxr[i] = gr[i];
        } else {
          dtau += gr[i];
        }
      }
      p.tau.grad[ci] += dtau;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Batch normalization without an affine transform (L2-Net convention for the
// layer after the final convolution). Running statistics drive inference.

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;  // [C]
  Tensor<T> running_var;   // [C], initialized to 1
  T eps = T(1e-5);
  T momentum = T(0.1);
};

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;  // per channel
};

template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, BatchNormState<T>& st, bool training,
                             BatchNormCache<T>* cache = nullptr) {
  require<ShapeError>(x.rank() == 4, "batch_norm: input must be [N,C,H,W]");
  require<ShapeError>(st.running_mean.numel() == x.dim(1) && st.running_var.numel() == x.dim(1),
                      "batch_norm: running stats length must equal channel count");
  const int n_b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t m = static_cast<std::int64_t>(n_b) * h * w;
  Tensor<T> y(x.shape);
  if (!training) {
    for (int n = 0; n < n_b; ++n)
      for (int ci = 0; ci < c; ++ci) {
        const T inv = T(1) / std::sqrt(st.running_var.data[ci] + st.eps);
        const T mu = st.running_mean.data[ci];
        const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
        T* yr = &y.data[y.idx4(n, ci, 0, 0)];
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
          yr[i] = (xr[i] - mu) * inv;
      }
    return y;
  }
  require<Error>(n_b >= 2, "batch_norm: training mode needs batch size >= 2, got " +
                               std::to_string(n_b));
  if (cache) {
    cache->xhat = Tensor<T>(x.shape);
    cache->inv_std.assign(static_cast<std::size_t>(c), T(0));
  }
  for (int ci = 0; ci < c; ++ci) {
    T mu = 0;
    for (int n = 0; n < n_b; ++n) {
      const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) mu += xr[i];
    }
    mu /= static_cast<T>(m);
    T var = 0;
    for (int n = 0; n < n_b; ++n) {
      const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
        const T d = xr[i] - mu;
        var += d * d;
      }
    }
    var /= static_cast<T>(m);
    const T inv = T(1) / std::sqrt(var + st.eps);
    for (int n = 0; n < n_b; ++n) {
      const T* xr = &x.data[x.idx4(n, ci, 0, 0)];
      T* yr = &y.data[y.idx4(n, ci, 0, 0)];
      T* hr = cache ? &cache->xhat.data[cache->xhat.idx4(n, ci, 0, 0)] : nullptr;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
        const T v = (xr[i] - mu) * inv;
        yr[i] = v;
        if (hr) hr[i] = v;
      }
    }
    if (cache) cache->inv_std[ci] = inv;
    const T unbiased = var * static_cast<T>(m) / static_cast<T>(m - 1);
    st.running_mean.data[ci] = (T(1) - st.momentum) * st.running_mean.data[ci] + st.momentum * mu;
    st.running_var.data[ci] = (T(1) - st.momentum) * st.running_var.data[ci] + st.momentum * unbiased;
  }
  return y;
}

template <typename T>
Tensor<T> batch_norm_backward(const BatchNormCache<T>& cache, const Tensor<T>& dy) {
  const Tensor<T>& xh = cache.xhat;
  check_same_shape(xh, dy, "batch_norm backward");
  const int n_b = xh.dim(0), c = xh.dim(1), h = xh.dim(2), w = xh.dim(3);
  const std::int64_t m = static_cast<std::int64_t>(n_b) * h * w;
  Tensor<T> dx(xh.shape);
  for (int ci = 0; ci < c; ++ci) {
    T gmean = 0, gdot = 0;
    for (int n = 0; n < n_b; ++n) {
      const T* gr = &dy.data[dy.idx4(n, ci, 0, 0)];
      const T* hr = &xh.data[xh.idx4(n, ci, 0, 0)];
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
        gmean += gr[i];
        gdot += gr[i] * hr[i];
      }
    }
    gmean /= static_cast<T>(m);
    gdot /= static_cast<T>(m);
    const T inv = cache.inv_std[ci];
    for (int n = 0; n < n_b; ++n) {
      const T* gr = &dy.data[dy.idx4(n, ci, 0, 0)];
      const T* hr = &xh.data[xh.idx4(n, ci, 0, 0)];
      T* dr = &dx.data[dx.idx4(n, ci, 0, 0)];
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
        dr[i] = inv * (gr[i] - gmean - hr[i] * gdot);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Row-wise L2 normalization of [N,D]; eps guards all-zero rows.

template <typename T>
Tensor<T> l2_normalize_forward(const Tensor<T>& x, std::vector<T>* norms = nullptr,
                               T eps = T(1e-12)) {
  require<ShapeError>(x.rank() == 2, "l2_normalize: input must be [N,D]");
  const int n_b = x.dim(0), d = x.dim(1);
  Tensor<T> y(x.shape);
  if (norms) norms->assign(static_cast<std::size_t>(n_b), T(0));
  for (int n = 0; n < n_b; ++n) {
    const T* xr = &x.data[x.idx2(n, 0)];
    T* yr = &y.data[y.idx2(n, 0)];
    T ssq = 0;
    for (int j = 0; j < d; ++j) ssq += xr[j] * xr[j];
    const T s = std::sqrt(ssq + eps);
    for (int j = 0; j < d; ++j) yr[j] = xr[j] / s;
    if (norms) (*norms)[static_cast<std::size_t>(n)] = s;
  }
  return y;
}

template <typename T>
Tensor<T> l2_normalize_backward(const Tensor<T>& x, const std::vector<T>& norms,
                                const Tensor<T>& dy) {
  check_same_shape(x, dy, "l2_normalize backward");
  const int n_b = x.dim(0), d = x.dim(1);
  Tensor<T> dx(x.shape);
  for (int n = 0; n < n_b; ++n) {
    const T* xr = &x.data[x.idx2(n, 0)];
    const T* gr = &dy.data[dy.idx2(n, 0)];
    T* dr = &dx.data[dx.idx2(n, 0)];
    const T s = norms[static_cast<std::size_t>(n)];
    T dot = 0;
    for (int j = 0; j < d; ++j) dot += gr[j] * xr[j];
    const T k = dot / (s * s * s);
    for (int j = 0; j < d; ++j) dr[j] = gr[j] / s - xr[j] * k;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Orthogonal initialization for conv weights, treated as a
// [C_out, C_in*k*k] matrix; the shorter side becomes orthonormal.

template <typename T>
void orthogonal_init(Tensor<T>& weight, Rng& rng) {
  const std::int64_t total = weight.numel();
  require<ShapeError>(weight.rank() >= 2 && total > 0, "orthogonal_init: need rank >= 2");
  const int rows = weight.dim(0);
  const int cols = static_cast<int>(total / rows);
  const bool by_rows = rows <= cols;
  const int nvec = by_rows ? rows : cols;
  const int len = by_rows ? cols : rows;
  std::vector<std::vector<double>> basis(static_cast<std::size_t>(nvec));
  for (int v = 0; v < nvec; ++v) {
    std::vector<double> cand(static_cast<std::size_t>(len));
    while (true) {
      for (auto& e : cand) e = rng.normal();
      // modified Gram-Schmidt against the accepted vectors
      for (int u = 0; u < v; ++u) {
        double dot = 0;
        for (int i = 0; i < len; ++i) dot += cand[i] * basis[u][i];
        for (int i = 0; i < len; ++i) cand[i] -= dot * basis[u][i];
      }
      double nrm = 0;
      for (double e : cand) nrm += e * e;
      nrm = std::sqrt(nrm);
      if (nrm > 1e-8) {
        for (auto& e : cand) e /= nrm;
        break;
      }
    }
    basis[static_cast<std::size_t>(v)] = std::move(cand);
  }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double v = by_rows ? basis[r][c] : basis[c][r];
      weight.data[static_cast<std::size_t>(r) * cols + c] = static_cast<T>(v);
    }
}

}  // namespace descdist
