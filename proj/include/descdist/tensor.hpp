#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "descdist/errors.hpp"
#include "descdist/rng.hpp"

namespace descdist {

// Dense row-major value array with an optional gradient buffer of the same
// shape. Activations travel through the network as Tensor<float>; gradient
// checks instantiate the same code with double.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until alloc_grad(); same length as data otherwise

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    require<ShapeError>(static_cast<std::int64_t>(data.size()) == numel_of(shape),
                        "tensor data length does not match shape");
  }

  static std::int64_t numel_of(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int e : s) {
      require<ShapeError>(e >= 0, "negative tensor extent");
      n *= e;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool has_grad() const { return !grad.empty(); }
  void alloc_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (has_grad()) std::fill(grad.begin(), grad.end(), T(0));
  }
  void drop_grad() { grad.clear(); }

  // Flat offset for a [N,C,H,W] tensor.
  std::size_t idx4(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w;
  }
  T& at4(int n, int c, int h, int w) { return data[idx4(n, c, h, w)]; }
  T at4(int n, int c, int h, int w) const { return data[idx4(n, c, h, w)]; }

  // Flat offset for a [N,D] tensor.
  std::size_t idx2(int i, int j) const { return static_cast<std::size_t>(i) * shape[1] + j; }
  T& at2(int i, int j) { return data[idx2(i, j)]; }
  T at2(int i, int j) const { return data[idx2(i, j)]; }

  void fill_normal(Rng& rng, double stddev = 1.0) {
    for (auto& v : data) v = static_cast<T>(rng.normal() * stddev);
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
inline bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape == b.shape;
}

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  require<ShapeError>(same_shape(a, b),
                      std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Stack two [N,...] tensors along the batch dimension.
template <typename T>
inline Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  require<ShapeError>(a.rank() == b.rank() && a.rank() >= 1, "concat_batch: rank mismatch");
  for (int i = 1; i < a.rank(); ++i)
    require<ShapeError>(a.dim(i) == b.dim(i), "concat_batch: trailing dims differ");
  std::vector<int> s = a.shape;
  s[0] = a.dim(0) + b.dim(0);
  Tensor<T> out(std::move(s));
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());
  return out;
}

// Rows [begin, end) of a [N,...] tensor.
template <typename T>
inline Tensor<T> slice_batch(const Tensor<T>& x, int begin, int end) {
  require<ShapeError>(x.rank() >= 1 && begin >= 0 && end <= x.dim(0) && begin <= end,
                      "slice_batch: bad range");
  std::vector<int> s = x.shape;
  s[0] = end - begin;
  const std::int64_t row = x.dim(0) > 0 ? x.numel() / x.dim(0) : 0;
  Tensor<T> out(std::move(s));
  std::copy(x.data.begin() + begin * row, x.data.begin() + end * row, out.data.begin());
  return out;
}

}  // namespace descdist
