#include "descdist/layers.hpp"

#include <cmath>

#include "doctest.h"
#include "grad_check.hpp"

using namespace descdist;
using gradcheck::Result;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.normal() * scale);
  return t;
}

ConvParams<double> random_conv_params(int c_out, int c_in, int k, Rng& rng) {
  ConvParams<double> p;
  p.weight = random_tensor<double>({c_out, c_in, k, k}, rng, 0.5);
  p.bias = random_tensor<double>({c_out}, rng, 0.2);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("layers");

TEST_CASE("conv2d with a centered identity kernel is an exact identity map") {
  Rng rng(11);
  Tensor<float> x = random_tensor<float>({2, 3, 6, 6}, rng);
  ConvParams<float> p;
  p.weight = Tensor<float>({3, 3, 3, 3});
  for (int c = 0; c < 3; ++c) p.weight.at4(c, c, 1, 1) = 1.0f;
  const Tensor<float> y = conv2d_forward(x, p, 1, 1);
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("conv2d with all-zero weights emits the bias everywhere") {
  Rng rng(12);
  Tensor<float> x = random_tensor<float>({1, 2, 5, 5}, rng);
  ConvParams<float> p;
  p.weight = Tensor<float>({4, 2, 3, 3});
  p.bias = Tensor<float>({4});
  for (int c = 0; c < 4; ++c) p.bias.data[c] = 0.5f * (c + 1);
  const Tensor<float> y = conv2d_forward(x, p, 1, 1);
  for (int c = 0; c < 4; ++c)
    for (int h = 0; h < 5; ++h)
      for (int w = 0; w < 5; ++w) CHECK(y.at4(0, c, h, w) == 0.5f * (c + 1));
}

TEST_CASE("conv2d rejects mismatched input channels") {
  Rng rng(13);
  Tensor<float> x = random_tensor<float>({1, 2, 5, 5}, rng);
  ConvParams<float> p;
  p.weight = Tensor<float>({4, 3, 3, 3});
  CHECK_THROWS_AS(conv2d_forward(x, p, 1, 1), ShapeError);
}

TEST_CASE("conv2d output extents follow stride and padding") {
  Rng rng(14);
  Tensor<float> x = random_tensor<float>({1, 1, 32, 32}, rng);
  ConvParams<float> p;
  p.weight = Tensor<float>({1, 1, 3, 3});
  CHECK(conv2d_forward(x, p, 1, 1).dim(2) == 32);
  CHECK(conv2d_forward(x, p, 2, 1).dim(2) == 16);
  ConvParams<float> head;
  head.weight = Tensor<float>({5, 1, 8, 8});
  Tensor<float> x8 = random_tensor<float>({1, 1, 8, 8}, rng);
  const Tensor<float> y = conv2d_forward(x8, head, 1, 0);
  CHECK(y.dim(2) == 1);
  CHECK(y.dim(3) == 1);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(15);
  Result input_res, weight_res, bias_res;
  for (int inst = 0; inst < 10; ++inst) {
    Tensor<double> x = random_tensor<double>({1, 2, 4, 4}, rng);
    ConvParams<double> p = random_conv_params(3, 2, 3, rng);
    const int stride = inst % 2 ? 2 : 1;
    const Tensor<double> y0 = conv2d_forward(x, p, stride, 1);
    const Tensor<double> c = gradcheck::random_cotangent(y0.shape, rng);
    auto eval = [&] { return gradcheck::weighted_sum(conv2d_forward(x, p, stride, 1), c); };

    ConvParams<double>& pm = p;
    pm.weight.alloc_grad();
    pm.bias.alloc_grad();
    pm.weight.zero_grad();
    pm.bias.zero_grad();
    const Tensor<double> dx = conv2d_backward(x, pm, stride, 1, c);
    input_res.merge(gradcheck::compare(eval, x, dx.data));
    weight_res.merge(gradcheck::compare(eval, p.weight, p.weight.grad));
    bias_res.merge(gradcheck::compare(eval, p.bias, p.bias.grad));
  }
  CHECK(input_res.ok());
  CHECK(weight_res.ok());
  CHECK(bias_res.ok());
}

TEST_CASE("depthwise separable conv composed of identity stages is an identity") {
  Rng rng(16);
  Tensor<float> x = random_tensor<float>({2, 4, 6, 6}, rng);
  DscParams<float> p;
  p.depthwise.weight = Tensor<float>({4, 1, 3, 3});
  for (int c = 0; c < 4; ++c) p.depthwise.weight.at4(c, 0, 1, 1) = 1.0f;
  p.pointwise.weight = Tensor<float>({4, 4, 1, 1});
  for (int c = 0; c < 4; ++c) p.pointwise.weight.at4(c, c, 0, 0) = 1.0f;
  const Tensor<float> y = dsc_forward(x, p, 1, 1);
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("depthwise separable parameter count formula") {
  // 8 channels in, 16 out, 3x3, with both bias vectors
  CHECK(dsc_param_count(8, 16, 3, true) == 8 * 9 + 8 + 8 * 16 + 16);
  CHECK(dsc_param_count(8, 16, 3, true) == 224);
  // always lighter than the standard conv for the student's channel pairs
  for (const auto [ci, co] : {std::pair{32, 64}, {64, 64}, {64, 128}, {128, 128}})
    CHECK(dsc_param_count(ci, co, 3, true) < conv_param_count(ci, co, 3, true));
}

TEST_CASE("depthwise conv rejects filter count not matching channels") {
  Rng rng(17);
  Tensor<float> x = random_tensor<float>({1, 4, 5, 5}, rng);
  ConvParams<float> p;
  p.weight = Tensor<float>({3, 1, 3, 3});
  CHECK_THROWS_AS(depthwise_conv2d_forward(x, p, 1, 1), ShapeError);
}

TEST_CASE("depthwise separable conv gradients match finite differences") {
  Rng rng(18);
  Result res;
  for (int inst = 0; inst < 10; ++inst) {
    Tensor<double> x = random_tensor<double>({1, 3, 4, 4}, rng);
    DscParams<double> p;
    p.depthwise.weight = random_tensor<double>({3, 1, 3, 3}, rng, 0.5);
    p.depthwise.bias = random_tensor<double>({3}, rng, 0.2);
    p.pointwise.weight = random_tensor<double>({5, 3, 1, 1}, rng, 0.5);
    p.pointwise.bias = random_tensor<double>({5}, rng, 0.2);
    const int stride = inst % 2 ? 2 : 1;
    Tensor<double> mid;
    const Tensor<double> y0 = dsc_forward(x, p, stride, 1, &mid);
    const Tensor<double> c = gradcheck::random_cotangent(y0.shape, rng);
    auto eval = [&] { return gradcheck::weighted_sum(dsc_forward(x, p, stride, 1), c); };

    p.alloc_grads();
    const Tensor<double> dx = dsc_backward(x, mid, p, stride, 1, c);
    res.merge(gradcheck::compare(eval, x, dx.data));
    res.merge(gradcheck::compare(eval, p.depthwise.weight, p.depthwise.weight.grad));
    res.merge(gradcheck::compare(eval, p.pointwise.weight, p.pointwise.weight.grad));
    res.merge(gradcheck::compare(eval, p.pointwise.bias, p.pointwise.bias.grad));
  }
  CHECK(res.ok());
}

TEST_CASE("frn keeps constant positive input at one with unit gamma") {
  FrnParams<float> p;
  p.gamma = Tensor<float>({2});
  p.beta = Tensor<float>({2});
  p.gamma.data = {1.0f, 1.0f};
  p.eps = 1e-12f;
  Tensor<float> x({1, 2, 4, 4});
  std::fill(x.data.begin(), x.data.end(), 3.7f);
  const Tensor<float> y = frn_forward(x, p);
  for (float v : y.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("frn with zero gamma reduces to broadcast beta") {
  Rng rng(19);
  FrnParams<float> p;
  p.gamma = Tensor<float>({3});
  p.beta = Tensor<float>({3});
  p.beta.data = {0.5f, -1.0f, 2.0f};
  Tensor<float> x = random_tensor<float>({2, 3, 4, 4}, rng);
  const Tensor<float> y = frn_forward(x, p);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) CHECK(y.at4(n, c, h, w) == p.beta.data[c]);
}

TEST_CASE("frn gradients match finite differences") {
  Rng rng(20);
  Result res;
  for (int inst = 0; inst < 10; ++inst) {
    Tensor<double> x = random_tensor<double>({2, 2, 3, 3}, rng);
    FrnParams<double> p;
    p.gamma = random_tensor<double>({2}, rng, 0.5);
    p.beta = random_tensor<double>({2}, rng, 0.5);
    p.eps = 1e-6;
    const Tensor<double> c = gradcheck::random_cotangent(x.shape, rng);
    auto eval = [&] { return gradcheck::weighted_sum(frn_forward(x, p), c); };
    p.alloc_grads();
    const Tensor<double> dx = frn_backward(x, p, c);
    res.merge(gradcheck::compare(eval, x, dx.data));
    res.merge(gradcheck::compare(eval, p.gamma, p.gamma.grad));
    res.merge(gradcheck::compare(eval, p.beta, p.beta.grad));
  }
  CHECK(res.ok());
}

TEST_CASE("tlu with zero threshold equals relu") {
  Rng rng(21);
  TluParams<float> p;
  p.tau = Tensor<float>({3});
  Tensor<float> x = random_tensor<float>({2, 3, 4, 4}, rng);
  const Tensor<float> y = tlu_forward(x, p);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == std::max(x.data[i], 0.0f));
}

TEST_CASE("tlu clamps everything below tau to tau") {
  TluParams<float> p;
  p.tau = Tensor<float>({1});
  p.tau.data[0] = 2.5f;
  Tensor<float> x({1, 1, 2, 2});
  x.data = {-1.0f, 0.0f, 1.0f, 2.0f};
  const Tensor<float> y = tlu_forward(x, p);
  for (float v : y.data) CHECK(v == 2.5f);
}

TEST_CASE("tlu gradients match finite differences away from ties") {
  Rng rng(22);
  Result res;
  for (int inst = 0; inst < 10; ++inst) {
    TluParams<double> p;
    p.tau = random_tensor<double>({2}, rng, 0.3);
    Tensor<double> x({1, 2, 3, 3});
    for (int c = 0; c < 2; ++c)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 3; ++w) {
          double v;
          do {
            v = rng.normal();
          } while (std::abs(v - p.tau.data[c]) < 1e-2);
          x.at4(0, c, h, w) = v;
        }
    const Tensor<double> c = gradcheck::random_cotangent(x.shape, rng);
    auto eval = [&] { return gradcheck::weighted_sum(tlu_forward(x, p), c); };
    p.alloc_grads();
    const Tensor<double> dx = tlu_backward(x, p, c);
    res.merge(gradcheck::compare(eval, x, dx.data));
    res.merge(gradcheck::compare(eval, p.tau, p.tau.grad));
  }
  CHECK(res.ok());
}

TEST_CASE("batch norm training output has zero mean and unit variance per channel") {
  Rng rng(23);
  Tensor<float> x = random_tensor<float>({8, 3, 2, 2}, rng, 2.0);
  BatchNormState<float> st;
  st.running_mean = Tensor<float>({3});
  st.running_var = Tensor<float>({3});
  std::fill(st.running_var.data.begin(), st.running_var.data.end(), 1.0f);
  const Tensor<float> y = batch_norm_forward(x, st, /*training=*/true);
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    const int m = 8 * 2 * 2;
    for (int n = 0; n < 8; ++n)
      for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 2; ++w) mean += y.at4(n, c, h, w);
    mean /= m;
    for (int n = 0; n < 8; ++n)
      for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 2; ++w) {
          const double d = y.at4(n, c, h, w) - mean;
          var += d * d;
        }
    var /= m;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("batch norm maps a zero-variance batch to zeros") {
  Tensor<float> x({4, 1, 1, 1});
  std::fill(x.data.begin(), x.data.end(), 2.0f);
  BatchNormState<float> st;
  st.running_mean = Tensor<float>({1});
  st.running_var = Tensor<float>({1});
  st.running_var.data[0] = 1.0f;
  const Tensor<float> y = batch_norm_forward(x, st, true);
  for (float v : y.data) CHECK(v == 0.0f);
}

TEST_CASE("batch norm refuses training on a batch of one") {
  Tensor<float> x({1, 2, 1, 1});
  BatchNormState<float> st;
  st.running_mean = Tensor<float>({2});
  st.running_var = Tensor<float>({2});
  CHECK_THROWS(batch_norm_forward(x, st, true));
  CHECK_NOTHROW(batch_norm_forward(x, st, false));
}

TEST_CASE("batch norm gradients match finite differences") {
  Rng rng(24);
  Result res;
  for (int inst = 0; inst < 10; ++inst) {
    Tensor<double> x = random_tensor<double>({5, 2, 2, 2}, rng);
    const Tensor<double> c = gradcheck::random_cotangent(x.shape, rng);
    auto eval = [&] {
      BatchNormState<double> st;
      st.running_mean = Tensor<double>({2});
      st.running_var = Tensor<double>({2});
      return gradcheck::weighted_sum(batch_norm_forward(x, st, true), c);
    };
    BatchNormState<double> st;
    st.running_mean = Tensor<double>({2});
    st.running_var = Tensor<double>({2});
    BatchNormCache<double> cache;
    batch_norm_forward(x, st, true, &cache);
    const Tensor<double> dx = batch_norm_backward(cache, c);
    res.merge(gradcheck::compare(eval, x, dx.data));
  }
  CHECK(res.ok());
}

TEST_CASE("l2 normalize maps (3,4) to (0.6,0.8) and keeps unit rows fixed") {
  Tensor<float> x({2, 2});
  x.data = {3.0f, 4.0f, 0.6f, 0.8f};
  const Tensor<float> y = l2_normalize_forward(x);
  CHECK(y.at2(0, 0) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(y.at2(0, 1) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(y.at2(1, 0) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(y.at2(1, 1) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("l2 normalize produces unit rows for random nonzero input") {
  Rng rng(25);
  Tensor<float> x = random_tensor<float>({32, 17}, rng, 3.0);
  const Tensor<float> y = l2_normalize_forward(x);
  for (int n = 0; n < 32; ++n) {
    double ssq = 0;
    for (int j = 0; j < 17; ++j) ssq += static_cast<double>(y.at2(n, j)) * y.at2(n, j);
    CHECK(std::abs(std::sqrt(ssq) - 1.0) < 1e-6);
  }
}

TEST_CASE("l2 normalize gradients match finite differences") {
  Rng rng(26);
  Result res;
  for (int inst = 0; inst < 10; ++inst) {
    Tensor<double> x = random_tensor<double>({3, 6}, rng);
    const Tensor<double> c = gradcheck::random_cotangent(x.shape, rng);
    auto eval = [&] { return gradcheck::weighted_sum(l2_normalize_forward(x), c); };
    std::vector<double> norms;
    l2_normalize_forward(x, &norms);
    const Tensor<double> dx = l2_normalize_backward(x, norms, c);
    res.merge(gradcheck::compare(eval, x, dx.data));
  }
  CHECK(res.ok());
}

TEST_CASE("orthogonal init yields orthonormal rows or columns") {
  Rng rng(27);
  Tensor<double> w({4, 2, 3, 3});  // 4 rows x 18 cols: orthonormal rows
  orthogonal_init(w, rng);
  for (int r1 = 0; r1 < 4; ++r1)
    for (int r2 = 0; r2 <= r1; ++r2) {
      double dot = 0;
      for (int c = 0; c < 18; ++c) dot += w.data[r1 * 18 + c] * w.data[r2 * 18 + c];
      CHECK(dot == doctest::Approx(r1 == r2 ? 1.0 : 0.0).epsilon(1e-9));
    }
  Tensor<double> tall({32, 1, 3, 3});  // 32 rows x 9 cols: orthonormal columns
  orthogonal_init(tall, rng);
  for (int c1 = 0; c1 < 9; ++c1)
    for (int c2 = 0; c2 <= c1; ++c2) {
      double dot = 0;
      for (int r = 0; r < 32; ++r) dot += tall.data[r * 9 + c1] * tall.data[r * 9 + c2];
      CHECK(dot == doctest::Approx(c1 == c2 ? 1.0 : 0.0).epsilon(1e-9));
    }
}

TEST_SUITE_END();
