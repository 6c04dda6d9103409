#include "descdist/adam.hpp"

#include <cmath>

#include "doctest.h"

using namespace descdist;

TEST_SUITE_BEGIN("adam");

TEST_CASE("zero gradient leaves parameters unchanged") {
  Tensor<double> p({4});
  p.data = {1.0, -2.0, 0.5, 3.0};
  p.alloc_grad();
  const auto before = p.data;
  AdamState<double> st;
  AdamConfig cfg;
  for (int i = 0; i < 5; ++i) adam_step(p, st, cfg);
  CHECK(p.data == before);
  CHECK(st.step == 5);
}

TEST_CASE("first step moves by about -lr * sign(g)") {
  Tensor<double> p({3});
  p.data = {0.0, 0.0, 0.0};
  p.alloc_grad();
  p.grad = {2.0, -0.003, 15.0};
  AdamState<double> st;
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(p, st, cfg);
  // bias-corrected first step: delta = -lr * g / (|g| + eps') ~= -lr * sign(g)
  CHECK(p.data[0] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(p.data[1] == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(p.data[2] == doctest::Approx(-0.01).epsilon(1e-4));
}

TEST_CASE("ten steps on a scalar quadratic match an independent reference") {
  // minimize f(x) = 0.5 * (x - 3)^2 starting from 0
  AdamConfig cfg;
  cfg.lr = 0.1;
  Tensor<double> p({1});
  p.alloc_grad();
  AdamState<double> st;
  // reference Adam written out longhand
  double x = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10; ++t) {
    const double g = x - 3.0;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    x -= cfg.lr * mhat / (std::sqrt(vhat) + 1e-8);

    p.grad[0] = p.data[0] - 3.0;
    adam_step(p, st, cfg);
    CHECK(p.data[0] == doctest::Approx(x).epsilon(1e-10));
  }
}

TEST_CASE("moment buffers must match the parameter shape") {
  Tensor<double> p({3});
  p.alloc_grad();
  AdamState<double> st;
  st.m = {0.0};
  st.v = {0.0};
  AdamConfig cfg;
  CHECK_THROWS_AS(adam_step(p, st, cfg), ShapeError);
}

TEST_SUITE_END();
