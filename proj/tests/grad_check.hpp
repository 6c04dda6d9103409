#pragma once

// Central finite-difference gradient checking (fp64, h = 1e-4) shared by the
// unit tests and the acceptance suite. Generators re-draw random instances
// that land too close to a non-smooth point (hinge boundaries, hard-sign
// flips, argmin ties) so the comparison is made only where the losses are
// differentiable.

#include <algorithm>
#include <cmath>
#include <functional>

#include "descdist/losses.hpp"
#include "descdist/tensor.hpp"

namespace gradcheck {

using descdist::Rng;
using descdist::Tensor;

inline constexpr double kStep = 1e-4;
inline constexpr double kTol = 1e-4;

struct Result {
  double max_rel_err = 0;
  long checked = 0;

  bool ok() const { return checked > 0 && max_rel_err < kTol; }
  void merge(const Result& other) {
    max_rel_err = std::max(max_rel_err, other.max_rel_err);
    checked += other.checked;
  }
};

// Compares an analytic gradient of a scalar functional against central
// differences taken by perturbing every element of x.
inline Result compare(const std::function<double()>& eval, Tensor<double>& x,
                      const std::vector<double>& analytic, double h = kStep) {
  Result r;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double orig = x.data[i];
    x.data[i] = orig + h;
    const double lp = eval();
    x.data[i] = orig - h;
    const double lm = eval();
    x.data[i] = orig;
    const double g = (lp - lm) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - g) / std::max({1.0, std::abs(a), std::abs(g)});
    r.max_rel_err = std::max(r.max_rel_err, rel);
    ++r.checked;
  }
  return r;
}

// A scalar functional over a tensor-valued map: L(y) = sum(c .* y) with fixed
// random weights c, so dL/dy = c.
inline Tensor<double> random_cotangent(const std::vector<int>& shape, Rng& rng) {
  Tensor<double> c(shape);
  for (auto& v : c.data) v = rng.normal();
  return c;
}

inline double weighted_sum(const Tensor<double>& y, const Tensor<double>& c) {
  double s = 0;
  for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * c.data[i];
  return s;
}

// ---------------------------------------------------------------------------
// Guarded random instances for the kinked losses.

// Descriptor batches for basic/train loss checks: entries kept away from 0
// (hard-sign flip and soft-sign curvature) and +-1 (binarization kink), rows
// kept apart (distance kink), hinge and argmin gaps enforced by the caller.
inline Tensor<double> descriptor_batch(int n, int d, Rng& rng) {
  Tensor<double> t({n, d});
  for (auto& v : t.data) {
    do {
      v = rng.normal() * 0.8;
    } while (std::abs(v) < 0.05 || std::abs(std::abs(v) - 1.0) < 0.05);
  }
  return t;
}

// Validity predicate for a Siamese pair of batches under the hinge, argmin
// and pair-distance guards; margin is the triplet margin in use.
inline bool batch_is_generic(const Tensor<double>& anchors, const Tensor<double>& positives,
                             double margin, double guard = 1e-2) {
  using descdist::hardest_negative;
  const auto dm = descdist::pairwise_distance_matrix(anchors, positives);
  const int n = dm.dim(0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (dm.at2(i, j) < guard) return false;  // distance kink / degenerate pair
  for (int i = 0; i < n; ++i) {
    const auto best = hardest_negative(dm, i);
    // runner-up must stay clearly behind so the argmin is stable under +-h
    double runner_up = 1e30;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (const double cand : {dm.at2(i, j), dm.at2(j, i)}) {
        if (cand > best.dist + 1e-12 && cand < runner_up) runner_up = cand;
      }
    }
    if (runner_up - best.dist < guard) return false;
    const double hinge = margin + dm.at2(i, i) - best.dist;
    if (std::abs(hinge) < guard) return false;
  }
  return true;
}

inline void generic_siamese_batch(int n, int d, double margin, Rng& rng, Tensor<double>& anchors,
                                  Tensor<double>& positives) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    anchors = descriptor_batch(n, d, rng);
    positives = descriptor_batch(n, d, rng);
    if (batch_is_generic(anchors, positives, margin)) return;
  }
  throw std::runtime_error("could not draw a generic Siamese batch");
}

// Distance-like square matrix with well-separated entries (for the losses
// that consume distance matrices directly).
inline Tensor<double> generic_distance_matrix(int n, Rng& rng, double margin) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Tensor<double> dm({n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        dm.at2(i, j) = i == j ? rng.uniform(0.1, 0.7) : rng.uniform(0.5, 2.5);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const auto best = descdist::hardest_negative(dm, i);
      double runner_up = 1e30;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        for (const double cand : {dm.at2(i, j), dm.at2(j, i)})
          if (cand > best.dist + 1e-12) runner_up = std::min(runner_up, cand);
      }
      if (runner_up - best.dist < 1e-2) ok = false;
      if (std::abs(margin + dm.at2(i, i) - best.dist) < 1e-2) ok = false;
    }
    if (ok) return dm;
  }
  throw std::runtime_error("could not draw a generic distance matrix");
}

}  // namespace gradcheck
