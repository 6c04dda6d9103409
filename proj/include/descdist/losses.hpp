#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "descdist/tensor.hpp"

// Training objectives for descriptor learning: batch-hard triplet loss,
// binarization loss, and the cross-dimensional distillation terms that let a
// low-dimensional student match a higher-dimensional teacher's pairwise
// distance structure. Every loss optionally emits its analytic gradient.
//
// Batch convention: an iteration carries an anchor batch A and a positive
// batch P with one-to-one correspondence; pair (A_i, P_i) is the matched pair
// and every (A_i, P_j), i != j, is a negative pair.

namespace descdist {

struct LossConfig {
  double margin = 1.0;        // t, triplet hinge margin
  double alpha_bin = 1.0;     // weight of the binarization term in the basic loss
  double gamma_bin = 1.0;     // weight of the binary term inside the distillation loss
  double beta_distill = 2.0;  // weight of the distillation loss in the student objective
  double lambda_real = 0.95;  // teacher-side distance scale in the real-valued term
  double lambda_bin = 0.5;    // teacher-side dot scale; default D_s/D_t
  double eps_soft = 1e-5;     // soft-sign epsilon

  void validate() const {
    require<ConfigError>(margin >= 0 && alpha_bin >= 0 && gamma_bin >= 0 && beta_distill >= 0 &&
                             lambda_real >= 0 && lambda_bin >= 0,
                         "loss config: coefficients must be >= 0");
    require<ConfigError>(eps_soft > 0, "loss config: eps_soft must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Pairwise L2 distances between the anchor batch (rows) and the positive
// batch (columns); the diagonal holds the matched-pair distances.

template <typename T>
Tensor<T> pairwise_distance_matrix(const Tensor<T>& anchors, const Tensor<T>& positives) {
  require<ShapeError>(anchors.rank() == 2 && positives.rank() == 2,
                      "pairwise_distance_matrix: inputs must be [N,D]");
  check_same_shape(anchors, positives, "pairwise_distance_matrix");
  const int n = anchors.dim(0), d = anchors.dim(1);
  Tensor<T> dm({n, n});
  for (int i = 0; i < n; ++i) {
    const T* a = &anchors.data[anchors.idx2(i, 0)];
    for (int j = 0; j < n; ++j) {
      const T* p = &positives.data[positives.idx2(j, 0)];
      T ssq = 0;
      for (int k = 0; k < d; ++k) {
        const T diff = a[k] - p[k];
        ssq += diff * diff;
      }
      dm.at2(i, j) = std::sqrt(ssq);
    }
  }
  return dm;
}

// Chain an upstream gradient on the distance matrix back to both batches.
// d dist / d a = (a - p) / dist; distances below eps contribute nothing
// (the L2 distance is not differentiable at zero).
template <typename T>
void pairwise_distance_backward(const Tensor<T>& anchors, const Tensor<T>& positives,
                                const Tensor<T>& dm, const Tensor<T>& ddm, Tensor<T>& d_anchors,
                                Tensor<T>& d_positives, T eps = T(1e-8)) {
  const int n = anchors.dim(0), d = anchors.dim(1);
  if (d_anchors.shape != anchors.shape) d_anchors = Tensor<T>(anchors.shape);
  if (d_positives.shape != positives.shape) d_positives = Tensor<T>(positives.shape);
  for (int i = 0; i < n; ++i) {
    const T* a = &anchors.data[anchors.idx2(i, 0)];
    T* da = &d_anchors.data[d_anchors.idx2(i, 0)];
    for (int j = 0; j < n; ++j) {
      const T g = ddm.at2(i, j);
      if (g == T(0)) continue;
      const T dist = dm.at2(i, j);
      if (dist < eps) continue;
      const T* p = &positives.data[positives.idx2(j, 0)];
      T* dp = &d_positives.data[d_positives.idx2(j, 0)];
      const T scale = g / dist;
      for (int k = 0; k < d; ++k) {
        const T diff = a[k] - p[k];
        da[k] += scale * diff;
        dp[k] -= scale * diff;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Triplet loss with hardest-in-batch negative mining. For anchor i the
// negative pool holds both row entries dm(i,j) and column entries dm(j,i),
// j != i; ties go to the lowest j, rows before columns. The hinge is active
// only when strictly positive.

template <typename T>
struct HardNegative {
  int row, col;  // indices into dm
  T dist;
};

template <typename T>
HardNegative<T> hardest_negative(const Tensor<T>& dm, int i) {
  const int n = dm.dim(0);
  HardNegative<T> best{-1, -1, T(0)};
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const T row = dm.at2(i, j);
    if (best.row < 0 || row < best.dist) best = {i, j, row};
    const T col = dm.at2(j, i);
    if (col < best.dist) best = {j, i, col};
  }
  return best;
}

template <typename T>
T triplet_hard_loss(const Tensor<T>& dm, T margin, Tensor<T>* ddm = nullptr) {
  require<ShapeError>(dm.rank() == 2 && dm.dim(0) == dm.dim(1), "triplet: square matrix expected");
  const int n = dm.dim(0);
  require<Error>(n >= 2, "triplet: batch size must be >= 2 so a negative exists");
  if (ddm && ddm->shape != dm.shape) *ddm = Tensor<T>(dm.shape);
  T loss = 0;
  for (int i = 0; i < n; ++i) {
    const HardNegative<T> neg = hardest_negative(dm, i);
    const T term = margin + dm.at2(i, i) - neg.dist;
    if (term > T(0)) {
      loss += term;
      if (ddm) {
        ddm->at2(i, i) += T(1);
        ddm->at2(neg.row, neg.col) -= T(1);
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Hard sign with sign(0) = -1.

template <typename T>
inline T hard_sign(T v) {
  return v > T(0) ? T(1) : T(-1);
}

// Mean absolute gap per descriptor between the real-valued vector and its
// hard-binarized counterpart, summed over the batch.
template <typename T>
T binarization_loss(const Tensor<T>& r, Tensor<T>* dr = nullptr) {
  require<ShapeError>(r.rank() == 2, "binarization_loss: input must be [N,D]");
  const int n = r.dim(0), d = r.dim(1);
  if (dr && dr->shape != r.shape) *dr = Tensor<T>(r.shape);
  const T invd = T(1) / static_cast<T>(d);
  T loss = 0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) {
      const T v = r.at2(i, k);
      const T diff = v - hard_sign(v);
      loss += invd * std::abs(diff);
      if (dr) {
        // the binarized vector is piecewise constant, so only the real side
        // carries gradient almost everywhere
        T s = T(0);
        if (diff > T(0)) s = T(1);
        if (diff < T(0)) s = T(-1);
        dr->at2(i, k) += invd * s;
      }
    }
  return loss;
}

// ---------------------------------------------------------------------------
// Differentiable surrogate of the hard sign: b = r / (|r| + eps).

template <typename T>
Tensor<T> soft_sign(const Tensor<T>& r, T eps) {
  require<Error>(eps > T(0), "soft_sign: eps must be > 0");
  Tensor<T> b(r.shape);
  for (std::size_t i = 0; i < r.data.size(); ++i)
    b.data[i] = r.data[i] / (std::abs(r.data[i]) + eps);
  return b;
}

// db/dr = eps / (|r| + eps)^2 everywhere (one-sided limits agree at 0).
template <typename T>
void soft_sign_backward(const Tensor<T>& r, T eps, const Tensor<T>& db, Tensor<T>& dr) {
  check_same_shape(r, db, "soft_sign backward");
  if (dr.shape != r.shape) dr = Tensor<T>(r.shape);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    const T denom = std::abs(r.data[i]) + eps;
    dr.data[i] += db.data[i] * eps / (denom * denom);
  }
}

// ---------------------------------------------------------------------------
// Real-valued distillation term: mean absolute gap, over the N-1 negative
// pairs of each anchor, between lambda_r-scaled teacher distances and student
// distances. Teacher entries are constants; the optional gradient is w.r.t.
// the student distance matrix.

template <typename T>
T distill_real(const Tensor<T>& dm_teacher, const Tensor<T>& dm_student, T lambda_r,
               Tensor<T>* ddm_student = nullptr) {
  check_same_shape(dm_teacher, dm_student, "distill_real");
  require<ShapeError>(dm_teacher.rank() == 2 && dm_teacher.dim(0) == dm_teacher.dim(1),
                      "distill_real: square matrices expected");
  const int n = dm_teacher.dim(0);
  require<Error>(n >= 2, "distill_real: batch size must be >= 2 so negatives exist");
  if (ddm_student && ddm_student->shape != dm_student.shape)
    *ddm_student = Tensor<T>(dm_student.shape);
  const T w = T(1) / static_cast<T>(n - 1);
  T loss = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const T gap = lambda_r * dm_teacher.at2(i, j) - dm_student.at2(i, j);
      loss += w * std::abs(gap);
      if (ddm_student) {
        T s = T(0);
        if (gap > T(0)) s = T(-1);
        if (gap < T(0)) s = T(1);
        ddm_student->at2(i, j) += w * s;
      }
    }
  return loss;
}

// ---------------------------------------------------------------------------
// Binary distillation term on soft-signed descriptors: aligns lambda_b-scaled
// teacher dot products with student dot products over the same negative
// pairs. Teacher inputs are constants; gradients flow into the student
// soft-sign outputs.

template <typename T>
T distill_binary(const Tensor<T>& bt_anchors, const Tensor<T>& bt_positives,
                 const Tensor<T>& bs_anchors, const Tensor<T>& bs_positives, T lambda_b,
                 Tensor<T>* dbs_anchors = nullptr, Tensor<T>* dbs_positives = nullptr) {
  check_same_shape(bt_anchors, bt_positives, "distill_binary teacher");
  check_same_shape(bs_anchors, bs_positives, "distill_binary student");
  const int n = bt_anchors.dim(0);
  require<ShapeError>(bs_anchors.dim(0) == n, "distill_binary: batch sizes differ");
  require<Error>(n >= 2, "distill_binary: batch size must be >= 2 so negatives exist");
  const int dt = bt_anchors.dim(1), ds = bs_anchors.dim(1);
  if (dbs_anchors && dbs_anchors->shape != bs_anchors.shape)
    *dbs_anchors = Tensor<T>(bs_anchors.shape);
  if (dbs_positives && dbs_positives->shape != bs_positives.shape)
    *dbs_positives = Tensor<T>(bs_positives.shape);
  const T w = T(1) / static_cast<T>(n - 1);
  T loss = 0;
  for (int i = 0; i < n; ++i) {
    const T* ta = &bt_anchors.data[bt_anchors.idx2(i, 0)];
    const T* sa = &bs_anchors.data[bs_anchors.idx2(i, 0)];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const T* tp = &bt_positives.data[bt_positives.idx2(j, 0)];
      const T* sp = &bs_positives.data[bs_positives.idx2(j, 0)];
      T tdot = 0;
      for (int k = 0; k < dt; ++k) tdot += ta[k] * tp[k];
      T sdot = 0;
      for (int k = 0; k < ds; ++k) sdot += sa[k] * sp[k];
      const T gap = lambda_b * tdot - sdot;
      loss += w * std::abs(gap);
      if (dbs_anchors && dbs_positives) {
        T s = T(0);
        if (gap > T(0)) s = T(-1);
        if (gap < T(0)) s = T(1);
        const T g = w * s;
        if (g != T(0)) {
          T* da = &dbs_anchors->data[dbs_anchors->idx2(i, 0)];
          T* dp = &dbs_positives->data[dbs_positives->idx2(j, 0)];
          for (int k = 0; k < ds; ++k) {
            da[k] += g * sp[k];
            dp[k] += g * sa[k];
          }
        }
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Composite objectives. Per-term values are kept separate so training logs
// can report them individually.

struct LossTerms {
  double triplet = 0;
  double binarization = 0;
  double distill_real = 0;
  double distill_bin = 0;

  double basic(const LossConfig& cfg) const { return triplet + cfg.alpha_bin * binarization; }
  double distillation(const LossConfig& cfg) const {
    return distill_real + cfg.gamma_bin * distill_bin;
  }
  double total(const LossConfig& cfg) const {
    return basic(cfg) + cfg.beta_distill * distillation(cfg);
  }
};

// Basic loss (triplet + weighted binarization) on one Siamese iteration.
// The binarization term covers every descriptor produced this iteration,
// i.e. both batches. Gradients accumulate into d_anchors / d_positives.
template <typename T>
LossTerms basic_loss(const Tensor<T>& anchors, const Tensor<T>& positives, const LossConfig& cfg,
                     Tensor<T>* d_anchors = nullptr, Tensor<T>* d_positives = nullptr) {
  cfg.validate();
  LossTerms terms;
  const bool want_grad = d_anchors && d_positives;
  if (want_grad) {
    *d_anchors = Tensor<T>(anchors.shape);
    *d_positives = Tensor<T>(positives.shape);
  }
  const Tensor<T> dm = pairwise_distance_matrix(anchors, positives);
  Tensor<T> ddm;
  terms.triplet =
      static_cast<double>(triplet_hard_loss(dm, static_cast<T>(cfg.margin), want_grad ? &ddm : nullptr));
  if (want_grad) pairwise_distance_backward(anchors, positives, dm, ddm, *d_anchors, *d_positives);
  Tensor<T> dba, dbp;
  terms.binarization = static_cast<double>(binarization_loss(anchors, want_grad ? &dba : nullptr)) +
                       static_cast<double>(binarization_loss(positives, want_grad ? &dbp : nullptr));
  if (want_grad) {
    const T a = static_cast<T>(cfg.alpha_bin);
    for (std::size_t i = 0; i < dba.data.size(); ++i) d_anchors->data[i] += a * dba.data[i];
    for (std::size_t i = 0; i < dbp.data.size(); ++i) d_positives->data[i] += a * dbp.data[i];
  }
  return terms;
}

// Full student objective: basic loss plus beta-weighted distillation against
// a frozen teacher. Teacher descriptors receive no gradient by construction.
template <typename T>
LossTerms train_loss(const Tensor<T>& teacher_anchors, const Tensor<T>& teacher_positives,
                     const Tensor<T>& student_anchors, const Tensor<T>& student_positives,
                     const LossConfig& cfg, Tensor<T>* d_anchors = nullptr,
                     Tensor<T>* d_positives = nullptr) {
  cfg.validate();
  const bool want_grad = d_anchors && d_positives;
  LossTerms terms = basic_loss(student_anchors, student_positives, cfg, d_anchors, d_positives);

  const Tensor<T> dm_t = pairwise_distance_matrix(teacher_anchors, teacher_positives);
  const Tensor<T> dm_s = pairwise_distance_matrix(student_anchors, student_positives);
  Tensor<T> ddm_s;
  terms.distill_real = static_cast<double>(
      distill_real(dm_t, dm_s, static_cast<T>(cfg.lambda_real), want_grad ? &ddm_s : nullptr));

  const T eps = static_cast<T>(cfg.eps_soft);
  const Tensor<T> bt_a = soft_sign(teacher_anchors, eps);
  const Tensor<T> bt_p = soft_sign(teacher_positives, eps);
  const Tensor<T> bs_a = soft_sign(student_anchors, eps);
  const Tensor<T> bs_p = soft_sign(student_positives, eps);
  Tensor<T> dbs_a, dbs_p;
  terms.distill_bin = static_cast<double>(
      distill_binary(bt_a, bt_p, bs_a, bs_p, static_cast<T>(cfg.lambda_bin),
                     want_grad ? &dbs_a : nullptr, want_grad ? &dbs_p : nullptr));

  if (want_grad) {
    const T beta = static_cast<T>(cfg.beta_distill);
    const T gamma = static_cast<T>(cfg.gamma_bin);
    // real-valued term through the student distance matrix
    for (auto& g : ddm_s.data) g *= beta;
    pairwise_distance_backward(student_anchors, student_positives, dm_s, ddm_s, *d_anchors,
                               *d_positives);
    // binary term through the soft sign
    for (auto& g : dbs_a.data) g *= beta * gamma;
    for (auto& g : dbs_p.data) g *= beta * gamma;
    soft_sign_backward(student_anchors, eps, dbs_a, *d_anchors);
    soft_sign_backward(student_positives, eps, dbs_p, *d_positives);
  }
  return terms;
}

}  // namespace descdist
