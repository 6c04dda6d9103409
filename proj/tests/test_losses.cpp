#include "descdist/losses.hpp"

#include <cmath>

#include "doctest.h"
#include "grad_check.hpp"

using namespace descdist;
using gradcheck::Result;

namespace {

Tensor<double> random_batch(int n, int d, Rng& rng, double scale = 1.0) {
  Tensor<double> t({n, d});
  for (auto& v : t.data) v = rng.normal() * scale;
  return t;
}

// Exhaustive per-pair oracle for the distance matrix.
double loop_distance(const Tensor<double>& a, int i, const Tensor<double>& p, int j) {
  double ssq = 0;
  for (int k = 0; k < a.dim(1); ++k) {
    const double diff = a.at2(i, k) - p.at2(j, k);
    ssq += diff * diff;
  }
  return std::sqrt(ssq);
}

// Exhaustive hardest-negative search mirroring the documented tie rule:
// candidates scanned j ascending, row entry before column entry.
void oracle_hardest(const Tensor<double>& dm, int i, double& dist, int& row, int& col) {
  const int n = dm.dim(0);
  dist = 0;
  row = col = -1;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    if (row < 0 || dm.at2(i, j) < dist) {
      dist = dm.at2(i, j);
      row = i;
      col = j;
    }
    if (dm.at2(j, i) < dist) {
      dist = dm.at2(j, i);
      row = j;
      col = i;
    }
  }
}

double oracle_triplet(const Tensor<double>& dm, double margin) {
  double loss = 0;
  for (int i = 0; i < dm.dim(0); ++i) {
    double nd;
    int r, c;
    oracle_hardest(dm, i, nd, r, c);
    loss += std::max(0.0, margin + dm.at2(i, i) - nd);
  }
  return loss;
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("pairwise distances: identical batches have a zero diagonal") {
  Rng rng(31);
  const Tensor<double> a = random_batch(6, 8, rng);
  const Tensor<double> dm = pairwise_distance_matrix(a, a);
  for (int i = 0; i < 6; ++i) CHECK(dm.at2(i, i) == 0.0);
}

TEST_CASE("pairwise distances: orthogonal unit vectors are sqrt(2) apart") {
  Tensor<double> a({1, 2}), p({1, 2});
  a.data = {1.0, 0.0};
  p.data = {0.0, 1.0};
  const Tensor<double> dm = pairwise_distance_matrix(a, p);
  CHECK(dm.at2(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("pairwise distances match the per-pair loop oracle") {
  Rng rng(32);
  const Tensor<double> a = random_batch(8, 16, rng);
  const Tensor<double> p = random_batch(8, 16, rng);
  const Tensor<double> dm = pairwise_distance_matrix(a, p);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(dm.at2(i, j) == doctest::Approx(loop_distance(a, i, p, j)).epsilon(1e-6));
}

TEST_CASE("pairwise distances reject mismatched shapes") {
  Rng rng(33);
  const Tensor<double> a = random_batch(4, 8, rng);
  const Tensor<double> p = random_batch(4, 9, rng);
  CHECK_THROWS_AS(pairwise_distance_matrix(a, p), ShapeError);
}

TEST_CASE("triplet loss is zero when every margin is satisfied") {
  Tensor<double> dm({3, 3});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) dm.at2(i, j) = i == j ? 0.0 : 1.5;
  CHECK(triplet_hard_loss(dm, 1.0) == 0.0);
}

TEST_CASE("triplet hinge for one anchor follows max(0, t + d_pos - d_neg)") {
  Tensor<double> dm({2, 2});
  dm.at2(0, 0) = 0.5;
  dm.at2(0, 1) = 0.7;
  dm.at2(1, 0) = 2.0;
  dm.at2(1, 1) = 1.5;
  const auto neg0 = hardest_negative(dm, 0);
  CHECK(neg0.dist == 0.7);
  // anchor 0 contributes 1.0 + 0.5 - 0.7 = 0.8; anchor 1 sees the same 0.7
  // through the column and contributes 1.0 + 1.5 - 0.7 = 1.8
  CHECK(triplet_hard_loss(dm, 1.0) == doctest::Approx(0.8 + 1.8).epsilon(1e-12));
}

TEST_CASE("triplet loss equals the exhaustive O(N^2) oracle on random batches") {
  Rng rng(34);
  for (int inst = 0; inst < 20; ++inst) {
    const Tensor<double> a = random_batch(32, 8, rng);
    const Tensor<double> p = random_batch(32, 8, rng);
    const Tensor<double> dm = pairwise_distance_matrix(a, p);
    const double got = triplet_hard_loss(dm, 1.0);
    CHECK(got == doctest::Approx(oracle_triplet(dm, 1.0)).epsilon(1e-9));
    for (int i = 0; i < 32; ++i) {
      double nd;
      int r, c;
      oracle_hardest(dm, i, nd, r, c);
      const auto got_neg = hardest_negative(dm, i);
      CHECK(got_neg.row == r);
      CHECK(got_neg.col == c);
    }
  }
}

TEST_CASE("triplet loss needs at least two pairs") {
  Tensor<double> dm({1, 1});
  CHECK_THROWS(triplet_hard_loss(dm, 1.0));
}

TEST_CASE("triplet loss is invariant under simultaneous batch permutation") {
  Rng rng(35);
  const Tensor<double> a = random_batch(10, 6, rng);
  const Tensor<double> p = random_batch(10, 6, rng);
  std::vector<int> perm{3, 1, 4, 0, 9, 2, 7, 8, 5, 6};
  Tensor<double> pa({10, 6}), pp({10, 6});
  for (int i = 0; i < 10; ++i)
    for (int k = 0; k < 6; ++k) {
      pa.at2(i, k) = a.at2(perm[i], k);
      pp.at2(i, k) = p.at2(perm[i], k);
    }
  const double base = triplet_hard_loss(pairwise_distance_matrix(a, p), 1.0);
  const double permuted = triplet_hard_loss(pairwise_distance_matrix(pa, pp), 1.0);
  CHECK(base == doctest::Approx(permuted).epsilon(1e-9));
}

TEST_CASE("binarization loss vanishes on exactly binary input") {
  Tensor<double> r({3, 4});
  r.data = {1, -1, 1, 1, -1, -1, 1, -1, 1, 1, -1, 1};
  CHECK(binarization_loss(r) == 0.0);
}

TEST_CASE("binarization loss of an all-zero batch equals the batch size") {
  for (const auto [n, d] : {std::pair{2, 4}, {5, 64}, {3, 7}}) {
    Tensor<double> r({n, d});
    CHECK(binarization_loss(r) == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
  }
}

TEST_CASE("binarization loss matches the double-loop oracle") {
  Rng rng(36);
  const Tensor<double> r = random_batch(7, 13, rng);
  double expect = 0;
  for (int i = 0; i < 7; ++i)
    for (int k = 0; k < 13; ++k) {
      const double b = r.at2(i, k) > 0 ? 1.0 : -1.0;
      expect += std::abs(r.at2(i, k) - b) / 13.0;
    }
  CHECK(binarization_loss(r) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("soft sign values") {
  Tensor<double> r({1, 3});
  r.data = {0.5, 0.0, -0.5};
  const Tensor<double> b = soft_sign(r, 1e-5);
  CHECK(b.at2(0, 0) == doctest::Approx(0.99998).epsilon(1e-6));
  CHECK(b.at2(0, 1) == 0.0);
  CHECK(b.at2(0, 2) == doctest::Approx(-0.99998).epsilon(1e-6));
}

TEST_CASE("soft sign is bounded by one and approaches it for large input") {
  Rng rng(37);
  Tensor<double> r({1, 100});
  for (auto& v : r.data) v = rng.normal() * 10.0;
  const Tensor<double> b = soft_sign(r, 1e-5);
  for (std::size_t i = 0; i < b.data.size(); ++i) {
    CHECK(std::abs(b.data[i]) < 1.0);
    if (r.data[static_cast<std::size_t>(i)] != 0.0)
      CHECK(b.data[i] * r.data[i] > 0.0);  // sign preserved
  }
  Tensor<double> big({1, 1});
  big.data = {1e6};
  CHECK(soft_sign(big, 1e-5).data[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("real distillation term is zero under exact lambda scaling") {
  Rng rng(38);
  Tensor<double> dm_t({4, 4});
  for (auto& v : dm_t.data) v = std::abs(rng.normal()) + 0.1;
  Tensor<double> dm_s = dm_t;
  for (auto& v : dm_s.data) v *= 0.95;
  CHECK(distill_real(dm_t, dm_s, 0.95) == doctest::Approx(0.0).epsilon(1e-12));
  // perturbing one negative entry breaks exactness
  dm_s.at2(0, 1) += 0.25;
  CHECK(distill_real(dm_t, dm_s, 0.95) > 0.2);
}

TEST_CASE("real distillation single negative pair value") {
  Tensor<double> dm_t({2, 2}), dm_s({2, 2});
  dm_t.at2(0, 1) = 1.0;
  dm_s.at2(0, 1) = 0.5;
  dm_t.at2(1, 0) = 2.0;
  dm_s.at2(1, 0) = 1.9;  // exactly 0.95-scaled, contributes nothing
  CHECK(distill_real(dm_t, dm_s, 0.95) == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("real distillation matches the exhaustive negative-pair oracle") {
  Rng rng(39);
  const Tensor<double> dm_t = pairwise_distance_matrix(random_batch(9, 12, rng),
                                                       random_batch(9, 12, rng));
  const Tensor<double> dm_s = pairwise_distance_matrix(random_batch(9, 5, rng),
                                                       random_batch(9, 5, rng));
  double expect = 0;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      if (j != i) expect += std::abs(0.95 * dm_t.at2(i, j) - dm_s.at2(i, j)) / 8.0;
  CHECK(distill_real(dm_t, dm_s, 0.95) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("binary distillation is zero for identical-descriptor batches at the dim ratio") {
  Tensor<double> bt({3, 128}), bs({3, 64});
  std::fill(bt.data.begin(), bt.data.end(), 1.0);
  std::fill(bs.data.begin(), bs.data.end(), 1.0);
  // every teacher pair dot = 128, every student pair dot = 64, lambda = 64/128
  CHECK(distill_binary(bt, bt, bs, bs, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("binary distillation of mutually orthogonal batches is zero") {
  Tensor<double> bt_a({2, 4}), bt_p({2, 4}), bs_a({2, 2}), bs_p({2, 2});
  bt_a.data = {1, 1, -1, -1, 1, -1, 1, -1};
  bt_p.data = {1, -1, 1, -1, 1, 1, -1, -1};  // cross pairs orthogonal
  bs_a.data = {1, 1, 1, -1};
  bs_p.data = {1, -1, 1, 1};
  CHECK(distill_binary(bt_a, bt_p, bs_a, bs_p, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("binary distillation matches the exhaustive oracle") {
  Rng rng(40);
  const Tensor<double> bt_a = random_batch(6, 16, rng);
  const Tensor<double> bt_p = random_batch(6, 16, rng);
  const Tensor<double> bs_a = random_batch(6, 8, rng);
  const Tensor<double> bs_p = random_batch(6, 8, rng);
  double expect = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (j == i) continue;
      double td = 0, sd = 0;
      for (int k = 0; k < 16; ++k) td += bt_a.at2(i, k) * bt_p.at2(j, k);
      for (int k = 0; k < 8; ++k) sd += bs_a.at2(i, k) * bs_p.at2(j, k);
      expect += std::abs(0.5 * td - sd) / 5.0;
    }
  CHECK(distill_binary(bt_a, bt_p, bs_a, bs_p, 0.5) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("composite losses reduce and recombine as weighted sums") {
  Rng rng(41);
  Tensor<double> ta, tp, sa, sp;
  gradcheck::generic_siamese_batch(5, 12, 1.0, rng, ta, tp);
  gradcheck::generic_siamese_batch(5, 6, 1.0, rng, sa, sp);

  LossConfig cfg;
  cfg.lambda_bin = 0.5;
  const LossTerms terms = train_loss(ta, tp, sa, sp, cfg);

  // independent recomputation of every term
  const double trip = triplet_hard_loss(pairwise_distance_matrix(sa, sp), cfg.margin);
  const double bin = binarization_loss(sa) + binarization_loss(sp);
  const double dreal = distill_real(pairwise_distance_matrix(ta, tp),
                                    pairwise_distance_matrix(sa, sp), cfg.lambda_real);
  const double dbin = distill_binary(soft_sign(ta, cfg.eps_soft), soft_sign(tp, cfg.eps_soft),
                                     soft_sign(sa, cfg.eps_soft), soft_sign(sp, cfg.eps_soft),
                                     cfg.lambda_bin);
  CHECK(terms.triplet == doctest::Approx(trip).epsilon(1e-12));
  CHECK(terms.binarization == doctest::Approx(bin).epsilon(1e-12));
  CHECK(terms.distill_real == doctest::Approx(dreal).epsilon(1e-12));
  CHECK(terms.distill_bin == doctest::Approx(dbin).epsilon(1e-12));

  SUBCASE("basic loss: alpha 0 leaves the triplet term") {
    LossConfig c2 = cfg;
    c2.alpha_bin = 0.0;
    CHECK(terms.basic(c2) == doctest::Approx(trip).epsilon(1e-12));
  }
  SUBCASE("distillation: gamma 0 leaves the real-valued term") {
    LossConfig c2 = cfg;
    c2.gamma_bin = 0.0;
    CHECK(terms.distillation(c2) == doctest::Approx(dreal).epsilon(1e-12));
    c2.gamma_bin = 1.0;
    CHECK(terms.distillation(c2) == doctest::Approx(dreal + dbin).epsilon(1e-12));
  }
  SUBCASE("student objective: beta 0 reduces to the basic loss") {
    LossConfig c2 = cfg;
    c2.beta_distill = 0.0;
    CHECK(terms.total(c2) == doctest::Approx(terms.basic(cfg)).epsilon(1e-12));
    c2.beta_distill = 2.0;
    CHECK(terms.total(c2) ==
          doctest::Approx(terms.basic(cfg) + 2.0 * terms.distillation(cfg)).epsilon(1e-12));
  }
  SUBCASE("all losses are nonnegative and finite") {
    for (const double v : {terms.triplet, terms.binarization, terms.distill_real,
                           terms.distill_bin, terms.total(cfg)}) {
      CHECK(v >= 0.0);
      CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("loss is independent of batch storage order") {
  Rng rng(42);
  Tensor<double> ta, tp, sa, sp;
  gradcheck::generic_siamese_batch(6, 10, 1.0, rng, ta, tp);
  gradcheck::generic_siamese_batch(6, 5, 1.0, rng, sa, sp);
  LossConfig cfg;
  const double base = train_loss(ta, tp, sa, sp, cfg).total(cfg);
  std::vector<int> perm{5, 2, 0, 4, 1, 3};
  auto apply = [&](const Tensor<double>& t) {
    Tensor<double> out(t.shape);
    for (int i = 0; i < t.dim(0); ++i)
      for (int k = 0; k < t.dim(1); ++k) out.at2(i, k) = t.at2(perm[i], k);
    return out;
  };
  const double permuted =
      train_loss(apply(ta), apply(tp), apply(sa), apply(sp), cfg).total(cfg);
  CHECK(base == doctest::Approx(permuted).epsilon(1e-9));
}

TEST_CASE("gradients of the loss stack match finite differences") {
  Rng rng(43);
  Result res;
  for (int inst = 0; inst < 5; ++inst) {
    // triplet on a free distance matrix
    Tensor<double> dm = gradcheck::generic_distance_matrix(5, rng, 1.0);
    Tensor<double> ddm;
    triplet_hard_loss(dm, 1.0, &ddm);
    auto eval_trip = [&] { return triplet_hard_loss(dm, 1.0); };
    res.merge(gradcheck::compare(eval_trip, dm, ddm.data));

    // binarization
    Tensor<double> r = gradcheck::descriptor_batch(4, 6, rng);
    Tensor<double> dr;
    binarization_loss(r, &dr);
    auto eval_bin = [&] { return binarization_loss(r); };
    res.merge(gradcheck::compare(eval_bin, r, dr.data));

    // soft sign through a fixed cotangent
    Tensor<double> rs = gradcheck::descriptor_batch(3, 5, rng);
    const Tensor<double> cot = gradcheck::random_cotangent(rs.shape, rng);
    Tensor<double> drs({3, 5});
    soft_sign_backward(rs, 1e-2, cot, drs);
    auto eval_soft = [&] { return gradcheck::weighted_sum(soft_sign(rs, 1e-2), cot); };
    res.merge(gradcheck::compare(eval_soft, rs, drs.data));

    // full student objective w.r.t. student descriptors
    Tensor<double> ta, tp, sa, sp;
    gradcheck::generic_siamese_batch(4, 10, 1.0, rng, ta, tp);
    gradcheck::generic_siamese_batch(4, 5, 1.0, rng, sa, sp);
    LossConfig cfg;
    cfg.eps_soft = 1e-2;  // keeps the soft-sign curvature resolvable at h = 1e-4
    Tensor<double> da, dp;
    train_loss(ta, tp, sa, sp, cfg, &da, &dp);
    auto eval_total = [&] { return train_loss(ta, tp, sa, sp, cfg).total(cfg); };
    res.merge(gradcheck::compare(eval_total, sa, da.data));
    res.merge(gradcheck::compare(eval_total, sp, dp.data));
  }
  CHECK(res.checked > 500);
  CHECK(res.ok());
}

TEST_SUITE_END();
