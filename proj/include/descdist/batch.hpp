#pragma once

#include <cstdint>
#include <vector>

#include "descdist/patches.hpp"
#include "descdist/rng.hpp"
#include "descdist/tensor.hpp"

namespace descdist {

// One Siamese training iteration: anchors[i] and positives[i] show the same
// 3D point, point_ids are pairwise distinct so every cross pair is a true
// negative.
struct PatchBatch {
  Tensor<float> anchors;    // [N,1,32,32]
  Tensor<float> positives;  // [N,1,32,32]
  std::vector<std::int64_t> point_ids;

  int size() const { return static_cast<int>(point_ids.size()); }
};

// Draws n distinct point ids (each with >= 2 patches) and two distinct
// patches per id.
PatchBatch sample_pair_batch(const PatchStore& store, int n, Rng& rng);

// Rotates round(fraction*N) randomly chosen pairs by the same right angle
// from {90, 180, 270} degrees, anchor and positive together.
PatchBatch augment_rotate(PatchBatch batch, double fraction, Rng& rng);

// Point ids usable for pair sampling (>= 2 patches).
std::vector<std::int64_t> pairable_ids(const PatchStore& store);

}  // namespace descdist
