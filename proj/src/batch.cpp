#include "descdist/batch.hpp"

#include <algorithm>
#include <map>

namespace descdist {

namespace {

std::map<std::int64_t, std::vector<std::size_t>> patches_by_id(const PatchStore& store) {
  std::map<std::int64_t, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < store.count(); ++i) by_id[store.point_ids[i]].push_back(i);
  return by_id;
}

// Rotate one [32,32] plane 90 degrees clockwise k times, exactly.
void rotate_plane(float* plane, int k) {
  const int s = kInputPatchSize;
  std::vector<float> tmp(static_cast<std::size_t>(s) * s);
  for (int r = 0; r < k; ++r) {
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        tmp[static_cast<std::size_t>(x) * s + (s - 1 - y)] = plane[static_cast<std::size_t>(y) * s + x];
    std::copy(tmp.begin(), tmp.end(), plane);
  }
}

}  // namespace

std::vector<std::int64_t> pairable_ids(const PatchStore& store) {
  std::vector<std::int64_t> ids;
  for (const auto& [id, idxs] : patches_by_id(store))
    if (idxs.size() >= 2) ids.push_back(id);
  return ids;
}

PatchBatch sample_pair_batch(const PatchStore& store, int n, Rng& rng) {
  require<Error>(n >= 1, "sample_pair_batch: batch size must be >= 1");
  const auto by_id = patches_by_id(store);
  std::vector<std::int64_t> eligible;
  for (const auto& [id, idxs] : by_id)
    if (idxs.size() >= 2) eligible.push_back(id);
  require<Error>(static_cast<int>(eligible.size()) >= n,
                 "sample_pair_batch: store has only " + std::to_string(eligible.size()) +
                     " point ids with >= 2 patches, need " + std::to_string(n));
  rng.shuffle(eligible);
  eligible.resize(static_cast<std::size_t>(n));

  PatchBatch batch;
  batch.point_ids = eligible;
  std::vector<std::size_t> anchor_idx(static_cast<std::size_t>(n)), positive_idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& candidates = by_id.at(eligible[static_cast<std::size_t>(i)]);
    const int a = rng.uniform_int(static_cast<int>(candidates.size()));
    int p = rng.uniform_int(static_cast<int>(candidates.size()) - 1);
    if (p >= a) ++p;  // without replacement
    anchor_idx[static_cast<std::size_t>(i)] = candidates[static_cast<std::size_t>(a)];
    positive_idx[static_cast<std::size_t>(i)] = candidates[static_cast<std::size_t>(p)];
  }
  batch.anchors = store_to_inputs(store, anchor_idx);
  batch.positives = store_to_inputs(store, positive_idx);
  return batch;
}

PatchBatch augment_rotate(PatchBatch batch, double fraction, Rng& rng) {
  require<Error>(fraction >= 0.0 && fraction <= 1.0, "augment_rotate: fraction must be in [0,1]");
  const int n = batch.size();
  const int count = static_cast<int>(std::lround(fraction * n));
  if (count == 0) return batch;
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  const std::size_t plane = static_cast<std::size_t>(kInputPatchSize) * kInputPatchSize;
  for (int s = 0; s < count; ++s) {
    const int i = order[static_cast<std::size_t>(s)];
    const int quarter_turns = 1 + rng.uniform_int(3);  // 90, 180 or 270 degrees
    rotate_plane(&batch.anchors.data[static_cast<std::size_t>(i) * plane], quarter_turns);
    rotate_plane(&batch.positives.data[static_cast<std::size_t>(i) * plane], quarter_turns);
  }
  return batch;
}

}  // namespace descdist
