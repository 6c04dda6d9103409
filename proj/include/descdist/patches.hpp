#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descdist/rng.hpp"
#include "descdist/tensor.hpp"

namespace descdist {

inline constexpr int kStoredPatchSize = 64;  // on-disk patch edge
inline constexpr int kInputPatchSize = 32;   // network input edge
inline constexpr int kGridEdgePatches = 16;  // 16x16 patches per 1024x1024 grid bitmap

// Immutable collection of labeled grayscale patches. Patches sharing a
// point_id are views of the same 3D point and form the matched pairs.
struct PatchStore {
  int patch_size = kStoredPatchSize;
  std::vector<std::uint8_t> pixels;     // count * patch_size^2, row-major per patch
  std::vector<std::int64_t> point_ids;  // one label per patch
  std::string source;

  std::size_t count() const { return point_ids.size(); }
  const std::uint8_t* patch(std::size_t i) const {
    return &pixels[i * static_cast<std::size_t>(patch_size) * patch_size];
  }
};

// Loads a patch-grid dataset: sorted *.bmp grid images (1024x1024, 16x16
// patches of 64x64) plus info.txt with one "pointID refID" line per patch.
// Patches fill grids row-major; only the last grid may be partially used.
PatchStore load_ubc(const std::string& dir);

// Writes a store in the same layout load_ubc reads.
void save_store(const PatchStore& store, const std::string& dir);

// Procedural desk-scale dataset: per 3D point a band-limited random texture,
// per patch a small random affine view with brightness jitter and pixel
// noise. Deterministic in the seed.
PatchStore generate_synthetic(int num_points, int patches_per_point, std::uint64_t seed);

std::uint64_t store_hash(const PatchStore& store);

// One warped 64x64 view of the procedural texture determined by canvas_rng;
// view_rng drives the observation-specific warp and noise. This is the
// primitive generate_synthetic builds on.
void render_synthetic_patch(Rng& canvas_rng, Rng& view_rng, std::uint8_t* out64);

// Bilinear resample with an align-corners grid; exact identity when the
// sizes already match.
void resample_bilinear(const float* src, int src_w, int src_h, float* dst, int dst_w, int dst_h);

// Zero-mean unit-std per patch; near-constant patches map to all zeros.
void standardize(float* values, std::size_t n);

// 64->32 resample plus standardization into one network input row.
void patch_to_input(const std::uint8_t* patch, int patch_size, float* out);

// All patches of a store as a [N,1,32,32] network input tensor.
Tensor<float> store_to_inputs(const PatchStore& store, const std::vector<std::size_t>& indices);

}  // namespace descdist
