#include "descdist/patches.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "descdist/hash.hpp"
#include "descdist/image_io.hpp"

namespace fs = std::filesystem;

namespace descdist {

namespace {

constexpr int kGridPixels = kGridEdgePatches * kStoredPatchSize;  // 1024
constexpr int kPatchesPerGrid = kGridEdgePatches * kGridEdgePatches;

std::vector<std::string> sorted_grid_files(const std::string& dir) {
  std::vector<std::string> files;
  require<DatasetError>(fs::is_directory(dir), "dataset directory not found: " + dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".bmp") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

PatchStore load_ubc(const std::string& dir) {
  const auto info_path = (fs::path(dir) / "info.txt").string();
  require<DatasetError>(fs::is_regular_file(info_path), "missing info file: " + info_path);

  std::vector<std::int64_t> ids;
  {
    std::ifstream in(info_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream is(line);
      std::int64_t point_id;
      require<DatasetError>(static_cast<bool>(is >> point_id),
                            "malformed info line in " + info_path + ": '" + line + "'");
      ids.push_back(point_id);
    }
  }
  require<DatasetError>(!ids.empty(), "info file is empty: " + info_path);

  const auto files = sorted_grid_files(dir);
  require<DatasetError>(!files.empty(), "no grid bitmaps in dataset directory: " + dir);
  const std::size_t capacity = files.size() * kPatchesPerGrid;
  require<DatasetError>(ids.size() <= capacity && ids.size() > capacity - kPatchesPerGrid,
                        "info line count (" + std::to_string(ids.size()) +
                            ") does not match patch count implied by " +
                            std::to_string(files.size()) + " grid image(s)");

  PatchStore store;
  store.source = dir;
  store.point_ids = ids;
  store.pixels.resize(ids.size() * kStoredPatchSize * kStoredPatchSize);

  std::size_t next = 0;
  for (const auto& file : files) {
    const GrayImage img = read_bmp(file);
    require<DatasetError>(img.width == kGridPixels && img.height == kGridPixels,
                          "grid image must be 1024x1024, got " + std::to_string(img.width) + "x" +
                              std::to_string(img.height) + ": " + file);
    for (int gy = 0; gy < kGridEdgePatches && next < ids.size(); ++gy) {
      for (int gx = 0; gx < kGridEdgePatches && next < ids.size(); ++gx) {
        std::uint8_t* dst = &store.pixels[next * kStoredPatchSize * kStoredPatchSize];
        for (int y = 0; y < kStoredPatchSize; ++y) {
          const std::uint8_t* src =
              &img.pixels[static_cast<std::size_t>(gy * kStoredPatchSize + y) * kGridPixels +
                          gx * kStoredPatchSize];
          std::copy(src, src + kStoredPatchSize, dst + static_cast<std::size_t>(y) * kStoredPatchSize);
        }
        ++next;
      }
    }
  }
  require<DatasetError>(next == ids.size(), "patch index overflow while reading grids");
  return store;
}

void save_store(const PatchStore& store, const std::string& dir) {
  require<Error>(store.patch_size == kStoredPatchSize,
                 "save_store expects 64x64 patches, got size " + std::to_string(store.patch_size));
  fs::create_directories(dir);
  const std::size_t grids = (store.count() + kPatchesPerGrid - 1) / kPatchesPerGrid;
  for (std::size_t g = 0; g < grids; ++g) {
    GrayImage img;
    img.width = img.height = kGridPixels;
    img.pixels.assign(static_cast<std::size_t>(kGridPixels) * kGridPixels, 0);
    for (int slot = 0; slot < kPatchesPerGrid; ++slot) {
      const std::size_t idx = g * kPatchesPerGrid + static_cast<std::size_t>(slot);
      if (idx >= store.count()) break;
      const int gx = slot % kGridEdgePatches, gy = slot / kGridEdgePatches;
      const std::uint8_t* src = store.patch(idx);
      for (int y = 0; y < kStoredPatchSize; ++y)
        std::copy(src + static_cast<std::size_t>(y) * kStoredPatchSize,
                  src + static_cast<std::size_t>(y + 1) * kStoredPatchSize,
                  &img.pixels[static_cast<std::size_t>(gy * kStoredPatchSize + y) * kGridPixels +
                              gx * kStoredPatchSize]);
    }
    char name[32];
    std::snprintf(name, sizeof(name), "patches%04zu.bmp", g);
    write_bmp((fs::path(dir) / name).string(), img);
  }
  std::ofstream info((fs::path(dir) / "info.txt").string());
  require<Error>(info.good(), "cannot write info.txt in " + dir);
  for (std::size_t i = 0; i < store.count(); ++i) info << store.point_ids[i] << " 0\n";
  require<Error>(info.good(), "info.txt write failed in " + dir);
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

constexpr int kCanvas = 96;  // base texture edge; leaves a warp margin around 64x64 views

// Band-limited random field: white noise blurred by a separable Gaussian,
// then min-max normalized to [0,1].
std::vector<float> make_base_texture(Rng& rng) {
  std::vector<float> noise(kCanvas * kCanvas);
  for (auto& v : noise) v = static_cast<float>(rng.normal());
  const double sigma = rng.uniform(1.6, 3.2);
  const int radius = std::max(2, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ksum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = static_cast<float>(w);
    ksum += w;
  }
  for (auto& k : kernel) k = static_cast<float>(k / ksum);

  std::vector<float> tmp(noise.size()), out(noise.size());
  for (int y = 0; y < kCanvas; ++y)
    for (int x = 0; x < kCanvas; ++x) {
      float acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, kCanvas - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * noise[static_cast<std::size_t>(y) * kCanvas + xx];
      }
      tmp[static_cast<std::size_t>(y) * kCanvas + x] = acc;
    }
  for (int y = 0; y < kCanvas; ++y)
    for (int x = 0; x < kCanvas; ++x) {
      float acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, kCanvas - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy) * kCanvas + x];
      }
      out[static_cast<std::size_t>(y) * kCanvas + x] = acc;
    }
  const auto [mn, mx] = std::minmax_element(out.begin(), out.end());
  const float lo = *mn, span = std::max(1e-6f, *mx - lo);
  for (auto& v : out) v = (v - lo) / span;
  return out;
}

float sample_canvas(const std::vector<float>& canvas, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(kCanvas - 1));
  y = std::clamp(y, 0.0, static_cast<double>(kCanvas - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, kCanvas - 1), y1 = std::min(y0 + 1, kCanvas - 1);
  const double fx = x - x0, fy = y - y0;
  const double v00 = canvas[static_cast<std::size_t>(y0) * kCanvas + x0];
  const double v01 = canvas[static_cast<std::size_t>(y0) * kCanvas + x1];
  const double v10 = canvas[static_cast<std::size_t>(y1) * kCanvas + x0];
  const double v11 = canvas[static_cast<std::size_t>(y1) * kCanvas + x1];
  return static_cast<float>((v00 * (1 - fx) + v01 * fx) * (1 - fy) +
                            (v10 * (1 - fx) + v11 * fx) * fy);
}

void render_view(const std::vector<float>& canvas, Rng& rng, std::uint8_t* out) {
  const double angle = rng.uniform(-0.15, 0.15);
  const double scale = rng.uniform(0.92, 1.08);
  const double tx = rng.uniform(-3.0, 3.0);
  const double ty = rng.uniform(-3.0, 3.0);
  const double gain = rng.uniform(0.85, 1.15);
  const double offset = rng.uniform(-0.08, 0.08);
  const double noise_sigma = 0.02;
  const double ca = std::cos(angle) * scale, sa = std::sin(angle) * scale;
  const double cx = kCanvas / 2.0, cy = kCanvas / 2.0;
  const double half = kStoredPatchSize / 2.0;
  for (int y = 0; y < kStoredPatchSize; ++y)
    for (int x = 0; x < kStoredPatchSize; ++x) {
      const double px = x + 0.5 - half, py = y + 0.5 - half;
      const double sx = cx + ca * px - sa * py + tx;
      const double sy = cy + sa * px + ca * py + ty;
      double v = sample_canvas(canvas, sx, sy);
      v = v * gain + offset + rng.normal() * noise_sigma;
      const int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      out[static_cast<std::size_t>(y) * kStoredPatchSize + x] = static_cast<std::uint8_t>(q);
    }
}

}  // namespace

void render_synthetic_patch(Rng& canvas_rng, Rng& view_rng, std::uint8_t* out64) {
  const auto canvas = make_base_texture(canvas_rng);
  render_view(canvas, view_rng, out64);
}

PatchStore generate_synthetic(int num_points, int patches_per_point, std::uint64_t seed) {
  require<Error>(num_points >= 2, "generate_synthetic: need at least 2 points");
  require<Error>(patches_per_point >= 1, "generate_synthetic: need at least 1 patch per point");
  PatchStore store;
  store.source = "synthetic(seed=" + std::to_string(seed) + ")";
  const std::size_t total = static_cast<std::size_t>(num_points) * patches_per_point;
  store.pixels.resize(total * kStoredPatchSize * kStoredPatchSize);
  store.point_ids.reserve(total);
  for (int p = 0; p < num_points; ++p) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(p)));
    const auto canvas = make_base_texture(rng);
    for (int v = 0; v < patches_per_point; ++v) {
      const std::size_t idx = store.point_ids.size();
      render_view(canvas, rng, &store.pixels[idx * kStoredPatchSize * kStoredPatchSize]);
      store.point_ids.push_back(p);
    }
  }
  return store;
}

std::uint64_t store_hash(const PatchStore& store) {
  std::uint64_t h = fnv1a64(store.pixels.data(), store.pixels.size());
  h = fnv1a64(store.point_ids.data(), store.point_ids.size() * sizeof(std::int64_t), h);
  return h;
}

// ---------------------------------------------------------------------------
// Network input preparation

void resample_bilinear(const float* src, int src_w, int src_h, float* dst, int dst_w, int dst_h) {
  const double sx = dst_w > 1 ? static_cast<double>(src_w - 1) / (dst_w - 1) : 0.0;
  const double sy = dst_h > 1 ? static_cast<double>(src_h - 1) / (dst_h - 1) : 0.0;
  for (int y = 0; y < dst_h; ++y) {
    const double fy = y * sy;
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < dst_w; ++x) {
      const double fx = x * sx;
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - x0;
      const double v00 = src[static_cast<std::size_t>(y0) * src_w + x0];
      const double v01 = src[static_cast<std::size_t>(y0) * src_w + x1];
      const double v10 = src[static_cast<std::size_t>(y1) * src_w + x0];
      const double v11 = src[static_cast<std::size_t>(y1) * src_w + x1];
      dst[static_cast<std::size_t>(y) * dst_w + x] = static_cast<float>(
          (v00 * (1 - wx) + v01 * wx) * (1 - wy) + (v10 * (1 - wx) + v11 * wx) * wy);
    }
  }
}

void standardize(float* values, std::size_t n) {
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += values[i];
  mean /= static_cast<double>(n);
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  if (sd < 1e-6) {
    std::fill(values, values + n, 0.0f);
    return;
  }
  for (std::size_t i = 0; i < n; ++i)
    values[i] = static_cast<float>((values[i] - mean) / sd);
}

void patch_to_input(const std::uint8_t* patch, int patch_size, float* out) {
  std::vector<float> as_float(static_cast<std::size_t>(patch_size) * patch_size);
  for (std::size_t i = 0; i < as_float.size(); ++i)
    as_float[i] = static_cast<float>(patch[i]) / 255.0f;
  resample_bilinear(as_float.data(), patch_size, patch_size, out, kInputPatchSize, kInputPatchSize);
  standardize(out, static_cast<std::size_t>(kInputPatchSize) * kInputPatchSize);
}

Tensor<float> store_to_inputs(const PatchStore& store, const std::vector<std::size_t>& indices) {
  Tensor<float> x({static_cast<int>(indices.size()), 1, kInputPatchSize, kInputPatchSize});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require<Error>(indices[i] < store.count(), "store_to_inputs: index out of range");
    patch_to_input(store.patch(indices[i]), store.patch_size, &x.data[x.idx4(static_cast<int>(i), 0, 0, 0)]);
  }
  return x;
}

}  // namespace descdist
