#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace descdist {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top-left origin
};

// Minimal uncompressed BMP support, enough for patch-grid datasets:
// reads 8-bit paletted and 24-bit images (24-bit converted via BT.601 luma),
// writes 8-bit grayscale-palette files.
GrayImage read_bmp(const std::string& path);
void write_bmp(const std::string& path, const GrayImage& img);

}  // namespace descdist
