#include "descdist/image_io.hpp"

#include <cstring>
#include <fstream>

#include "descdist/errors.hpp"

namespace descdist {

namespace {

std::uint16_t rd16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t rd32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void wr16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}
void wr32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}

}  // namespace

GrayImage read_bmp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<DatasetError>(in.good(), "cannot open image: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  require<DatasetError>(buf.size() >= 54, "BMP too small: " + path);
  require<DatasetError>(buf[0] == 'B' && buf[1] == 'M', "not a BMP file: " + path);
  const std::uint32_t data_offset = rd32(&buf[10]);
  const std::uint32_t header_size = rd32(&buf[14]);
  require<DatasetError>(header_size >= 40, "unsupported BMP header: " + path);
  const std::int32_t width = static_cast<std::int32_t>(rd32(&buf[18]));
  std::int32_t height = static_cast<std::int32_t>(rd32(&buf[22]));
  const bool bottom_up = height > 0;
  if (height < 0) height = -height;
  const std::uint16_t bpp = rd16(&buf[28]);
  const std::uint32_t compression = rd32(&buf[30]);
  require<DatasetError>(width > 0 && height > 0, "bad BMP dimensions: " + path);
  require<DatasetError>(compression == 0, "compressed BMP not supported: " + path);
  require<DatasetError>(bpp == 8 || bpp == 24, "only 8-bit or 24-bit BMP supported: " + path);

  std::vector<std::uint8_t> palette_gray(256, 0);
  if (bpp == 8) {
    const std::uint32_t colors = rd32(&buf[46]) ? rd32(&buf[46]) : 256;
    const std::size_t pal_off = 14 + header_size;
    require<DatasetError>(pal_off + colors * 4 <= buf.size(), "BMP palette truncated: " + path);
    for (std::uint32_t i = 0; i < colors && i < 256; ++i) {
      const std::uint8_t b = buf[pal_off + i * 4 + 0];
      const std::uint8_t g = buf[pal_off + i * 4 + 1];
      const std::uint8_t r = buf[pal_off + i * 4 + 2];
      palette_gray[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    }
  }

  const std::size_t bytes_per_px = bpp / 8;
  const std::size_t row_stride = (static_cast<std::size_t>(width) * bytes_per_px + 3) & ~std::size_t(3);
  require<DatasetError>(data_offset + row_stride * static_cast<std::size_t>(height) <= buf.size(),
                        "BMP pixel data truncated: " + path);

  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int src_y = bottom_up ? height - 1 - y : y;
    const std::uint8_t* row = &buf[data_offset + row_stride * static_cast<std::size_t>(src_y)];
    for (int x = 0; x < width; ++x) {
      std::uint8_t v;
      if (bpp == 8) {
        v = palette_gray[row[x]];
      } else {
        const std::uint8_t b = row[x * 3 + 0], g = row[x * 3 + 1], r = row[x * 3 + 2];
        v = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
      }
      img.pixels[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return img;
}

void write_bmp(const std::string& path, const GrayImage& img) {
  require<Error>(img.width > 0 && img.height > 0 &&
                     img.pixels.size() == static_cast<std::size_t>(img.width) * img.height,
                 "write_bmp: inconsistent image");
  const std::size_t row_stride = (static_cast<std::size_t>(img.width) + 3) & ~std::size_t(3);
  const std::uint32_t data_offset = 14 + 40 + 256 * 4;
  const std::uint32_t file_size =
      data_offset + static_cast<std::uint32_t>(row_stride * static_cast<std::size_t>(img.height));
  std::vector<std::uint8_t> out;
  out.reserve(file_size);
  out.push_back('B');
  out.push_back('M');
  wr32(out, file_size);
  wr32(out, 0);
  wr32(out, data_offset);
  wr32(out, 40);  // BITMAPINFOHEADER
  wr32(out, static_cast<std::uint32_t>(img.width));
  wr32(out, static_cast<std::uint32_t>(img.height));  // bottom-up
  wr16(out, 1);
  wr16(out, 8);
  wr32(out, 0);  // BI_RGB
  wr32(out, static_cast<std::uint32_t>(row_stride * static_cast<std::size_t>(img.height)));
  wr32(out, 2835);
  wr32(out, 2835);
  wr32(out, 256);
  wr32(out, 0);
  for (int i = 0; i < 256; ++i) {
    out.push_back(static_cast<std::uint8_t>(i));
    out.push_back(static_cast<std::uint8_t>(i));
    out.push_back(static_cast<std::uint8_t>(i));
    out.push_back(0);
  }
  for (int y = img.height - 1; y >= 0; --y) {
    const std::uint8_t* row = &img.pixels[static_cast<std::size_t>(y) * img.width];
    out.insert(out.end(), row, row + img.width);
    for (std::size_t p = static_cast<std::size_t>(img.width); p < row_stride; ++p) out.push_back(0);
  }
  std::ofstream f(path, std::ios::binary);
  require<Error>(f.good(), "cannot open image for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  require<Error>(f.good(), "image write failed: " + path);
}

}  // namespace descdist
