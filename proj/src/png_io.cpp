#include "mespi/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mespi {
namespace {

void put_u32(std::vector<uint8_t> &buf, uint32_t v) {
  buf.push_back(static_cast<uint8_t>(v >> 24));
  buf.push_back(static_cast<uint8_t>(v >> 16));
  buf.push_back(static_cast<uint8_t>(v >> 8));
  buf.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream &out, const char type[4], const std::vector<uint8_t> &data) {
  std::vector<uint8_t> buf;
  put_u32(buf, static_cast<uint32_t>(data.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), data.begin(), data.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, buf.data() + 4, static_cast<uInt>(buf.size() - 4)));
  put_u32(buf, crc);
  out.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_png_gray(const std::string &path, const std::vector<uint8_t> &pixels,
                    int width, int height) {
  if (static_cast<size_t>(width) * height != pixels.size())
    throw std::invalid_argument("write_png_gray: pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_png_gray: cannot open " + path);
  static const uint8_t magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char *>(magic), 8);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(width));
  put_u32(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(out, "IHDR", ihdr);

  // raw scanlines with filter byte 0
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(height) * (width + 1));
  for (int r = 0; r < height; ++r) {
    raw.push_back(0);
    raw.insert(raw.end(), pixels.begin() + static_cast<size_t>(r) * width,
               pixels.begin() + static_cast<size_t>(r + 1) * width);
  }
  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("write_png_gray: deflate failed");
  comp.resize(comp_size);
  write_chunk(out, "IDAT", comp);
  write_chunk(out, "IEND", {});
  if (!out) throw std::runtime_error("write_png_gray: write failed for " + path);
}

void write_magnitude_montage(const std::string &path, const ImageStack &stack,
                             double window_percentile) {
  const int rows = stack.grid.rows, cols = stack.grid.cols;
  std::vector<double> mags(stack.v.size());
  for (size_t i = 0; i < stack.v.size(); ++i) mags[i] = std::abs(stack.v[i]);
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  const size_t idx = std::min(sorted.size() - 1,
                              static_cast<size_t>(window_percentile / 100.0 * sorted.size()));
  const double window = sorted[idx];
  std::vector<uint8_t> pixels(static_cast<size_t>(rows) * cols * stack.echoes, 0);
  const int width = cols * stack.echoes;
  for (int e = 0; e < stack.echoes; ++e)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double m = mags[(static_cast<size_t>(e) * rows + r) * cols + c];
        const double s = window > 0 ? std::min(1.0, m / window) : 0.0;
        pixels[static_cast<size_t>(r) * width + e * cols + c] =
            static_cast<uint8_t>(std::lround(255.0 * s));
      }
  write_png_gray(path, pixels, width, rows);
}

void write_signed_map(const std::string &path, const std::vector<double> &map, Grid grid) {
  if (map.size() != static_cast<size_t>(grid.pixels()))
    throw std::invalid_argument("write_signed_map: size mismatch");
  double amax = 0;
  for (double v : map) amax = std::max(amax, std::abs(v));
  std::vector<uint8_t> pixels(map.size());
  for (size_t i = 0; i < map.size(); ++i) {
    const double s = amax > 0 ? map[i] / amax : 0.0;
    pixels[i] = static_cast<uint8_t>(std::lround(127.5 * (1.0 + s)));
  }
  write_png_gray(path, pixels, grid.cols, grid.rows);
}

}  // namespace mespi
