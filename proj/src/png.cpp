// SPDX-License-Identifier: Apache-2.0
#include "discond/png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace discond {
namespace {

void put_be32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out += static_cast<char>((v >> s) & 0xff);
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_be32(out, static_cast<std::uint32_t>(
                    crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace

std::string encode_png_gray(std::size_t width, std::size_t height, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height) throw std::invalid_argument("png: pixel count does not match dimensions");
  std::string raw;
  raw.reserve((width + 1) * height);
  for (std::size_t y = 0; y < height; ++y) {
    raw += '\0';  // filter: none
    raw.append(reinterpret_cast<const char*>(pixels.data() + y * width), width);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string z(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &bound, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw std::runtime_error("png: compression failed");
  }
  z.resize(bound);
  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // 8-bit gray, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", "");
  return out;
}

void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels) {
  const std::string bytes = encode_png_gray(width, height, pixels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("png: cannot write " + path.string());
}

void write_image_grid(const std::filesystem::path& path, const Tensor& grid, std::size_t gap) {
  if (grid.rank() != 4) throw ShapeError("image grid: expected [rows, cols, H, W], got " + shape_str(grid.shape()));
  const std::size_t rows = grid.size(0), cols = grid.size(1), h = grid.size(2), w = grid.size(3);
  const std::size_t width = cols * w + (cols - 1) * gap, height = rows * h + (rows - 1) * gap;
  std::vector<std::uint8_t> px(width * height, 0);
  const auto v = grid.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const float* tile = v.data() + (r * cols + c) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const float p = std::clamp(tile[y * w + x], 0.0f, 1.0f);
          px[(r * (h + gap) + y) * width + c * (w + gap) + x] = static_cast<std::uint8_t>(std::lround(p * 255.0f));
        }
      }
    }
  }
  write_png_gray(path, width, height, px);
}

}  // namespace discond
