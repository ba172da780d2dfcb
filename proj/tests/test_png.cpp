// SPDX-License-Identifier: Apache-2.0
#include <zlib.h>

#include "support.hpp"

#include "discond/png.hpp"

using namespace discond;

namespace {

std::uint32_t be32(const std::string& s, std::size_t off) {
  return (std::uint32_t(std::uint8_t(s[off])) << 24) | (std::uint32_t(std::uint8_t(s[off + 1])) << 16) |
         (std::uint32_t(std::uint8_t(s[off + 2])) << 8) | std::uint8_t(s[off + 3]);
}

struct Chunk {
  std::string type;
  std::string data;
};

std::vector<Chunk> chunks(const std::string& png) {
  std::vector<Chunk> out;
  std::size_t off = 8;
  while (off < png.size()) {
    const std::uint32_t len = be32(png, off);
    Chunk c{png.substr(off + 4, 4), png.substr(off + 8, len)};
    const std::string typed = png.substr(off + 4, 4 + len);
    const uLong crc = crc32(0, reinterpret_cast<const Bytef*>(typed.data()), static_cast<uInt>(typed.size()));
    CHECK(be32(png, off + 8 + len) == crc);
    out.push_back(c);
    off += 12 + len;
  }
  return out;
}

std::string inflate_all(const std::string& z, std::size_t expect) {
  std::string out(expect, '\0');
  uLongf n = static_cast<uLongf>(expect);
  REQUIRE(uncompress(reinterpret_cast<Bytef*>(out.data()), &n, reinterpret_cast<const Bytef*>(z.data()),
                     static_cast<uLong>(z.size())) == Z_OK);
  CHECK(n == expect);
  return out;
}

}  // namespace

TEST_CASE("grayscale png structure and payload") {
  const std::size_t w = 5, h = 3;
  std::vector<std::uint8_t> px(w * h);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 17);
  const std::string png = encode_png_gray(w, h, px);
  CHECK(png.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
  const auto cs = chunks(png);
  REQUIRE(cs.size() >= 3);
  CHECK(cs.front().type == "IHDR");
  CHECK(cs.back().type == "IEND");
  CHECK(be32(cs[0].data, 0) == w);
  CHECK(be32(cs[0].data, 4) == h);
  CHECK(cs[0].data[8] == 8);
  CHECK(cs[0].data[9] == 0);
  std::string idat;
  for (const auto& c : cs)
    if (c.type == "IDAT") idat += c.data;
  const std::string raw = inflate_all(idat, h * (w + 1));
  for (std::size_t y = 0; y < h; ++y) {
    CHECK(raw[y * (w + 1)] == 0);
    for (std::size_t x = 0; x < w; ++x) CHECK(std::uint8_t(raw[y * (w + 1) + 1 + x]) == px[y * w + x]);
  }
  CHECK_THROWS(encode_png_gray(w, h, std::span(px).first(3)));
}

TEST_CASE("image grids tile with gaps") {
  test::ScratchDir dir("png");
  Tensor grid({2, 3, 4, 4});
  for (float& v : grid.values()) v = 1.0f;
  write_image_grid(dir / "g.png", grid, 1);
  const std::string png = test::read_bytes(dir / "g.png");
  const auto cs = chunks(png);
  const std::size_t W = 3 * 4 + 2, H = 2 * 4 + 1;
  CHECK(be32(cs[0].data, 0) == W);
  CHECK(be32(cs[0].data, 4) == H);
  std::string idat;
  for (const auto& c : cs)
    if (c.type == "IDAT") idat += c.data;
  const std::string raw = inflate_all(idat, H * (W + 1));
  CHECK(std::uint8_t(raw[1 + 0]) == 255);
  CHECK(std::uint8_t(raw[1 + 4]) == 0);
  CHECK(std::uint8_t(raw[4 * (W + 1) + 1]) == 0);
  CHECK(std::uint8_t(raw[5 * (W + 1) + 1]) == 255);
  CHECK_THROWS(write_image_grid(dir / "bad.png", Tensor({2, 4, 4}), 1));
}
