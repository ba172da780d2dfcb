// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "discond/data.hpp"
#include "discond/npz.hpp"

namespace discond {
namespace {

struct Sprite {
  std::size_t shape, scale, orientation, pos_x, pos_y;
};

double scale_value(std::size_t i) { return 0.5 + 0.1 * static_cast<double>(i); }
double orientation_value(std::size_t i) { return 2.0 * std::numbers::pi * static_cast<double>(i) / 40.0; }
double position_value(std::size_t i) { return static_cast<double>(i) / 31.0; }

bool inside(std::size_t shape, double u, double v) {
  switch (shape) {
    case kSquare: return std::fabs(u) <= 0.8 && std::fabs(v) <= 0.8;
    case kEllipse: return u * u + 4.0 * v * v <= 1.0;
    default: {
      const double a = 1.2 * u, b = -1.2 * v + 0.2;
      const double q = a * a + b * b - 1.0;
      return q * q * q - a * a * b * b * b <= 0.0;
    }
  }
}

void render(const Sprite& s, std::uint8_t* img) {
  constexpr double n = static_cast<double>(kDspritesExtent);
  std::fill_n(img, kDspritesExtent * kDspritesExtent, 0);
  const double cx = 10.0 + 44.0 * position_value(s.pos_x);
  const double cy = 10.0 + 44.0 * position_value(s.pos_y);
  const double r = 10.0 * scale_value(s.scale);
  const double th = orientation_value(s.orientation);
  const double c = std::cos(th), sn = std::sin(th);
  const double reach = 1.5 * r + 1.0;
  const auto lo = [&](double center) { return static_cast<std::size_t>(std::max(0.0, std::floor(center - reach))); };
  const auto hi = [&](double center) { return static_cast<std::size_t>(std::min(n, std::ceil(center + reach))); };
  for (std::size_t y = lo(cy); y < hi(cy); ++y) {
    for (std::size_t x = lo(cx); x < hi(cx); ++x) {
      const double dx = (static_cast<double>(x) + 0.5 - cx) / r;
      const double dy = (static_cast<double>(y) + 0.5 - cy) / r;
      if (inside(s.shape, c * dx + sn * dy, -sn * dx + c * dy)) img[y * kDspritesExtent + x] = 1;
    }
  }
}

Sprite sprite_at(std::size_t row) {
  Sprite s;
  s.pos_y = row % 32;
  row /= 32;
  s.pos_x = row % 32;
  row /= 32;
  s.orientation = row % 40;
  row /= 40;
  s.scale = row % 6;
  s.shape = row / 6;
  return s;
}

template <class T>
std::span<const std::uint8_t> as_bytes(const std::vector<T>& v) {
  return {reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * sizeof(T)};
}

}  // namespace

void write_synthetic_dsprites(const std::filesystem::path& path) {
  NpzWriter npz(path, true);
  std::vector<std::int64_t> classes(kDspritesCount * kDspritesLatents);
  std::vector<double> values(kDspritesCount * kDspritesLatents);
  for (std::size_t r = 0; r < kDspritesCount; ++r) {
    const Sprite s = sprite_at(r);
    const std::int64_t cls[kDspritesLatents] = {0,
                                                static_cast<std::int64_t>(s.shape),
                                                static_cast<std::int64_t>(s.scale),
                                                static_cast<std::int64_t>(s.orientation),
                                                static_cast<std::int64_t>(s.pos_x),
                                                static_cast<std::int64_t>(s.pos_y)};
    const double val[kDspritesLatents] = {1.0,
                                          static_cast<double>(s.shape + 1),
                                          scale_value(s.scale),
                                          orientation_value(s.orientation),
                                          position_value(s.pos_x),
                                          position_value(s.pos_y)};
    std::copy_n(cls, kDspritesLatents, classes.data() + r * kDspritesLatents);
    std::copy_n(val, kDspritesLatents, values.data() + r * kDspritesLatents);
  }

  constexpr std::size_t plane = kDspritesExtent * kDspritesExtent;
  constexpr std::size_t kRowsPerWrite = 1024;
  std::vector<std::uint8_t> buf(kRowsPerWrite * plane);
  npz.begin_array("imgs", {"|u1", false, {kDspritesCount, kDspritesExtent, kDspritesExtent}});
  for (std::size_t start = 0; start < kDspritesCount; start += kRowsPerWrite) {
    const std::size_t count = std::min(kRowsPerWrite, kDspritesCount - start);
    for (std::size_t k = 0; k < count; ++k) render(sprite_at(start + k), buf.data() + k * plane);
    npz.write({buf.data(), count * plane});
  }
  npz.end_array();
  npz.add_array("latents_classes", {"<i8", false, {kDspritesCount, kDspritesLatents}}, as_bytes(classes));
  npz.add_array("latents_values", {"<f8", false, {kDspritesCount, kDspritesLatents}}, as_bytes(values));
  npz.close();
}

}  // namespace discond
