// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "discond/data.hpp"
#include "discond/npz.hpp"

namespace discond {
namespace {

constexpr std::size_t kShapeCol = 1, kScaleCol = 2, kPosXCol = 4, kPosYCol = 5;
const std::vector<std::string> kFactorNames = {"scale", "orientation", "posX", "posY"};

struct LatentClasses {
  std::vector<std::int64_t> values;  // [N, 6]
  std::int64_t at(std::size_t row, std::size_t col) const { return values[row * kDspritesLatents + col]; }
};

LatentClasses read_latent_classes(NpzReader& npz, const std::filesystem::path& path) {
  NpyHeader h;
  const auto bytes = npz.read("latents_classes", &h);
  if (h.shape != Shape{kDspritesCount, kDspritesLatents} || (h.dtype != "<i8" && h.dtype != "<i4")) {
    throw FormatError("dsprites: " + path.string() + " latents_classes is " + h.dtype + " " + shape_str(h.shape) +
                      ", expected <i8 [737280, 6]");
  }
  LatentClasses lc;
  lc.values.resize(kDspritesCount * kDspritesLatents);
  if (h.dtype == "<i8") {
    std::memcpy(lc.values.data(), bytes.data(), bytes.size());
  } else {
    for (std::size_t i = 0; i < lc.values.size(); ++i) {
      std::int32_t v;
      std::memcpy(&v, bytes.data() + 4 * i, 4);
      lc.values[i] = v;
    }
  }
  for (std::size_t r = 0; r < kDspritesCount; ++r) {
    for (std::size_t c = 0; c < kDspritesLatents; ++c) {
      const std::int64_t v = lc.at(r, c);
      if (v < 0 || static_cast<std::size_t>(v) >= kDspritesCardinality[c]) {
        throw FormatError("dsprites: latent class out of range at row " + std::to_string(r) + " column " +
                          std::to_string(c));
      }
    }
  }
  return lc;
}

void check_image_header(NpzReader& npz, const std::filesystem::path& path) {
  const NpyHeader h = npz.header("imgs");
  if (h.shape != Shape{kDspritesCount, kDspritesExtent, kDspritesExtent} || (h.dtype != "|u1" && h.dtype != "|b1")) {
    throw FormatError("dsprites: " + path.string() + " imgs is " + h.dtype + " " + shape_str(h.shape) +
                      ", expected |u1 [737280, 64, 64]");
  }
}

// Binarizes at 0.5 and, for extent 32, max-pools 2x2 blocks.
void convert_image(std::span<const std::uint8_t> src, std::size_t extent, std::uint8_t* dst) {
  if (extent == kDspritesExtent) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= 1 ? 1 : 0;
    return;
  }
  for (std::size_t y = 0; y < extent; ++y) {
    for (std::size_t x = 0; x < extent; ++x) {
      const std::uint8_t* p = src.data() + (2 * y) * kDspritesExtent + 2 * x;
      const std::uint8_t m = std::max({p[0], p[1], p[kDspritesExtent], p[kDspritesExtent + 1]});
      dst[y * extent + x] = m >= 1 ? 1 : 0;
    }
  }
}

void check_extent(std::size_t extent) {
  if (extent != 32 && extent != 64) throw std::invalid_argument("dsprites: extent must be 32 or 64, got " + std::to_string(extent));
}

FactorTable empty_sprite_factors() {
  FactorTable t;
  t.names = kFactorNames;
  t.cardinality = {kDspritesCardinality[2], kDspritesCardinality[3], kDspritesCardinality[4], kDspritesCardinality[5]};
  return t;
}

bool keep_for_condsprites(std::int64_t shape, std::int64_t pos_x, std::int64_t pos_y) {
  return (shape == kSquare && pos_y == static_cast<std::int64_t>(kCondspritesFixedIndex)) ||
         (shape == kEllipse && pos_x == static_cast<std::int64_t>(kCondspritesFixedIndex));
}

}  // namespace

std::size_t dsprites_row(std::size_t shape, std::size_t scale, std::size_t orientation, std::size_t pos_x,
                         std::size_t pos_y) {
  return (((shape * 6 + scale) * 40 + orientation) * 32 + pos_x) * 32 + pos_y;
}

ImageDataset load_dsprites(const std::filesystem::path& archive, std::size_t extent) {
  check_extent(extent);
  NpzReader npz(archive);
  check_image_header(npz, archive);
  const LatentClasses lc = read_latent_classes(npz, archive);
  ImageDataset d;
  d.name = "dsprites";
  d.extent = extent;
  d.factors = empty_sprite_factors();
  d.pixels.resize(kDspritesCount * extent * extent);
  d.factors.index.resize(kDspritesCount * 4);
  d.labels.resize(kDspritesCount);
  for (std::size_t r = 0; r < kDspritesCount; ++r) {
    d.labels[r] = static_cast<std::int32_t>(lc.at(r, kShapeCol));
    for (std::size_t f = 0; f < 4; ++f) d.factors.index[r * 4 + f] = static_cast<std::uint16_t>(lc.at(r, kScaleCol + f));
  }
  npz.stream_rows("imgs", [&](std::size_t row, std::span<const std::uint8_t> bytes) {
    convert_image(bytes, extent, d.pixels.data() + row * extent * extent);
  });
  return d;
}

ImageDataset build_condsprites(const ImageDataset& dsprites) {
  if (dsprites.size() != kDspritesCount || dsprites.labels.size() != kDspritesCount ||
      dsprites.factors.names != kFactorNames) {
    throw std::invalid_argument("build_condsprites: input is not the full dSprites dataset (got " +
                                std::to_string(dsprites.size()) + " images)");
  }
  std::vector<std::size_t> squares, ellipses;
  for (std::size_t r = 0; r < kDspritesCount; ++r) {
    const std::int32_t shape = dsprites.labels[r];
    if (!keep_for_condsprites(shape, dsprites.factors.at(r, 2), dsprites.factors.at(r, 3))) continue;
    (shape == kSquare ? squares : ellipses).push_back(r);
  }
  squares.insert(squares.end(), ellipses.begin(), ellipses.end());
  ImageDataset out = dsprites.subset(squares);
  out.name = "condsprites";
  return out;
}

ImageDataset load_condsprites(const std::filesystem::path& dsprites_archive, std::size_t extent) {
  check_extent(extent);
  NpzReader npz(dsprites_archive);
  check_image_header(npz, dsprites_archive);
  const LatentClasses lc = read_latent_classes(npz, dsprites_archive);
  std::vector<std::size_t> squares, ellipses;
  for (std::size_t r = 0; r < kDspritesCount; ++r) {
    const std::int64_t shape = lc.at(r, kShapeCol);
    if (!keep_for_condsprites(shape, lc.at(r, kPosXCol), lc.at(r, kPosYCol))) continue;
    (shape == kSquare ? squares : ellipses).push_back(r);
  }
  squares.insert(squares.end(), ellipses.begin(), ellipses.end());
  const std::vector<std::size_t>& keep = squares;

  std::vector<std::int64_t> slot(kDspritesCount, -1);
  for (std::size_t k = 0; k < keep.size(); ++k) slot[keep[k]] = static_cast<std::int64_t>(k);
  ImageDataset d;
  d.name = "condsprites";
  d.extent = extent;
  d.factors = empty_sprite_factors();
  d.pixels.resize(keep.size() * extent * extent);
  d.factors.index.resize(keep.size() * 4);
  d.labels.resize(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    d.labels[k] = static_cast<std::int32_t>(lc.at(keep[k], kShapeCol));
    for (std::size_t f = 0; f < 4; ++f) {
      d.factors.index[k * 4 + f] = static_cast<std::uint16_t>(lc.at(keep[k], kScaleCol + f));
    }
  }
  npz.stream_rows("imgs", [&](std::size_t row, std::span<const std::uint8_t> bytes) {
    if (slot[row] >= 0) convert_image(bytes, extent, d.pixels.data() + static_cast<std::size_t>(slot[row]) * extent * extent);
  });
  return d;
}

}  // namespace discond
