// SPDX-License-Identifier: Apache-2.0
//
// Image datasets with ground-truth factor tables: dSprites, CondSprites
// (squares with posY fixed, ellipses with posX fixed, no hearts) and MNIST.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "discond/archive.hpp"
#include "discond/random.hpp"
#include "discond/tensor.hpp"

namespace discond {

struct FactorTable {
  std::vector<std::string> names;
  std::vector<std::size_t> cardinality;
  std::vector<std::uint16_t> index;  // row-major [rows, factors]

  std::size_t factors() const noexcept { return names.size(); }
  std::size_t rows() const noexcept { return factors() == 0 ? 0 : index.size() / factors(); }
  std::size_t at(std::size_t row, std::size_t factor) const { return index[row * factors() + factor]; }
  /// Throws when an index exceeds its cardinality or sizes disagree.
  void validate() const;
};

struct ImageDataset {
  std::string name;
  std::size_t extent = 0;
  std::vector<std::uint8_t> pixels;  // [N, extent, extent]
  float pixel_scale = 1.0f;          // pixel value = byte * scale
  FactorTable factors;               // may have zero factors
  std::vector<std::int32_t> labels;  // empty when unlabelled

  std::size_t size() const noexcept { return extent == 0 ? 0 : pixels.size() / (extent * extent); }
  /// Images [B, 1, extent, extent] in [0, 1].
  Tensor images(std::span<const std::size_t> index) const;
  ImageDataset subset(std::span<const std::size_t> index) const;
  void validate() const;
};

// dSprites layout.
inline constexpr std::size_t kDspritesCount = 737280;
inline constexpr std::size_t kDspritesExtent = 64;
/// Latent class columns: color, shape, scale, orientation, posX, posY.
inline constexpr std::size_t kDspritesLatents = 6;
inline constexpr std::size_t kDspritesCardinality[kDspritesLatents] = {1, 3, 6, 40, 32, 32};
enum DspritesShape : std::int32_t { kSquare = 0, kEllipse = 1, kHeart = 2 };
/// Row of a latent-class combination; posY varies fastest.
std::size_t dsprites_row(std::size_t shape, std::size_t scale, std::size_t orientation, std::size_t pos_x,
                         std::size_t pos_y);

/// Full dSprites from the published .npz. Factors: scale, orientation, posX,
/// posY; labels: shape. extent 32 max-pools each 2x2 block.
ImageDataset load_dsprites(const std::filesystem::path& archive, std::size_t extent = 32);
/// Filters an in-memory full dSprites dataset.
ImageDataset build_condsprites(const ImageDataset& dsprites);
/// Same result as build_condsprites(load_dsprites(...)) while decoding only
/// the retained images.
ImageDataset load_condsprites(const std::filesystem::path& dsprites_archive, std::size_t extent = 32);
inline constexpr std::size_t kCondspritesFixedIndex = 16;

/// CondSprites cache in the tensor container: images, labels, factors.
Archive dataset_to_archive(const ImageDataset& data);
ImageDataset dataset_from_archive(const Archive& archive, const std::string& name);
/// One CSV row per example: index,label,<factor names...>.
void write_factor_csv(const std::filesystem::path& path, const ImageDataset& data);

struct MnistSplits {
  ImageDataset train;
  ImageDataset test;
};
/// Reads an IDX image/label pair (optionally gzipped) and zero-pads 28 -> 32.
ImageDataset load_mnist_files(const std::filesystem::path& images, const std::filesystem::path& labels,
                              const std::string& name);
/// Looks for the four standard file names, with or without ".gz".
MnistSplits load_mnist(const std::filesystem::path& dir);

/// Seeded permutation of [0, n) split into batches; the last batch may be
/// short.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, RandomSource rng);

/// Writes a procedurally rendered archive in the dSprites .npz layout (same
/// arrays, dtypes, shapes and latent ordering) for environments without the
/// published file.
void write_synthetic_dsprites(const std::filesystem::path& path);

}  // namespace discond
