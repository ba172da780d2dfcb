// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "discond/data.hpp"

namespace discond {

void FactorTable::validate() const {
  if (cardinality.size() != names.size()) throw std::invalid_argument("factor table: names and cardinalities differ in count");
  if (factors() == 0) return;
  if (index.size() % factors() != 0) throw std::invalid_argument("factor table: ragged index array");
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t f = 0; f < factors(); ++f) {
      if (at(r, f) >= cardinality[f]) {
        throw std::invalid_argument("factor table: row " + std::to_string(r) + " factor " + names[f] + " index " +
                                    std::to_string(at(r, f)) + " >= " + std::to_string(cardinality[f]));
      }
    }
  }
}

void ImageDataset::validate() const {
  if (extent == 0 || pixels.empty() || pixels.size() % (extent * extent) != 0) {
    throw std::invalid_argument("dataset " + name + ": empty or ragged image array");
  }
  factors.validate();
  if (factors.factors() != 0 && factors.rows() != size()) {
    throw std::invalid_argument("dataset " + name + ": factor rows " + std::to_string(factors.rows()) +
                                " vs images " + std::to_string(size()));
  }
  if (!labels.empty() && labels.size() != size()) {
    throw std::invalid_argument("dataset " + name + ": label count " + std::to_string(labels.size()) +
                                " vs images " + std::to_string(size()));
  }
}

Tensor ImageDataset::images(std::span<const std::size_t> index) const {
  const std::size_t plane = extent * extent;
  Tensor out({index.size(), 1, extent, extent});
  auto v = out.values();
  for (std::size_t b = 0; b < index.size(); ++b) {
    if (index[b] >= size()) throw std::out_of_range("dataset " + name + ": index " + std::to_string(index[b]) + " out of range");
    const std::uint8_t* src = pixels.data() + index[b] * plane;
    float* dst = v.data() + b * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(src[i]) * pixel_scale;
  }
  return out;
}

ImageDataset ImageDataset::subset(std::span<const std::size_t> index) const {
  ImageDataset out;
  out.name = name;
  out.extent = extent;
  out.pixel_scale = pixel_scale;
  out.factors.names = factors.names;
  out.factors.cardinality = factors.cardinality;
  const std::size_t plane = extent * extent, nf = factors.factors();
  out.pixels.resize(index.size() * plane);
  out.factors.index.resize(index.size() * nf);
  for (std::size_t k = 0; k < index.size(); ++k) {
    const std::size_t i = index[k];
    if (i >= size()) throw std::out_of_range("dataset " + name + ": index " + std::to_string(i) + " out of range");
    std::copy_n(pixels.data() + i * plane, plane, out.pixels.data() + k * plane);
    std::copy_n(factors.index.data() + i * nf, nf, out.factors.index.data() + k * nf);
    if (!labels.empty()) out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, RandomSource rng) {
  if (batch_size == 0) throw std::invalid_argument("batches: batch size must be positive");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  return out;
}

Archive dataset_to_archive(const ImageDataset& data) {
  data.validate();
  Archive a;
  const std::size_t n = data.size();
  std::vector<float> px(data.pixels.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(data.pixels[i]) * data.pixel_scale;
  a.emplace("images", Tensor({n, 1, data.extent, data.extent}, std::move(px)));
  a.emplace("pixel_scale", Tensor::scalar(data.pixel_scale));
  if (!data.labels.empty()) {
    a.emplace("labels", Tensor({n}, std::vector<float>(data.labels.begin(), data.labels.end())));
  }
  const std::size_t nf = data.factors.factors();
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<float> col(n);
    for (std::size_t r = 0; r < n; ++r) col[r] = static_cast<float>(data.factors.at(r, f));
    char key[32];
    std::snprintf(key, sizeof key, "factor.%02zu.", f);
    a.emplace(key + data.factors.names[f], Tensor({n}, std::move(col)));
  }
  std::vector<float> card(data.factors.cardinality.begin(), data.factors.cardinality.end());
  a.emplace("factor_cardinality", Tensor({nf}, std::move(card)));
  return a;
}

ImageDataset dataset_from_archive(const Archive& archive, const std::string& name) {
  ImageDataset d;
  d.name = name;
  const Tensor& images = archive_get(archive, "images");
  if (images.rank() != 4 || images.size(1) != 1 || images.size(2) != images.size(3)) {
    throw ArchiveError("dataset archive: images must be [N, 1, H, H], got " + shape_str(images.shape()));
  }
  d.extent = images.size(2);
  d.pixel_scale = archive_get(archive, "pixel_scale").item();
  d.pixels.resize(images.numel());
  for (std::size_t i = 0; i < d.pixels.size(); ++i) {
    d.pixels[i] = static_cast<std::uint8_t>(std::lround(images.values()[i] / d.pixel_scale));
  }
  if (auto it = archive.find("labels"); it != archive.end()) {
    for (float v : it->second.values()) d.labels.push_back(static_cast<std::int32_t>(v));
  }
  const Tensor& card = archive_get(archive, "factor_cardinality");
  const std::size_t n = images.size(0), nf = card.numel();
  d.factors.index.resize(n * nf);
  for (const auto& [key, t] : archive) {
    if (!key.starts_with("factor.")) continue;
    const std::size_t f = std::stoul(key.substr(7, 2));
    if (f >= nf || t.numel() != n) throw ArchiveError("dataset archive: bad factor record '" + key + "'");
    d.factors.names.push_back(key.substr(10));
    d.factors.cardinality.push_back(static_cast<std::size_t>(card.values()[f]));
    for (std::size_t r = 0; r < n; ++r) d.factors.index[r * nf + f] = static_cast<std::uint16_t>(t.values()[r]);
  }
  if (d.factors.names.size() != nf) throw ArchiveError("dataset archive: factor records do not match cardinalities");
  d.validate();
  return d;
}

void write_factor_csv(const std::filesystem::path& path, const ImageDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "index,label";
  for (const auto& n : data.factors.names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << r << ',' << (data.labels.empty() ? -1 : data.labels[r]);
    for (std::size_t f = 0; f < data.factors.factors(); ++f) out << ',' << data.factors.at(r, f);
    out << '\n';
  }
}

}  // namespace discond
