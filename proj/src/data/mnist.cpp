// SPDX-License-Identifier: Apache-2.0
#include <zlib.h>

#include <stdexcept>

#include "discond/data.hpp"
#include "discond/npz.hpp"

namespace discond {
namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;
constexpr std::size_t kRaw = 28;
constexpr std::size_t kPadded = 32;

// gzread passes uncompressed files through unchanged.
std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw FormatError("mnist: cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 16);
  int n;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) out.insert(out.end(), buf.begin(), buf.begin() + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError("mnist: read error in " + path.string());
  return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | b[off + 3];
}

std::filesystem::path find_file(const std::filesystem::path& dir, const std::string& base) {
  for (const std::string& name : {base, base + ".gz"}) {
    if (std::filesystem::exists(dir / name)) return dir / name;
  }
  // Some mirrors use a dot before "idx".
  std::string dotted = base;
  if (auto pos = dotted.find("-idx"); pos != std::string::npos) dotted[pos] = '.';
  for (const std::string& name : {dotted, dotted + ".gz"}) {
    if (std::filesystem::exists(dir / name)) return dir / name;
  }
  throw FormatError("mnist: " + base + " not found in " + dir.string());
}

}  // namespace

ImageDataset load_mnist_files(const std::filesystem::path& images, const std::filesystem::path& labels,
                              const std::string& name) {
  const auto img = slurp(images);
  const auto lab = slurp(labels);
  if (img.size() < 16 || be32(img, 0) != kImageMagic) {
    throw FormatError("mnist: " + images.string() + " has bad magic (expected 2051)");
  }
  if (lab.size() < 8 || be32(lab, 0) != kLabelMagic) {
    throw FormatError("mnist: " + labels.string() + " has bad magic (expected 2049)");
  }
  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  if (rows != kRaw || cols != kRaw) {
    throw FormatError("mnist: expected 28x28 images, got " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (img.size() != 16 + n * kRaw * kRaw) throw FormatError("mnist: " + images.string() + " size does not match header");
  if (be32(lab, 4) != n || lab.size() != 8 + n) throw FormatError("mnist: label count does not match image count");
  ImageDataset d;
  d.name = name;
  d.extent = kPadded;
  d.pixel_scale = 1.0f / 255.0f;
  d.pixels.assign(n * kPadded * kPadded, 0);
  d.labels.resize(n);
  constexpr std::size_t pad = (kPadded - kRaw) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < kRaw; ++y) {
      const std::uint8_t* src = img.data() + 16 + (i * kRaw + y) * kRaw;
      std::copy_n(src, kRaw, d.pixels.data() + (i * kPadded + y + pad) * kPadded + pad);
    }
    if (lab[8 + i] > 9) throw FormatError("mnist: label " + std::to_string(lab[8 + i]) + " out of range");
    d.labels[i] = lab[8 + i];
  }
  return d;
}

MnistSplits load_mnist(const std::filesystem::path& dir) {
  return {load_mnist_files(find_file(dir, "train-images-idx3-ubyte"), find_file(dir, "train-labels-idx1-ubyte"), "mnist-train"),
          load_mnist_files(find_file(dir, "t10k-images-idx3-ubyte"), find_file(dir, "t10k-labels-idx1-ubyte"), "mnist-test")};
}

}  // namespace discond
