// SPDX-License-Identifier: Apache-2.0
#include "discond/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace discond {
namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

constexpr std::string_view kMagic = "DCVK1";

void put_u32(std::string& out, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  out.append(bytes, 4);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ArchiveError("archive: truncated while reading " + std::string(what) + " at byte " +
                         std::to_string(pos_));
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    std::memcpy(&v, take(4, what).data(), 4);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_archive(const Archive& archive) {
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(archive.size()));
  for (const auto& [name, tensor] : archive) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const Shape& shape = tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) put_u32(out, static_cast<std::uint32_t>(e));
    const auto v = tensor.values();
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  return out;
}

Archive decode_archive(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size(), "magic") != kMagic) throw ArchiveError("archive: bad magic, expected DCVK1");
  const std::uint32_t count = in.u32("record count");
  Archive archive;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t name_len = in.u32("name length");
    std::string name(in.take(name_len, "name"));
    const std::uint32_t rank = in.u32("rank");
    Shape shape(rank);
    for (auto& e : shape) e = in.u32("extent");
    std::vector<float> values(shape_numel(shape));
    const auto payload = in.take(values.size() * sizeof(float), "payload");
    std::memcpy(values.data(), payload.data(), payload.size());
    if (!archive.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
      throw ArchiveError("archive: duplicate record '" + name + "'");
    }
  }
  if (!in.done()) throw ArchiveError("archive: trailing bytes after the last record");
  return archive;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  const std::string bytes = encode_archive(archive);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError("archive: cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ArchiveError("archive: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("archive: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_archive(buf.str());
}

const Tensor& archive_get(const Archive& archive, const std::string& name) {
  auto it = archive.find(name);
  if (it == archive.end()) throw ArchiveError("archive: missing record '" + name + "'");
  return it->second;
}

void archive_put_u64(Archive& archive, const std::string& name, std::uint64_t value) {
  std::vector<float> limbs(4);
  for (int i = 0; i < 4; ++i) limbs[i] = static_cast<float>((value >> (16 * i)) & 0xffffu);
  archive.insert_or_assign(name, Tensor({4}, std::move(limbs)));
}

std::uint64_t archive_get_u64(const Archive& archive, const std::string& name) {
  const Tensor& t = archive_get(archive, name);
  if (t.numel() != 4) throw ArchiveError("archive: record '" + name + "' is not a 64-bit counter");
  std::uint64_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint64_t>(t.values()[i]) << (16 * i);
  return value;
}

}  // namespace discond
