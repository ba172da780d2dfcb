// SPDX-License-Identifier: Apache-2.0
//
// Tensor container file: "DCVK1", u32 count, then per record a u32 name
// length, UTF-8 name, u32 rank, u32 extents and the raw f32 payload. All
// integers and floats little-endian. Records are written in name order.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "discond/tensor.hpp"

namespace discond {

using Archive = std::map<std::string, Tensor>;

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_archive(const Archive& archive);
Archive decode_archive(std::string_view bytes);

/// Writes through a temporary file and renames, so a crash mid-write never
/// clobbers an existing archive.
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Lookup that throws ArchiveError naming the missing entry.
const Tensor& archive_get(const Archive& archive, const std::string& name);

/// 64-bit counters stored exactly as four 16-bit limbs in a [4] f32 tensor,
/// least significant first.
void archive_put_u64(Archive& archive, const std::string& name, std::uint64_t value);
std::uint64_t archive_get_u64(const Archive& archive, const std::string& name);

}  // namespace discond
