// SPDX-License-Identifier: Apache-2.0
//
// Reader and writer for NumPy .npz archives (a zip of .npy files). Entries
// may be stored or deflated; zip64 records are understood. Large arrays can
// be streamed row by row without holding the whole payload.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "discond/tensor.hpp"

namespace discond {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NpyHeader {
  std::string dtype;  // e.g. "|u1", "<i8", "<f8"
  bool fortran_order = false;
  Shape shape;
  std::size_t word_size() const;
  std::size_t row_bytes() const;  // bytes per leading-axis slice
};

NpyHeader parse_npy_header(std::string_view text);
std::string format_npy_header(const NpyHeader& header);

class NpzReader {
 public:
  explicit NpzReader(const std::filesystem::path& path);

  /// Entry names with any ".npy" suffix removed.
  std::vector<std::string> names() const;
  bool contains(const std::string& name) const;

  NpyHeader header(const std::string& name);
  /// Whole payload (after the .npy header).
  std::vector<std::uint8_t> read(const std::string& name, NpyHeader* header = nullptr);
  /// Calls `row(i, bytes)` for each leading-axis slice in order.
  void stream_rows(const std::string& name,
                   const std::function<void(std::size_t, std::span<const std::uint8_t>)>& row);

 private:
  struct Entry {
    std::string name;
    std::uint16_t method = 0;
    std::uint32_t crc = 0;
    std::uint64_t compressed = 0;
    std::uint64_t uncompressed = 0;
    std::uint64_t local_offset = 0;
  };
  const Entry& entry(const std::string& name) const;
  /// Feeds decompressed bytes in chunks; verifies size and CRC at the end.
  void inflate_entry(const Entry& e, const std::function<void(std::span<const std::uint8_t>)>& sink);

  std::filesystem::path path_;
  std::ifstream file_;
  std::vector<Entry> entries_;
};

/// Streaming .npz writer. Each array is written with deflate (or stored) and
/// its local header patched once the sizes are known.
class NpzWriter {
 public:
  NpzWriter(const std::filesystem::path& path, bool compress);
  ~NpzWriter();
  NpzWriter(const NpzWriter&) = delete;
  NpzWriter& operator=(const NpzWriter&) = delete;

  void begin_array(const std::string& name, const NpyHeader& header);
  void write(std::span<const std::uint8_t> bytes);
  void end_array();
  /// Writes the central directory. Called by the destructor if omitted.
  void close();

  void add_array(const std::string& name, const NpyHeader& header, std::span<const std::uint8_t> bytes) {
    begin_array(name, header);
    write(bytes);
    end_array();
  }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace discond
