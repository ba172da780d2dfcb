// SPDX-License-Identifier: Apache-2.0
#include "discond/npz.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <regex>

namespace discond {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint32_t kEnd64Sig = 0x06064b50;
constexpr std::uint32_t kEnd64LocatorSig = 0x07064b50;
constexpr std::size_t kChunk = 1 << 20;

std::uint16_t rd16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t rd32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint64_t rd64(const std::uint8_t* p) {
  return static_cast<std::uint64_t>(rd32(p)) | (static_cast<std::uint64_t>(rd32(p + 4)) << 32);
}

void wr16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xff);
  out += static_cast<char>(v >> 8);
}
void wr32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::string strip_npy(const std::string& name) {
  return name.size() > 4 && name.ends_with(".npy") ? name.substr(0, name.size() - 4) : name;
}

}  // namespace

std::size_t NpyHeader::word_size() const {
  if (dtype.size() < 3) throw FormatError("npy: unsupported dtype '" + dtype + "'");
  return static_cast<std::size_t>(std::stoul(dtype.substr(2)));
}

std::size_t NpyHeader::row_bytes() const {
  std::size_t n = word_size();
  for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
  return n;
}

NpyHeader parse_npy_header(std::string_view text) {
  const std::string s(text);
  NpyHeader h;
  std::smatch m;
  if (!std::regex_search(s, m, std::regex(R"('descr'\s*:\s*'([^']+)')"))) {
    throw FormatError("npy: header lacks 'descr'");
  }
  h.dtype = m[1];
  if (!std::regex_search(s, m, std::regex(R"('fortran_order'\s*:\s*(True|False))"))) {
    throw FormatError("npy: header lacks 'fortran_order'");
  }
  h.fortran_order = m[1] == "True";
  if (!std::regex_search(s, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw FormatError("npy: header lacks 'shape'");
  }
  const std::string dims = m[1];
  std::regex num(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
    h.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
  }
  return h;
}

std::string format_npy_header(const NpyHeader& header) {
  std::string dict = "{'descr': '" + header.dtype + "', 'fortran_order': " +
                     (header.fortran_order ? "True" : "False") + ", 'shape': (";
  for (std::size_t i = 0; i < header.shape.size(); ++i) {
    dict += std::to_string(header.shape[i]);
    if (header.shape.size() == 1 || i + 1 < header.shape.size()) dict += ",";
    if (i + 1 < header.shape.size()) dict += " ";
  }
  dict += "), }";
  std::size_t total = 10 + dict.size() + 1;
  dict.append((64 - total % 64) % 64, ' ');
  dict += '\n';
  std::string out("\x93NUMPY\x01\x00", 8);
  wr16(out, static_cast<std::uint16_t>(dict.size()));
  return out + dict;
}

NpzReader::NpzReader(const std::filesystem::path& path) : path_(path), file_(path, std::ios::binary) {
  if (!file_) throw FormatError("npz: cannot open " + path.string());
  file_.seekg(0, std::ios::end);
  const std::uint64_t size = static_cast<std::uint64_t>(file_.tellg());
  const std::uint64_t tail = std::min<std::uint64_t>(size, 65557);
  std::vector<std::uint8_t> buf(tail);
  file_.seekg(static_cast<std::streamoff>(size - tail));
  file_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(tail));
  std::ptrdiff_t eocd = -1;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(tail) - 22; i >= 0; --i) {
    if (rd32(buf.data() + i) == kEndSig) {
      eocd = i;
      break;
    }
  }
  if (eocd < 0) throw FormatError("npz: " + path.string() + " is not a zip archive (no end record)");
  std::uint64_t count = rd16(buf.data() + eocd + 10);
  std::uint64_t cd_size = rd32(buf.data() + eocd + 12);
  std::uint64_t cd_offset = rd32(buf.data() + eocd + 16);
  if (eocd >= 20 && rd32(buf.data() + eocd - 20) == kEnd64LocatorSig) {
    const std::uint64_t end64 = rd64(buf.data() + eocd - 20 + 8);
    std::uint8_t rec[56];
    file_.seekg(static_cast<std::streamoff>(end64));
    file_.read(reinterpret_cast<char*>(rec), sizeof rec);
    if (!file_ || rd32(rec) != kEnd64Sig) throw FormatError("npz: bad zip64 end record");
    count = rd64(rec + 32);
    cd_size = rd64(rec + 40);
    cd_offset = rd64(rec + 48);
  }
  std::vector<std::uint8_t> cd(cd_size);
  file_.seekg(static_cast<std::streamoff>(cd_offset));
  file_.read(reinterpret_cast<char*>(cd.data()), static_cast<std::streamsize>(cd_size));
  if (!file_) throw FormatError("npz: truncated central directory");
  std::size_t pos = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    if (pos + 46 > cd.size() || rd32(cd.data() + pos) != kCentralSig) throw FormatError("npz: corrupt central directory");
    const std::uint8_t* p = cd.data() + pos;
    Entry e;
    e.method = rd16(p + 10);
    e.crc = rd32(p + 16);
    e.compressed = rd32(p + 20);
    e.uncompressed = rd32(p + 24);
    const std::uint16_t nlen = rd16(p + 28), elen = rd16(p + 30), clen = rd16(p + 32);
    e.local_offset = rd32(p + 42);
    e.name.assign(reinterpret_cast<const char*>(p + 46), nlen);
    // Zip64 extra field carries whichever sizes overflowed, in fixed order.
    const std::uint8_t* extra = p + 46 + nlen;
    for (std::size_t off = 0; off + 4 <= elen;) {
      const std::uint16_t id = rd16(extra + off), len = rd16(extra + off + 2);
      if (id == 0x0001) {
        const std::uint8_t* q = extra + off + 4;
        if (e.uncompressed == 0xffffffffu) e.uncompressed = rd64(q), q += 8;
        if (e.compressed == 0xffffffffu) e.compressed = rd64(q), q += 8;
        if (e.local_offset == 0xffffffffu) e.local_offset = rd64(q);
      }
      off += 4u + len;
    }
    entries_.push_back(std::move(e));
    pos += 46u + nlen + elen + clen;
  }
}

std::vector<std::string> NpzReader::names() const {
  std::vector<std::string> out;
  for (const Entry& e : entries_) out.push_back(strip_npy(e.name));
  return out;
}

bool NpzReader::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return strip_npy(e.name) == name; });
}

const NpzReader::Entry& NpzReader::entry(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (strip_npy(e.name) == name) return e;
  }
  throw FormatError("npz: " + path_.string() + " has no array '" + name + "'");
}

void NpzReader::inflate_entry(const Entry& e, const std::function<void(std::span<const std::uint8_t>)>& sink) {
  std::uint8_t local[30];
  file_.clear();
  file_.seekg(static_cast<std::streamoff>(e.local_offset));
  file_.read(reinterpret_cast<char*>(local), sizeof local);
  if (!file_ || rd32(local) != kLocalSig) throw FormatError("npz: bad local header for '" + e.name + "'");
  const std::uint64_t data = e.local_offset + 30 + rd16(local + 26) + rd16(local + 28);
  file_.seekg(static_cast<std::streamoff>(data));

  std::vector<std::uint8_t> in(kChunk), out(kChunk);
  std::uint64_t remaining = e.compressed, produced = 0;
  uLong crc = crc32(0L, Z_NULL, 0);
  auto emit = [&](const std::uint8_t* p, std::size_t n) {
    crc = crc32_z(crc, p, n);
    produced += n;
    sink({p, n});
  };
  if (e.method == 0) {
    while (remaining > 0) {
      const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, kChunk));
      file_.read(reinterpret_cast<char*>(in.data()), static_cast<std::streamsize>(n));
      if (!file_) throw FormatError("npz: truncated entry '" + e.name + "'");
      emit(in.data(), n);
      remaining -= n;
    }
  } else if (e.method == 8) {
    struct Inflater {
      z_stream zs{};
      Inflater() {
        if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("npz: inflate init failed");
      }
      ~Inflater() { inflateEnd(&zs); }
    } inflater;
    z_stream& zs = inflater.zs;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
      if (zs.avail_in == 0) {
        if (remaining == 0) throw FormatError("npz: deflate stream of '" + e.name + "' ends early");
        const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, kChunk));
        file_.read(reinterpret_cast<char*>(in.data()), static_cast<std::streamsize>(n));
        if (!file_) throw FormatError("npz: truncated entry '" + e.name + "'");
        remaining -= n;
        zs.next_in = in.data();
        zs.avail_in = static_cast<uInt>(n);
      }
      zs.next_out = out.data();
      zs.avail_out = static_cast<uInt>(out.size());
      rc = inflate(&zs, Z_NO_FLUSH);
      if (rc != Z_OK && rc != Z_STREAM_END) throw FormatError("npz: corrupt deflate data in '" + e.name + "'");
      emit(out.data(), out.size() - zs.avail_out);
    }
  } else {
    throw FormatError("npz: entry '" + e.name + "' uses unsupported compression method " + std::to_string(e.method));
  }
  if (produced != e.uncompressed) {
    throw FormatError("npz: entry '" + e.name + "' expanded to " + std::to_string(produced) + " bytes, expected " +
                      std::to_string(e.uncompressed));
  }
  if (static_cast<std::uint32_t>(crc) != e.crc) throw FormatError("npz: checksum mismatch in '" + e.name + "'");
}

void NpzReader::stream_rows(const std::string& name,
                            const std::function<void(std::size_t, std::span<const std::uint8_t>)>& row) {
  const Entry& e = entry(name);
  std::vector<std::uint8_t> head;     // bytes before the header is complete
  std::vector<std::uint8_t> partial;  // a row split across chunks
  NpyHeader header;
  bool have_header = false;
  std::size_t row_bytes = 0, next_row = 0;
  auto consume = [&](std::span<const std::uint8_t> data) {
    if (!partial.empty()) {
      const std::size_t take = std::min(row_bytes - partial.size(), data.size());
      partial.insert(partial.end(), data.begin(), data.begin() + static_cast<std::ptrdiff_t>(take));
      data = data.subspan(take);
      if (partial.size() < row_bytes) return;
      row(next_row++, partial);
      partial.clear();
    }
    while (data.size() >= row_bytes) {
      row(next_row++, data.first(row_bytes));
      data = data.subspan(row_bytes);
    }
    partial.assign(data.begin(), data.end());
  };
  inflate_entry(e, [&](std::span<const std::uint8_t> chunk) {
    if (have_header) {
      consume(chunk);
      return;
    }
    head.insert(head.end(), chunk.begin(), chunk.end());
    if (head.size() < 12) return;
    if (std::memcmp(head.data(), "\x93NUMPY", 6) != 0) throw FormatError("npz: '" + name + "' is not an .npy array");
    const std::size_t prefix = head[6] == 1 ? 10 : 12;
    const std::size_t hlen = head[6] == 1 ? rd16(head.data() + 8) : rd32(head.data() + 8);
    if (head.size() < prefix + hlen) return;
    header = parse_npy_header(std::string_view(reinterpret_cast<const char*>(head.data() + prefix), hlen));
    if (header.fortran_order) throw FormatError("npz: '" + name + "' is Fortran-ordered");
    row_bytes = header.row_bytes();
    if (row_bytes == 0) throw FormatError("npz: '" + name + "' has empty rows");
    have_header = true;
    consume(std::span<const std::uint8_t>(head).subspan(prefix + hlen));
    head.clear();
  });
  const std::size_t expected = header.shape.empty() ? 1 : header.shape[0];
  if (!have_header || next_row != expected || !partial.empty()) {
    throw FormatError("npz: '" + name + "' holds " + std::to_string(next_row) + " rows, header declares " +
                      std::to_string(expected));
  }
}

NpyHeader NpzReader::header(const std::string& name) {
  struct Done {};
  const Entry& e = entry(name);
  std::vector<std::uint8_t> head;
  NpyHeader h;
  try {
    inflate_entry(e, [&](std::span<const std::uint8_t> chunk) {
      head.insert(head.end(), chunk.begin(), chunk.end());
      if (head.size() < 12) return;
      if (std::memcmp(head.data(), "\x93NUMPY", 6) != 0) throw FormatError("npz: '" + name + "' is not an .npy array");
      const std::size_t prefix = head[6] == 1 ? 10 : 12;
      const std::size_t hlen = head[6] == 1 ? rd16(head.data() + 8) : rd32(head.data() + 8);
      if (head.size() < prefix + hlen) return;
      h = parse_npy_header(std::string_view(reinterpret_cast<const char*>(head.data() + prefix), hlen));
      throw Done{};
    });
  } catch (const Done&) {
    return h;
  }
  throw FormatError("npz: '" + name + "' has no complete .npy header");
}

std::vector<std::uint8_t> NpzReader::read(const std::string& name, NpyHeader* header) {
  const Entry& e = entry(name);
  std::vector<std::uint8_t> all;
  all.reserve(static_cast<std::size_t>(e.uncompressed));
  inflate_entry(e, [&](std::span<const std::uint8_t> chunk) { all.insert(all.end(), chunk.begin(), chunk.end()); });
  if (all.size() < 10 || std::memcmp(all.data(), "\x93NUMPY", 6) != 0) {
    throw FormatError("npz: '" + name + "' is not an .npy array");
  }
  const std::size_t prefix = all[6] == 1 ? 10 : 12;
  const std::size_t hlen = all[6] == 1 ? rd16(all.data() + 8) : rd32(all.data() + 8);
  const NpyHeader h = parse_npy_header(std::string_view(reinterpret_cast<const char*>(all.data() + prefix), hlen));
  if (all.size() - prefix - hlen != shape_numel(h.shape) * h.word_size()) {
    throw FormatError("npz: '" + name + "' payload size does not match shape " + shape_str(h.shape));
  }
  if (header) *header = h;
  all.erase(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(prefix + hlen));
  return all;
}

struct NpzWriter::Impl {
  struct Record {
    std::string name;
    std::uint32_t crc, compressed, uncompressed, offset;
  };
  std::ofstream out;
  bool compress;
  bool open = false;
  bool closed = false;
  z_stream zs{};
  Record current{};
  uLong crc = 0;
  std::uint64_t usize = 0, csize = 0;
  std::vector<Record> records;
  std::vector<std::uint8_t> buf = std::vector<std::uint8_t>(kChunk);

  void put(const std::uint8_t* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    csize += n;
  }

  void feed(const std::uint8_t* p, std::size_t n, int flush) {
    if (!compress) {
      if (n) put(p, n);
      return;
    }
    zs.next_in = const_cast<Bytef*>(p);
    zs.avail_in = static_cast<uInt>(n);
    do {
      zs.next_out = buf.data();
      zs.avail_out = static_cast<uInt>(buf.size());
      if (deflate(&zs, flush) == Z_STREAM_ERROR) throw FormatError("npz: deflate failed");
      put(buf.data(), buf.size() - zs.avail_out);
    } while (zs.avail_out == 0);
  }
};

NpzWriter::NpzWriter(const std::filesystem::path& path, bool compress) : impl_(std::make_unique<Impl>()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw FormatError("npz: cannot open " + path.string() + " for writing");
  impl_->compress = compress;
}

NpzWriter::~NpzWriter() {
  try {
    close();
  } catch (...) {
  }
}

void NpzWriter::begin_array(const std::string& name, const NpyHeader& header) {
  Impl& w = *impl_;
  if (w.open) throw std::logic_error("npz: previous array still open");
  const std::string entry = name + ".npy";
  const auto offset = static_cast<std::uint64_t>(w.out.tellp());
  if (offset > 0xffffffffu) throw FormatError("npz: archive exceeds 4 GiB (zip64 output unsupported)");
  w.current = {entry, 0, 0, 0, static_cast<std::uint32_t>(offset)};
  std::string local;
  wr32(local, kLocalSig);
  wr16(local, 20);
  wr16(local, 0);
  wr16(local, w.compress ? 8 : 0);
  wr16(local, 0);
  wr16(local, 0x21);
  wr32(local, 0);  // crc, sizes patched in end_array
  wr32(local, 0);
  wr32(local, 0);
  wr16(local, static_cast<std::uint16_t>(entry.size()));
  wr16(local, 0);
  local += entry;
  w.out.write(local.data(), static_cast<std::streamsize>(local.size()));
  w.crc = crc32(0L, Z_NULL, 0);
  w.usize = 0;
  w.csize = 0;
  if (w.compress) {
    w.zs = z_stream{};
    if (deflateInit2(&w.zs, Z_BEST_SPEED, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
      throw FormatError("npz: deflate init failed");
    }
  }
  w.open = true;
  const std::string npy = format_npy_header(header);
  write({reinterpret_cast<const std::uint8_t*>(npy.data()), npy.size()});
}

void NpzWriter::write(std::span<const std::uint8_t> bytes) {
  Impl& w = *impl_;
  if (!w.open) throw std::logic_error("npz: no array open");
  w.crc = crc32_z(w.crc, bytes.data(), bytes.size());
  w.usize += bytes.size();
  w.feed(bytes.data(), bytes.size(), Z_NO_FLUSH);
}

void NpzWriter::end_array() {
  Impl& w = *impl_;
  if (!w.open) throw std::logic_error("npz: no array open");
  if (w.compress) {
    w.feed(nullptr, 0, Z_FINISH);
    deflateEnd(&w.zs);
  }
  if (w.usize > 0xffffffffu || w.csize > 0xffffffffu) throw FormatError("npz: array exceeds 4 GiB");
  w.current.crc = static_cast<std::uint32_t>(w.crc);
  w.current.compressed = static_cast<std::uint32_t>(w.csize);
  w.current.uncompressed = static_cast<std::uint32_t>(w.usize);
  const auto end = w.out.tellp();
  std::string patch;
  wr32(patch, w.current.crc);
  wr32(patch, w.current.compressed);
  wr32(patch, w.current.uncompressed);
  w.out.seekp(static_cast<std::streamoff>(w.current.offset) + 14);
  w.out.write(patch.data(), static_cast<std::streamsize>(patch.size()));
  w.out.seekp(end);
  w.records.push_back(w.current);
  w.open = false;
}

void NpzWriter::close() {
  Impl& w = *impl_;
  if (w.closed) return;
  if (w.open) end_array();
  const auto cd_offset = static_cast<std::uint32_t>(w.out.tellp());
  std::string cd;
  for (const auto& r : w.records) {
    wr32(cd, kCentralSig);
    wr16(cd, 20);
    wr16(cd, 20);
    wr16(cd, 0);
    wr16(cd, w.compress ? 8 : 0);
    wr16(cd, 0);
    wr16(cd, 0x21);
    wr32(cd, r.crc);
    wr32(cd, r.compressed);
    wr32(cd, r.uncompressed);
    wr16(cd, static_cast<std::uint16_t>(r.name.size()));
    wr16(cd, 0);
    wr16(cd, 0);
    wr16(cd, 0);
    wr16(cd, 0);
    wr32(cd, 0);
    wr32(cd, r.offset);
    cd += r.name;
  }
  std::string end;
  wr32(end, kEndSig);
  wr16(end, 0);
  wr16(end, 0);
  wr16(end, static_cast<std::uint16_t>(w.records.size()));
  wr16(end, static_cast<std::uint16_t>(w.records.size()));
  wr32(end, static_cast<std::uint32_t>(cd.size()));
  wr32(end, cd_offset);
  wr16(end, 0);
  w.out.write(cd.data(), static_cast<std::streamsize>(cd.size()));
  w.out.write(end.data(), static_cast<std::streamsize>(end.size()));
  w.out.flush();
  if (!w.out) throw FormatError("npz: write failed");
  w.out.close();
  w.closed = true;
}

}  // namespace discond
