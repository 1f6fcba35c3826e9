#include "apksecrets/zip_archive.hpp"

#include <zlib.h>

#include <algorithm>

#include "apksecrets/error.hpp"
#include "byte_reader.hpp"

namespace apksecrets {
namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralDirSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralDirSig = 0x06054b50;
constexpr std::uint32_t kZip64LocatorSig = 0x07064b50;
constexpr std::uint32_t kZip64EndSig = 0x06064b50;
constexpr std::size_t kEocdSize = 22;
constexpr std::size_t kCentralHeaderSize = 46;
constexpr std::size_t kLocalHeaderSize = 30;

[[noreturn]] void bad_archive(const std::string& what) {
  throw Error(ErrorCode::NotAnArchive, what);
}

struct DirectoryLocation {
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint64_t count = 0;
};

DirectoryLocation locate_central_directory(const detail::ByteReader& r) {
  if (r.size() < kEocdSize) bad_archive("file shorter than an end-of-central-directory record");
  const std::size_t lowest = r.size() >= kEocdSize + 0xffff ? r.size() - kEocdSize - 0xffff : 0;
  for (std::size_t pos = r.size() - kEocdSize + 1; pos-- > lowest;) {
    if (r.u32(pos) != kEndOfCentralDirSig) continue;
    const std::uint16_t comment_len = r.u16(pos + 20);
    if (pos + kEocdSize + comment_len > r.size()) continue;

    DirectoryLocation loc{r.u32(pos + 16), r.u32(pos + 12), r.u16(pos + 10)};
    const bool zip64 = loc.offset == 0xffffffffu || loc.size == 0xffffffffu || loc.count == 0xffffu;
    if (zip64 && pos >= 20 && r.u32(pos - 20) == kZip64LocatorSig) {
      const std::uint64_t end64 = r.u64(pos - 20 + 8);
      if (!r.in_bounds(end64, 56) || r.u32(end64) != kZip64EndSig) {
        bad_archive("zip64 end record out of bounds");
      }
      loc.count = r.u64(end64 + 32);
      loc.size = r.u64(end64 + 40);
      loc.offset = r.u64(end64 + 48);
    }
    if (!r.in_bounds(loc.offset, loc.size)) bad_archive("central directory out of bounds");
    return loc;
  }
  bad_archive("no end-of-central-directory record");
}

void apply_zip64_extra(ByteView extra, ZipEntry& e, bool need_usize, bool need_csize,
                       bool need_offset) {
  detail::ByteReader r(extra, ErrorCode::NotAnArchive);
  std::uint64_t pos = 0;
  while (r.in_bounds(pos, 4)) {
    const std::uint16_t id = r.u16(pos);
    const std::uint16_t len = r.u16(pos + 2);
    pos += 4;
    if (!r.in_bounds(pos, len)) return;
    if (id == 0x0001) {
      std::uint64_t p = pos;
      if (need_usize && p + 8 <= pos + len) { e.uncompressed_size = r.u64(p); p += 8; }
      if (need_csize && p + 8 <= pos + len) { e.compressed_size = r.u64(p); p += 8; }
      if (need_offset && p + 8 <= pos + len) { e.local_header_offset = r.u64(p); }
      return;
    }
    pos += len;
  }
}

Bytes inflate_raw(ByteView in, std::uint64_t expected) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) bad_archive("inflateInit2 failed");
  struct Guard {
    z_stream* s;
    ~Guard() { inflateEnd(s); }
  } guard{&zs};

  Bytes out;
  // Grow as data actually arrives; the declared size is untrusted.
  out.resize(static_cast<std::size_t>(std::min<std::uint64_t>(expected, 1u << 16)) + 1);
  zs.next_in = const_cast<Bytef*>(in.data());
  std::size_t produced = 0;
  std::size_t remaining_in = in.size();
  for (;;) {
    if (produced == out.size()) {
      if (out.size() > expected) bad_archive("entry inflates beyond its declared size");
      out.resize(std::min<std::size_t>(out.size() * 2, static_cast<std::size_t>(expected) + 1));
    }
    const uInt chunk_in = static_cast<uInt>(std::min<std::size_t>(remaining_in, 1u << 30));
    zs.avail_in = chunk_in;
    zs.next_out = out.data() + produced;
    zs.avail_out = static_cast<uInt>(std::min<std::size_t>(out.size() - produced, 1u << 30));
    const uInt before_out = zs.avail_out;
    const int rc = inflate(&zs, Z_NO_FLUSH);
    produced += before_out - zs.avail_out;
    remaining_in -= chunk_in - zs.avail_in;
    if (rc == Z_STREAM_END) break;
    if (rc != Z_OK && rc != Z_BUF_ERROR) bad_archive("corrupt deflate stream");
    if (rc == Z_BUF_ERROR && remaining_in == 0 && zs.avail_out != 0) {
      bad_archive("truncated deflate stream");
    }
  }
  if (produced != expected) bad_archive("inflated size differs from declared size");
  out.resize(produced);
  return out;
}

}  // namespace

ZipArchive ZipArchive::open(SharedBytes data) {
  if (!data) bad_archive("null data");
  ZipArchive archive(std::move(data));
  const detail::ByteReader r(*archive.data_, ErrorCode::NotAnArchive);
  if (r.size() < 4 || (r.u32(0) != kLocalHeaderSig && r.u32(0) != kEndOfCentralDirSig)) {
    bad_archive("bad ZIP magic");
  }
  const DirectoryLocation loc = locate_central_directory(r);

  std::uint64_t pos = loc.offset;
  const std::uint64_t end = loc.offset + loc.size;
  // Each record is at least kCentralHeaderSize bytes, which bounds the count.
  const std::uint64_t max_records = loc.size / kCentralHeaderSize;
  archive.entries_.reserve(static_cast<std::size_t>(std::min(loc.count, max_records)));
  for (std::uint64_t i = 0; i < loc.count; ++i) {
    if (pos + kCentralHeaderSize > end || r.u32(pos) != kCentralDirSig) {
      bad_archive("central directory record " + std::to_string(i) + " is corrupt");
    }
    ZipEntry e;
    e.flags = r.u16(pos + 8);
    e.method = r.u16(pos + 10);
    e.crc32 = r.u32(pos + 16);
    e.compressed_size = r.u32(pos + 20);
    e.uncompressed_size = r.u32(pos + 24);
    const std::uint16_t name_len = r.u16(pos + 28);
    const std::uint16_t extra_len = r.u16(pos + 30);
    const std::uint16_t comment_len = r.u16(pos + 32);
    e.local_header_offset = r.u32(pos + 42);
    const std::uint64_t record_len =
        kCentralHeaderSize + std::uint64_t{name_len} + extra_len + comment_len;
    if (pos + record_len > end) bad_archive("central directory record overruns directory");
    const ByteView name = r.slice(pos + kCentralHeaderSize, name_len);
    e.name.assign(name.begin(), name.end());
    const bool need_usize = e.uncompressed_size == 0xffffffffu;
    const bool need_csize = e.compressed_size == 0xffffffffu;
    const bool need_offset = e.local_header_offset == 0xffffffffu;
    if (need_usize || need_csize || need_offset) {
      apply_zip64_extra(r.slice(pos + kCentralHeaderSize + name_len, extra_len), e, need_usize,
                        need_csize, need_offset);
    }
    archive.entries_.push_back(std::move(e));
    pos += record_len;
  }
  return archive;
}

const ZipEntry* ZipArchive::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

Bytes ZipArchive::read(std::string_view name) const {
  const ZipEntry* e = find(name);
  if (!e) bad_archive("no entry named " + std::string(name));
  return read(*e);
}

Bytes ZipArchive::read(const ZipEntry& entry) const {
  const detail::ByteReader r(*data_, ErrorCode::NotAnArchive);
  const std::uint64_t lh = entry.local_header_offset;
  if (!r.in_bounds(lh, kLocalHeaderSize) || r.u32(lh) != kLocalHeaderSig) {
    bad_archive("bad local header for " + entry.name);
  }
  if (entry.flags & 0x1) bad_archive("encrypted entry " + entry.name);
  if (entry.uncompressed_size > kMaxEntrySize) bad_archive("entry too large: " + entry.name);
  const std::uint64_t data_off =
      lh + kLocalHeaderSize + std::uint64_t{r.u16(lh + 26)} + r.u16(lh + 28);
  const ByteView payload = r.slice(data_off, entry.compressed_size, "entry payload");

  Bytes out;
  if (entry.method == 0) {
    if (entry.compressed_size != entry.uncompressed_size) {
      bad_archive("stored entry size mismatch: " + entry.name);
    }
    out.assign(payload.begin(), payload.end());
  } else if (entry.method == 8) {
    out = inflate_raw(payload, entry.uncompressed_size);
  } else {
    bad_archive("unsupported compression method " + std::to_string(entry.method));
  }

  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < out.size()) {
    const uInt n = static_cast<uInt>(std::min<std::size_t>(out.size() - done, 1u << 30));
    crc = ::crc32(crc, out.data() + done, n);
    done += n;
  }
  if (static_cast<std::uint32_t>(crc) != entry.crc32) bad_archive("CRC mismatch: " + entry.name);
  return out;
}

}  // namespace apksecrets
