#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "apksecrets/bytes.hpp"

namespace apksecrets {

struct ZipEntry {
  std::string name;
  std::uint16_t method = 0;  // 0 = stored, 8 = deflate
  std::uint16_t flags = 0;
  std::uint32_t crc32 = 0;
  std::uint64_t compressed_size = 0;
  std::uint64_t uncompressed_size = 0;
  std::uint64_t local_header_offset = 0;
};

// Read-only view of a ZIP archive held in memory. The central directory is
// parsed eagerly; entry payloads are only inflated on read().
class ZipArchive {
 public:
  // Largest payload read() will produce for a single entry.
  static constexpr std::uint64_t kMaxEntrySize = 1ull << 30;

  // Throws Error(NotAnArchive) when no valid end-of-central-directory record
  // or central directory can be located.
  static ZipArchive open(SharedBytes data);

  const std::vector<ZipEntry>& entries() const { return entries_; }
  const ZipEntry* find(std::string_view name) const;

  // Throws Error(NotAnArchive) on corrupt local headers, unsupported methods,
  // CRC mismatches or payloads larger than kMaxEntrySize.
  Bytes read(const ZipEntry& entry) const;
  Bytes read(std::string_view name) const;

  std::size_t archive_size() const { return data_->size(); }

 private:
  explicit ZipArchive(SharedBytes data) : data_(std::move(data)) {}

  SharedBytes data_;
  std::vector<ZipEntry> entries_;
};

}  // namespace apksecrets
