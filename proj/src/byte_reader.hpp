#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "apksecrets/bytes.hpp"
#include "apksecrets/error.hpp"

namespace apksecrets::detail {

// Bounds-checked little-endian access over a byte view. Every read validates
// the range before touching memory and throws OffsetOutOfBounds otherwise.
class ByteReader {
 public:
  explicit ByteReader(ByteView data, ErrorCode code = ErrorCode::OffsetOutOfBounds)
      : data_(data), code_(code) {}

  std::size_t size() const { return data_.size(); }
  ByteView data() const { return data_; }

  bool in_bounds(std::uint64_t offset, std::uint64_t len) const {
    return offset <= data_.size() && len <= data_.size() - offset;
  }

  void require(std::uint64_t offset, std::uint64_t len, const char* what) const {
    if (!in_bounds(offset, len)) {
      throw Error(code_, std::string(what) + " at offset " + std::to_string(offset) +
                             " (+" + std::to_string(len) + ") exceeds " +
                             std::to_string(data_.size()) + " bytes");
    }
  }

  ByteView slice(std::uint64_t offset, std::uint64_t len, const char* what = "slice") const {
    require(offset, len, what);
    return data_.subspan(static_cast<std::size_t>(offset), static_cast<std::size_t>(len));
  }

  std::uint8_t u8(std::uint64_t offset) const {
    require(offset, 1, "u8");
    return data_[offset];
  }

  std::uint16_t u16(std::uint64_t offset) const {
    require(offset, 2, "u16");
    return static_cast<std::uint16_t>(data_[offset] | (data_[offset + 1] << 8));
  }

  std::uint32_t u32(std::uint64_t offset) const {
    require(offset, 4, "u32");
    return static_cast<std::uint32_t>(data_[offset]) |
           (static_cast<std::uint32_t>(data_[offset + 1]) << 8) |
           (static_cast<std::uint32_t>(data_[offset + 2]) << 16) |
           (static_cast<std::uint32_t>(data_[offset + 3]) << 24);
  }

  std::uint64_t u64(std::uint64_t offset) const {
    return static_cast<std::uint64_t>(u32(offset)) |
           (static_cast<std::uint64_t>(u32(offset + 4)) << 32);
  }

  // ULEB128 with at most 5 bytes (32-bit payload); advances `offset`.
  std::uint32_t uleb128(std::uint64_t& offset) const {
    std::uint32_t result = 0;
    for (int i = 0; i < 5; ++i) {
      std::uint8_t b = u8(offset++);
      result |= static_cast<std::uint32_t>(b & 0x7f) << (7 * i);
      if ((b & 0x80) == 0) return result;
    }
    throw Error(code_, "uleb128 longer than 5 bytes");
  }

  std::int32_t sleb128(std::uint64_t& offset) const {
    std::uint32_t result = 0;
    int shift = 0;
    std::uint8_t b = 0;
    for (int i = 0; i < 5; ++i) {
      b = u8(offset++);
      result |= static_cast<std::uint32_t>(b & 0x7f) << shift;
      shift += 7;
      if ((b & 0x80) == 0) break;
      if (i == 4) throw Error(code_, "sleb128 longer than 5 bytes");
    }
    if (shift < 32 && (b & 0x40)) result |= ~0u << shift;
    return static_cast<std::int32_t>(result);
  }

 private:
  ByteView data_;
  ErrorCode code_;
};

}  // namespace apksecrets::detail
