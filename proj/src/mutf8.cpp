#include "apksecrets/mutf8.hpp"

#include "apksecrets/error.hpp"
#include "byte_reader.hpp"
#include "text.hpp"

namespace apksecrets {
namespace {

// Reads one MUTF-8 code unit (a UTF-16 value). Returns false on malformed
// input and consumes one byte.
bool next_unit(ByteView p, std::size_t& i, char16_t& unit) {
  const std::uint8_t b0 = p[i];
  if (b0 < 0x80) {
    ++i;
    unit = b0;
    return b0 != 0;  // raw NUL never appears inside a payload
  }
  if ((b0 & 0xE0) == 0xC0) {
    if (i + 1 >= p.size() || (p[i + 1] & 0xC0) != 0x80) {
      ++i;
      return false;
    }
    unit = static_cast<char16_t>(((b0 & 0x1F) << 6) | (p[i + 1] & 0x3F));
    i += 2;
    // Overlong forms are only legal for U+0000.
    return unit == 0 || unit >= 0x80;
  }
  if ((b0 & 0xF0) == 0xE0) {
    if (i + 2 >= p.size() || (p[i + 1] & 0xC0) != 0x80 || (p[i + 2] & 0xC0) != 0x80) {
      ++i;
      return false;
    }
    unit = static_cast<char16_t>(((b0 & 0x0F) << 12) | ((p[i + 1] & 0x3F) << 6) |
                                 (p[i + 2] & 0x3F));
    i += 3;
    return unit >= 0x800;
  }
  ++i;
  return false;
}

}  // namespace

Mutf8String decode_mutf8(ByteView p) {
  Mutf8String out;
  out.utf8.reserve(p.size());
  std::size_t i = 0;
  std::uint32_t units = 0;
  while (i < p.size()) {
    char16_t u = 0;
    if (!next_unit(p, i, u)) {
      out.ok = false;
      detail::append_utf8(out.utf8, detail::kReplacementChar);
      ++units;
      continue;
    }
    ++units;
    if (u >= 0xD800 && u <= 0xDBFF) {
      std::size_t j = i;
      char16_t low = 0;
      if (j < p.size() && next_unit(p, j, low) && low >= 0xDC00 && low <= 0xDFFF) {
        detail::append_utf8(out.utf8, 0x10000 + ((char32_t(u) - 0xD800) << 10) + (low - 0xDC00));
        i = j;
        ++units;
        continue;
      }
      out.ok = false;
      detail::append_utf8(out.utf8, detail::kReplacementChar);
    } else if (u >= 0xDC00 && u <= 0xDFFF) {
      out.ok = false;
      detail::append_utf8(out.utf8, detail::kReplacementChar);
    } else {
      detail::append_utf8(out.utf8, u);
    }
  }
  out.utf16_length = units;
  return out;
}

Mutf8String decode_string_data(ByteView data, std::uint64_t offset) {
  const detail::ByteReader r(data);
  std::uint64_t pos = offset;
  const std::uint32_t declared = r.uleb128(pos);
  if (pos > data.size()) throw Error(ErrorCode::OffsetOutOfBounds, "string_data beyond file");
  std::size_t end = static_cast<std::size_t>(pos);
  while (end < data.size() && data[end] != 0) ++end;
  if (end == data.size()) {
    throw Error(ErrorCode::OffsetOutOfBounds, "unterminated string_data at " + std::to_string(offset));
  }
  Mutf8String s = decode_mutf8(data.subspan(static_cast<std::size_t>(pos), end - pos));
  if (s.utf16_length != declared) s.ok = false;
  s.utf16_length = declared;
  return s;
}

}  // namespace apksecrets
