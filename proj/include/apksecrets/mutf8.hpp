#pragma once

#include <cstdint>
#include <string>

#include "apksecrets/bytes.hpp"

namespace apksecrets {

struct Mutf8String {
  std::string utf8;             // standard UTF-8
  std::uint32_t utf16_length = 0;  // declared ULEB128 prefix
  bool ok = true;               // false: invalid sequence or length mismatch
};

// Decodes a MUTF-8 payload (no length prefix, no terminator). U+0000 arrives
// as C0 80 and supplementary characters as CESU-8 surrogate pairs; invalid
// sequences are replaced with U+FFFD and clear `ok`.
Mutf8String decode_mutf8(ByteView payload);

// Decodes a string_data_item starting at `offset`: ULEB128 utf16 length, then
// MUTF-8 bytes up to the NUL terminator. Never reads outside `data`; throws
// Error(OffsetOutOfBounds) when the item runs off the end.
Mutf8String decode_string_data(ByteView data, std::uint64_t offset);

}  // namespace apksecrets
