#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace apksecrets::detail {

inline constexpr char32_t kReplacementChar = 0xFFFD;

void append_utf8(std::string& out, char32_t cp);

// Converts UTF-16 code units to UTF-8. Unpaired surrogates become U+FFFD and
// set `malformed`.
std::string utf16_to_utf8(std::span<const char16_t> units, bool& malformed);

// Replaces invalid UTF-8 sequences with U+FFFD; sets `malformed` if any.
std::string sanitize_utf8(std::string_view bytes, bool& malformed);

}  // namespace apksecrets::detail
