#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "apksecrets/types.hpp"

namespace apksecrets {

struct PrefilterConfig {
  std::size_t min_length = 10;
  std::size_t max_length = 4096;
  double max_space_ratio = 0.0;
  bool drop_uuid_like = true;
  int min_charset_classes = 2;  // of {lower, upper, digit, symbol}
  std::vector<std::string> allowlist_prefixes = {"-----BEGIN", "eyJ"};
  double min_entropy = 0.0;  // bits/char; 0 disables the rule

  // Throws Error(ConfigError) when invariants do not hold.
  void validate() const;

  friend bool operator==(const PrefilterConfig&, const PrefilterConfig&) = default;
};

enum class DropReason { TooShort, TooLong, Whitespace, LowCharsetDiversity, UuidLike, LowEntropy };

std::string_view to_string(DropReason r);

struct DroppedString {
  ExtractedString string;
  DropReason reason;
};

struct PrefilterResult {
  std::vector<ExtractedString> kept;
  std::vector<DroppedString> dropped;
};

// Rules run in a fixed order: length, allowlist bypass, whitespace, charset
// classes, UUID shape, then the optional entropy floor. Each dropped string
// carries the first rule it failed. `bypass_uuid` disables the UUID rule.
PrefilterResult prefilter(std::vector<ExtractedString> strings, const PrefilterConfig& cfg,
                          bool bypass_uuid = false);

// Exactly the 8-4-4-4-12 hexadecimal shape, case-insensitive.
bool is_uuid_like(std::string_view s);

int charset_classes(std::string_view s);

// Shannon entropy in bits per byte. Throws Error(EmptyString).
double entropy(std::string_view s);

}  // namespace apksecrets
