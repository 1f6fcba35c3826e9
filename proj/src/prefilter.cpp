#include "apksecrets/prefilter.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <optional>

#include "apksecrets/error.hpp"

namespace apksecrets {

std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::TooShort: return "TOO_SHORT";
    case DropReason::TooLong: return "TOO_LONG";
    case DropReason::Whitespace: return "WHITESPACE";
    case DropReason::LowCharsetDiversity: return "LOW_CHARSET_DIVERSITY";
    case DropReason::UuidLike: return "UUID_LIKE";
    case DropReason::LowEntropy: return "LOW_ENTROPY";
  }
  return "?";
}

void PrefilterConfig::validate() const {
  if (min_length > max_length) throw Error(ErrorCode::ConfigError, "prefilter min_length > max_length");
  if (!(max_space_ratio >= 0.0 && max_space_ratio <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "prefilter max_space_ratio outside [0,1]");
  }
  if (min_charset_classes < 0 || min_charset_classes > 4) {
    throw Error(ErrorCode::ConfigError, "prefilter min_charset_classes outside [0,4]");
  }
  if (min_entropy < 0.0) throw Error(ErrorCode::ConfigError, "prefilter min_entropy < 0");
}

bool is_uuid_like(std::string_view s) {
  if (s.size() != 36) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool dash_slot = i == 8 || i == 13 || i == 18 || i == 23;
    if (dash_slot ? s[i] != '-' : !std::isxdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

int charset_classes(std::string_view s) {
  bool lower = false, upper = false, digit = false, symbol = false;
  for (const char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 'a' && c <= 'z') lower = true;
    else if (c >= 'A' && c <= 'Z') upper = true;
    else if (c >= '0' && c <= '9') digit = true;
    else symbol = true;
  }
  return int{lower} + int{upper} + int{digit} + int{symbol};
}

double entropy(std::string_view s) {
  if (s.empty()) throw Error(ErrorCode::EmptyString, "entropy of empty string");
  std::array<std::size_t, 256> counts{};
  for (const char c : s) ++counts[static_cast<unsigned char>(c)];
  const double n = static_cast<double>(s.size());
  double h = 0.0;
  for (const auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

namespace {

std::size_t whitespace_count(std::string_view s) {
  std::size_t n = 0;
  for (const char c : s) n += std::isspace(static_cast<unsigned char>(c)) ? 1 : 0;
  return n;
}

std::optional<DropReason> first_failure(std::string_view v, const PrefilterConfig& cfg,
                                        bool bypass_uuid) {
  if (v.size() < cfg.min_length) return DropReason::TooShort;
  if (v.size() > cfg.max_length) return DropReason::TooLong;
  for (const auto& p : cfg.allowlist_prefixes) {
    if (!p.empty() && v.starts_with(p)) return std::nullopt;
  }
  if (!v.empty() && static_cast<double>(whitespace_count(v)) / static_cast<double>(v.size()) >
                        cfg.max_space_ratio) {
    return DropReason::Whitespace;
  }
  if (charset_classes(v) < cfg.min_charset_classes) return DropReason::LowCharsetDiversity;
  if (cfg.drop_uuid_like && !bypass_uuid && is_uuid_like(v)) return DropReason::UuidLike;
  if (cfg.min_entropy > 0.0 && (v.empty() || entropy(v) < cfg.min_entropy)) {
    return DropReason::LowEntropy;
  }
  return std::nullopt;
}

}  // namespace

PrefilterResult prefilter(std::vector<ExtractedString> strings, const PrefilterConfig& cfg,
                          bool bypass_uuid) {
  PrefilterResult out;
  for (auto& s : strings) {
    if (const auto reason = first_failure(s.value, cfg, bypass_uuid)) {
      out.dropped.push_back({std::move(s), *reason});
    } else {
      out.kept.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace apksecrets
