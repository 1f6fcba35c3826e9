#pragma once

// Independent reference implementations used as oracles by the property
// tests and the acceptance run. None of these call into the library.

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace reference {

inline void put_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// MUTF-8 encoding of a UTF-16 unit sequence: NUL as C0 80, every unit
// (surrogates included) on its own.
inline std::vector<std::uint8_t> encode_mutf8(const std::u16string& units) {
  std::vector<std::uint8_t> out;
  for (char16_t u : units) {
    if (u != 0 && u < 0x80) {
      out.push_back(static_cast<std::uint8_t>(u));
    } else if (u < 0x800) {
      out.push_back(static_cast<std::uint8_t>(0xC0 | (u >> 6)));
      out.push_back(static_cast<std::uint8_t>(0x80 | (u & 0x3F)));
    } else {
      out.push_back(static_cast<std::uint8_t>(0xE0 | (u >> 12)));
      out.push_back(static_cast<std::uint8_t>(0x80 | ((u >> 6) & 0x3F)));
      out.push_back(static_cast<std::uint8_t>(0x80 | (u & 0x3F)));
    }
  }
  return out;
}

// UTF-16 to UTF-8; nullopt on an unpaired surrogate.
inline std::optional<std::string> utf16_to_utf8(const std::u16string& units) {
  std::string out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const char16_t u = units[i];
    if (u >= 0xD800 && u <= 0xDBFF) {
      if (i + 1 == units.size() || units[i + 1] < 0xDC00 || units[i + 1] > 0xDFFF) return std::nullopt;
      put_utf8(out, 0x10000 + ((std::uint32_t(u) - 0xD800) << 10) + (units[i + 1] - 0xDC00));
      ++i;
    } else if (u >= 0xDC00 && u <= 0xDFFF) {
      return std::nullopt;
    } else {
      put_utf8(out, u);
    }
  }
  return out;
}

// Strict MUTF-8 to UTF-16 units: nullopt on any malformed byte sequence,
// raw NUL, or an overlong form other than C0 80.
inline std::optional<std::u16string> decode_mutf8_units(const std::vector<std::uint8_t>& b) {
  std::u16string out;
  std::size_t i = 0;
  auto cont = [&](std::size_t k) { return k < b.size() && (b[k] >> 6) == 2; };
  while (i < b.size()) {
    const unsigned x = b[i];
    if (x == 0) return std::nullopt;
    if (x < 0x80) {
      out += static_cast<char16_t>(x);
      i += 1;
    } else if (x >> 5 == 6) {
      if (!cont(i + 1)) return std::nullopt;
      const unsigned v = ((x & 0x1F) << 6) | (b[i + 1] & 0x3F);
      if (v != 0 && v < 0x80) return std::nullopt;
      out += static_cast<char16_t>(v);
      i += 2;
    } else if (x >> 4 == 14) {
      if (!cont(i + 1) || !cont(i + 2)) return std::nullopt;
      const unsigned v = ((x & 0x0F) << 12) | ((b[i + 1] & 0x3F) << 6) | (b[i + 2] & 0x3F);
      if (v < 0x800) return std::nullopt;
      out += static_cast<char16_t>(v);
      i += 3;
    } else {
      return std::nullopt;
    }
  }
  return out;
}

// True when `s` is valid UTF-8 (no surrogates, no overlongs).
inline bool valid_utf8(const std::string& s) {
  static const std::uint32_t min_cp[] = {0, 0x80, 0x800, 0x10000};
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    const int n = c < 0x80 ? 0 : c >> 5 == 6 ? 1 : c >> 4 == 14 ? 2 : c >> 3 == 30 ? 3 : -1;
    if (n < 0 || i + static_cast<std::size_t>(n) >= s.size() + (n == 0 ? 1 : 0)) return false;
    std::uint32_t cp = n == 0 ? c : c & (0x3Fu >> n);
    for (int k = 1; k <= n; ++k) {
      const auto d = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if (d >> 6 != 2) return false;
      cp = (cp << 6) | (d & 0x3F);
    }
    if (cp < min_cp[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += static_cast<std::size_t>(n) + 1;
  }
  return true;
}

inline bool uuid_like(const std::string& s) {
  static const std::regex re("[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}");
  return std::regex_match(s, re);
}

inline std::string base64(const std::string& in) {
  static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 3 <= in.size(); i += 3) {
    const std::uint32_t v = (std::uint8_t(in[i]) << 16) | (std::uint8_t(in[i + 1]) << 8) | std::uint8_t(in[i + 2]);
    for (int k = 18; k >= 0; k -= 6) out += tbl[(v >> k) & 0x3F];
  }
  if (in.size() - i == 1) {
    const std::uint32_t v = std::uint8_t(in[i]) << 16;
    out += tbl[(v >> 18) & 0x3F];
    out += tbl[(v >> 12) & 0x3F];
    out += "==";
  } else if (in.size() - i == 2) {
    const std::uint32_t v = (std::uint8_t(in[i]) << 16) | (std::uint8_t(in[i + 1]) << 8);
    out += tbl[(v >> 18) & 0x3F];
    out += tbl[(v >> 12) & 0x3F];
    out += tbl[(v >> 6) & 0x3F];
    out += '=';
  }
  return out;
}

// Overlap of (app, value) pairs computed with plain sets. `ours` holds every
// value form a finding can match on, raw first; repeated raw values within an
// app count once.
struct Overlap {
  std::size_t both = 0, only_ours = 0, only_baseline = 0;
  double recall = 0;
};

inline Overlap overlap(const std::vector<std::pair<std::string, std::vector<std::string>>>& ours,
                       const std::vector<std::pair<std::string, std::string>>& baseline) {
  std::set<std::pair<std::string, std::string>> base(baseline.begin(), baseline.end());
  std::set<std::pair<std::string, std::string>> matched;
  std::set<std::pair<std::string, std::string>> seen;
  Overlap o;
  for (const auto& [app, forms] : ours) {
    if (!seen.insert({app, forms.front()}).second) continue;
    bool hit = false;
    for (const auto& f : forms) {
      if (base.count({app, f})) {
        matched.insert({app, f});
        hit = true;
      }
    }
    if (!hit) ++o.only_ours;
  }
  o.both = matched.size();
  o.only_baseline = base.size() - matched.size();
  o.recall = base.empty() ? 1.0 : static_cast<double>(o.both) / static_cast<double>(base.size());
  return o;
}

}  // namespace reference
