#include <algorithm>
#include <cstdio>
#include <optional>
#include <vector>

#include "apksecrets/apk.hpp"
#include "apksecrets/error.hpp"
#include "byte_reader.hpp"
#include "text.hpp"

namespace apksecrets {
namespace {

constexpr std::uint16_t kStringPoolType = 0x0001;
constexpr std::uint16_t kTableType = 0x0002;
constexpr std::uint16_t kPackageType = 0x0200;
constexpr std::uint16_t kTypeType = 0x0201;

constexpr std::uint32_t kPoolUtf8Flag = 1u << 8;
constexpr std::uint16_t kEntryFlagComplex = 0x0001;
constexpr std::uint16_t kEntryFlagCompact = 0x0008;
constexpr std::uint8_t kTypeFlagSparse = 0x01;
constexpr std::uint8_t kTypeFlagOffset16 = 0x02;
constexpr std::uint8_t kValueTypeString = 0x03;
constexpr std::uint32_t kNoEntry = 0xFFFFFFFFu;

struct MalformedChunk {
  std::string detail;
};
struct UnsupportedPool {
  std::string detail;
};

struct ChunkHeader {
  std::uint64_t offset;
  std::uint16_t type;
  std::uint16_t header_size;
  std::uint32_t size;
  std::uint64_t end() const { return offset + size; }
};

ChunkHeader read_chunk(const detail::ByteReader& r, std::uint64_t offset, std::uint64_t limit) {
  if (offset + 8 > limit || !r.in_bounds(offset, 8)) {
    throw MalformedChunk{"chunk header at " + std::to_string(offset) + " truncated"};
  }
  ChunkHeader h{offset, r.u16(offset), r.u16(offset + 2), r.u32(offset + 4)};
  if (h.header_size < 8 || h.size < h.header_size || offset + h.size > limit) {
    throw MalformedChunk{"chunk at " + std::to_string(offset) + " has bad sizes"};
  }
  return h;
}

// Lazily decoded ResStringPool.
class StringPool {
 public:
  StringPool() = default;
  StringPool(const detail::ByteReader& r, const ChunkHeader& h) : r_(&r), chunk_(h) {
    if (h.header_size < 28) throw UnsupportedPool{"string pool header shorter than 28 bytes"};
    count_ = r.u32(h.offset + 8);
    flags_ = r.u32(h.offset + 16);
    strings_start_ = r.u32(h.offset + 20);
    if (std::uint64_t{count_} * 4 > h.size - h.header_size) {
      throw MalformedChunk{"string pool index exceeds chunk"};
    }
    if (strings_start_ > h.size) throw MalformedChunk{"string pool data start exceeds chunk"};
  }

  std::uint32_t size() const { return count_; }

  std::string get(std::uint32_t index, bool& malformed) const {
    if (!r_ || index >= count_) throw MalformedChunk{"string index out of pool range"};
    const std::uint64_t rel = r_->u32(chunk_.offset + chunk_.header_size + 4ull * index);
    const std::uint64_t pos = chunk_.offset + strings_start_ + rel;
    const std::uint64_t limit = chunk_.end();
    if (pos >= limit) throw MalformedChunk{"string offset exceeds pool"};
    return (flags_ & kPoolUtf8Flag) ? get_utf8(pos, limit, malformed)
                                    : get_utf16(pos, limit, malformed);
  }

 private:
  std::string get_utf8(std::uint64_t pos, std::uint64_t limit, bool& malformed) const {
    auto length = [&](std::uint64_t& p) -> std::uint32_t {
      std::uint32_t v = r_->u8(p++);
      if (v & 0x80) v = ((v & 0x7F) << 8) | r_->u8(p++);
      return v;
    };
    length(pos);  // utf-16 length, unused
    const std::uint32_t nbytes = length(pos);
    if (pos + nbytes > limit) throw MalformedChunk{"utf-8 string overruns pool"};
    const ByteView raw = r_->slice(pos, nbytes);
    return detail::sanitize_utf8({reinterpret_cast<const char*>(raw.data()), raw.size()},
                                 malformed);
  }

  std::string get_utf16(std::uint64_t pos, std::uint64_t limit, bool& malformed) const {
    std::uint32_t n = r_->u16(pos);
    pos += 2;
    if (n & 0x8000) {
      n = ((n & 0x7FFF) << 16) | r_->u16(pos);
      pos += 2;
    }
    if (pos + 2ull * n > limit) throw MalformedChunk{"utf-16 string overruns pool"};
    std::u16string units(n, u'\0');
    for (std::uint32_t i = 0; i < n; ++i) units[i] = static_cast<char16_t>(r_->u16(pos + 2ull * i));
    return detail::utf16_to_utf8(units, malformed);
  }

  const detail::ByteReader* r_ = nullptr;
  ChunkHeader chunk_{};
  std::uint32_t count_ = 0;
  std::uint32_t flags_ = 0;
  std::uint32_t strings_start_ = 0;
};

std::string unpack_locale_part(std::uint8_t a, std::uint8_t b, char base) {
  if (a == 0) return {};
  if (a & 0x80) {
    const int first = b & 0x1f;
    const int second = ((b & 0xe0) >> 5) + ((a & 0x03) << 3);
    const int third = (a & 0x7c) >> 2;
    return {static_cast<char>(base + first), static_cast<char>(base + second),
            static_cast<char>(base + third)};
  }
  return {static_cast<char>(a), static_cast<char>(b)};
}

std::string density_name(std::uint16_t d) {
  switch (d) {
    case 120: return "ldpi";
    case 160: return "mdpi";
    case 213: return "tvdpi";
    case 240: return "hdpi";
    case 320: return "xhdpi";
    case 480: return "xxhdpi";
    case 640: return "xxxhdpi";
    case 0xfffe: return "anydpi";
    case 0xffff: return "nodpi";
    default: return std::to_string(d) + "dpi";
  }
}

// Renders a ResTable_config as an aapt-style qualifier string. Fields without
// a dedicated rendering are appended as raw hex so that a non-default
// configuration never renders as "".
std::string render_config(ByteView cfg) {
  Bytes b(cfg.begin(), cfg.end());
  if (b.size() < 4) return {};
  b.resize(std::max<std::size_t>(b.size(), 64), 0);
  auto u16 = [&](std::size_t o) { return static_cast<std::uint16_t>(b[o] | (b[o + 1] << 8)); };
  std::vector<std::string> parts;
  std::vector<bool> consumed(b.size(), false);
  auto take = [&](std::size_t o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) consumed[o + i] = true;
  };
  take(0, 4);

  if (u16(4)) parts.push_back("mcc" + std::to_string(u16(4)));
  take(4, 2);
  if (u16(6)) parts.push_back("mnc" + std::to_string(u16(6)));
  take(6, 2);
  const std::string lang = unpack_locale_part(b[8], b[9], 'a');
  const std::string region = unpack_locale_part(b[10], b[11], '0');
  if (!lang.empty()) parts.push_back(region.empty() ? lang : lang + "-r" + region);
  else if (!region.empty()) parts.push_back("r" + region);
  take(8, 4);
  if (u16(30)) parts.push_back("sw" + std::to_string(u16(30)) + "dp");
  take(30, 2);
  if (u16(32)) parts.push_back("w" + std::to_string(u16(32)) + "dp");
  take(32, 2);
  if (u16(34)) parts.push_back("h" + std::to_string(u16(34)) + "dp");
  take(34, 2);
  if (b[12] == 1 || b[12] == 2 || b[12] == 3) {
    parts.push_back(b[12] == 1 ? "port" : b[12] == 2 ? "land" : "square");
    take(12, 1);
  }
  const std::uint8_t night = b[29] & 0x30;
  if (night == 0x10 || night == 0x20) parts.push_back(night == 0x20 ? "night" : "notnight");
  if ((b[29] & ~0x30) == 0) take(29, 1);
  if (u16(14)) parts.push_back(density_name(u16(14)));
  take(14, 2);
  if (u16(24)) parts.push_back("v" + std::to_string(u16(24)));
  take(24, 2);
  take(26, 2);  // minorVersion is always 0 in practice

  std::string rest;
  static constexpr char kHex[] = "0123456789abcdef";
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    if (!consumed[i] && b[i] != 0) {
      rest.clear();
      for (std::size_t k = 4; k < cfg.size(); ++k) {
        rest.push_back(kHex[b[k] >> 4]);
        rest.push_back(kHex[b[k] & 0xf]);
      }
      parts.push_back("cfg" + rest);
      break;
    }
  }
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out.push_back('-');
    out += p;
  }
  return out;
}

struct Walker {
  const detail::ByteReader& r;
  ResourceTable& out;
  StringPool global_pool;
  bool have_global_pool = false;

  void walk_table() {
    const ChunkHeader table = read_chunk(r, 0, r.size());
    if (table.type != kTableType) throw MalformedChunk{"not a resource table chunk"};
    if (table.header_size < 12) throw MalformedChunk{"table header too short"};
    std::uint64_t pos = table.header_size;
    while (pos < table.end()) {
      const ChunkHeader c = read_chunk(r, pos, table.end());
      if (c.type == kStringPoolType && !have_global_pool) {
        global_pool = StringPool(r, c);
        have_global_pool = true;
      } else if (c.type == kPackageType) {
        walk_package(c);
      }
      pos = c.end();
    }
  }

  void walk_package(const ChunkHeader& pkg) {
    if (pkg.header_size < 284) throw MalformedChunk{"package header too short"};
    if (out.package_name.empty()) {
      std::u16string name;
      for (std::uint64_t i = 0; i < 128; ++i) {
        const auto ch = static_cast<char16_t>(r.u16(pkg.offset + 12 + 2 * i));
        if (ch == 0) break;
        name.push_back(ch);
      }
      bool ignored = false;
      out.package_name = detail::utf16_to_utf8(name, ignored);
    }
    const std::uint32_t type_strings_off = r.u32(pkg.offset + 268);
    const std::uint32_t key_strings_off = r.u32(pkg.offset + 276);

    StringPool type_pool, key_pool;
    int pools_seen = 0;
    std::uint64_t pos = pkg.offset + pkg.header_size;
    while (pos < pkg.end()) {
      const ChunkHeader c = read_chunk(r, pos, pkg.end());
      if (c.type == kStringPoolType) {
        const std::uint64_t rel = c.offset - pkg.offset;
        if (rel == type_strings_off || (pools_seen == 0 && rel != key_strings_off)) {
          type_pool = StringPool(r, c);
        } else {
          key_pool = StringPool(r, c);
        }
        ++pools_seen;
      } else if (c.type == kTypeType) {
        walk_type(c, type_pool, key_pool);
      }
      pos = c.end();
    }
  }

  void walk_type(const ChunkHeader& c, const StringPool& type_pool, const StringPool& key_pool) {
    if (c.header_size < 20 + 4) throw MalformedChunk{"type chunk header too short"};
    const std::uint8_t id = r.u8(c.offset + 8);
    const std::uint8_t flags = r.u8(c.offset + 9);
    const std::uint32_t entry_count = r.u32(c.offset + 12);
    const std::uint32_t entries_start = r.u32(c.offset + 16);
    if (id == 0 || id > type_pool.size()) throw MalformedChunk{"type id outside type pool"};
    bool ignored = false;
    if (type_pool.get(id - 1u, ignored) != "string") return;

    const std::uint32_t cfg_size = r.u32(c.offset + 20);
    if (cfg_size < 4 || 20ull + cfg_size > c.header_size) {
      throw MalformedChunk{"type config exceeds header"};
    }
    const std::string qualifier = render_config(r.slice(c.offset + 20, cfg_size));
    if (entries_start > c.size) throw MalformedChunk{"entries start beyond chunk"};

    const std::uint64_t index_base = c.offset + c.header_size;
    const std::uint64_t unit = (flags & (kTypeFlagOffset16 | kTypeFlagSparse)) ? 2 : 4;
    const std::uint64_t index_bytes = (flags & kTypeFlagSparse) ? 4ull * entry_count
                                                                : unit * entry_count;
    if (c.header_size + index_bytes > c.size) throw MalformedChunk{"entry index exceeds chunk"};

    for (std::uint32_t i = 0; i < entry_count; ++i) {
      std::uint64_t offset = 0;
      if (flags & kTypeFlagSparse) {
        offset = std::uint64_t{r.u16(index_base + 4ull * i + 2)} * 4;
      } else if (flags & kTypeFlagOffset16) {
        const std::uint16_t v = r.u16(index_base + 2ull * i);
        if (v == 0xFFFF) continue;
        offset = std::uint64_t{v} * 4;
      } else {
        const std::uint32_t v = r.u32(index_base + 4ull * i);
        if (v == kNoEntry) continue;
        offset = v;
      }
      read_entry(c, c.offset + entries_start + offset, key_pool, qualifier);
    }
  }

  void read_entry(const ChunkHeader& c, std::uint64_t pos, const StringPool& key_pool,
                  const std::string& qualifier) {
    if (pos + 8 > c.end()) throw MalformedChunk{"entry beyond type chunk"};
    const std::uint16_t size = r.u16(pos);
    const std::uint16_t flags = r.u16(pos + 2);
    std::uint32_t key = 0;
    std::uint8_t data_type = 0;
    std::uint32_t data = 0;
    if (flags & kEntryFlagCompact) {
      key = size;
      data_type = static_cast<std::uint8_t>(flags >> 8);
      data = r.u32(pos + 4);
    } else {
      if (flags & kEntryFlagComplex) return;
      key = r.u32(pos + 4);
      if (size < 8 || pos + size + 8 > c.end()) throw MalformedChunk{"entry value beyond chunk"};
      data_type = r.u8(pos + size + 3);
      data = r.u32(pos + size + 4);
    }
    if (data_type != kValueTypeString) return;
    if (!have_global_pool) throw MalformedChunk{"string value without global pool"};

    ResourceString s;
    bool ignored = false;
    s.entry_name = key_pool.get(key, ignored);
    s.value = global_pool.get(data, s.malformed);
    s.config_qualifier = qualifier;
    if (s.entry_name.empty()) throw MalformedChunk{"empty entry name"};
    out.strings.push_back(std::move(s));
  }
};

}  // namespace

ResourceTable parse_resource_table(ByteView bytes) {
  ResourceTable out;
  const detail::ByteReader r(bytes);
  Walker w{r, out, {}, false};
  try {
    w.walk_table();
  } catch (const MalformedChunk& e) {
    out.issue = TableIssue::MalformedChunk;
    out.issue_detail = e.detail;
  } catch (const UnsupportedPool& e) {
    out.issue = TableIssue::UnsupportedPoolEncoding;
    out.issue_detail = e.detail;
  } catch (const Error& e) {
    out.issue = TableIssue::MalformedChunk;
    out.issue_detail = e.what();
  }
  return out;
}

}  // namespace apksecrets
