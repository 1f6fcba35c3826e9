#include "apksecrets/dex.hpp"

#include <zlib.h>

#include <algorithm>

#include "apksecrets/dalvik.hpp"
#include "apksecrets/error.hpp"
#include "apksecrets/mutf8.hpp"
#include "byte_reader.hpp"

namespace apksecrets {
namespace {

constexpr std::size_t kHeaderSize = 0x70;
constexpr std::uint32_t kEndianConstant = 0x12345678;

template <typename T, typename Fn>
std::vector<T> read_table(const detail::ByteReader& r, std::uint32_t count, std::uint32_t offset,
                          std::uint32_t stride, const char* name, Fn&& read_one) {
  if (count == 0) return {};
  r.require(offset, std::uint64_t{count} * stride, name);
  std::vector<T> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(read_one(offset + std::uint64_t{i} * stride));
  return out;
}

void skip_encoded_value(const detail::ByteReader& r, std::uint64_t& pos, int depth);

void skip_encoded_array(const detail::ByteReader& r, std::uint64_t& pos, int depth) {
  const std::uint32_t n = r.uleb128(pos);
  for (std::uint32_t i = 0; i < n; ++i) skip_encoded_value(r, pos, depth + 1);
}

void skip_encoded_value(const detail::ByteReader& r, std::uint64_t& pos, int depth) {
  if (depth > 32) throw Error(ErrorCode::OffsetOutOfBounds, "encoded value nesting too deep");
  const std::uint8_t head = r.u8(pos++);
  const std::uint8_t type = head & 0x1f;
  const std::uint8_t arg = head >> 5;
  switch (type) {
    case 0x1c:
      skip_encoded_array(r, pos, depth);
      return;
    case 0x1d: {
      r.uleb128(pos);
      const std::uint32_t n = r.uleb128(pos);
      for (std::uint32_t i = 0; i < n; ++i) {
        r.uleb128(pos);
        skip_encoded_value(r, pos, depth + 1);
      }
      return;
    }
    case 0x1e:
    case 0x1f:
      return;
    default:
      r.require(pos, arg + 1u, "encoded value");
      pos += arg + 1u;
  }
}

}  // namespace

std::string descriptor_to_java(std::string_view d) {
  std::size_t dims = 0;
  while (dims < d.size() && d[dims] == '[') ++dims;
  std::string_view base = d.substr(dims);
  std::string out;
  if (base.size() >= 2 && base.front() == 'L' && base.back() == ';') {
    out.assign(base.substr(1, base.size() - 2));
    std::replace(out.begin(), out.end(), '/', '.');
  } else if (base.size() == 1) {
    switch (base[0]) {
      case 'V': out = "void"; break;
      case 'Z': out = "boolean"; break;
      case 'B': out = "byte"; break;
      case 'S': out = "short"; break;
      case 'C': out = "char"; break;
      case 'I': out = "int"; break;
      case 'J': out = "long"; break;
      case 'F': out = "float"; break;
      case 'D': out = "double"; break;
      default: out.assign(base);
    }
  } else {
    out.assign(base);
  }
  for (std::size_t i = 0; i < dims; ++i) out += "[]";
  return out;
}

DexLayout parse_dex(ByteView bytes) {
  return parse_dex(std::make_shared<const Bytes>(bytes.begin(), bytes.end()));
}

DexLayout parse_dex(SharedBytes bytes) {
  if (!bytes || bytes->size() < kHeaderSize) {
    throw Error(ErrorCode::TruncatedFile, "dex shorter than its 0x70-byte header");
  }
  const Bytes& b = *bytes;
  if (!(b[0] == 'd' && b[1] == 'e' && b[2] == 'x' && b[3] == '\n' && b[7] == 0)) {
    throw Error(ErrorCode::BadMagic, "missing dex\\n magic");
  }
  DexLayout d;
  d.version.assign(reinterpret_cast<const char*>(&b[4]), 3);
  if (d.version < "035" || d.version > "041" ||
      !std::all_of(d.version.begin(), d.version.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error(ErrorCode::BadMagic, "unsupported dex version " + d.version);
  }

  detail::ByteReader r(b);
  if (r.u32(40) != kEndianConstant) throw Error(ErrorCode::BadMagic, "unsupported endian tag");
  d.checksum = r.u32(8);
  d.file_size = r.u32(32);
  if (d.file_size > b.size()) {
    throw Error(ErrorCode::TruncatedFile, "declared size " + std::to_string(d.file_size) +
                                               " exceeds " + std::to_string(b.size()) + " bytes");
  }
  if (d.file_size < kHeaderSize) throw Error(ErrorCode::TruncatedFile, "declared size below header");
  if (r.u32(36) < kHeaderSize) throw Error(ErrorCode::OffsetOutOfBounds, "header_size below 0x70");

  const ByteView body(b.data() + 12, d.file_size - 12);
  uLong adler = ::adler32(0L, Z_NULL, 0);
  adler = ::adler32(adler, body.data(), static_cast<uInt>(body.size()));
  d.computed_checksum = static_cast<std::uint32_t>(adler);
  d.adler32_ok = d.computed_checksum == d.checksum;

  d.bytes = bytes;
  const detail::ByteReader fr(d.data());
  d.map_offset = fr.u32(52);
  if (d.map_offset != 0) fr.require(d.map_offset, 4, "map_off");

  d.string_ids = read_table<std::uint32_t>(fr, fr.u32(56), fr.u32(60), 4, "string_ids",
                                           [&](std::uint64_t o) { return fr.u32(o); });
  for (const auto off : d.string_ids) fr.require(off, 1, "string_data_off");
  d.type_ids = read_table<std::uint32_t>(fr, fr.u32(64), fr.u32(68), 4, "type_ids",
                                         [&](std::uint64_t o) { return fr.u32(o); });
  d.proto_ids = read_table<ProtoId>(fr, fr.u32(72), fr.u32(76), 12, "proto_ids", [&](std::uint64_t o) {
    return ProtoId{fr.u32(o), fr.u32(o + 4), fr.u32(o + 8)};
  });
  d.field_ids = read_table<FieldId>(fr, fr.u32(80), fr.u32(84), 8, "field_ids", [&](std::uint64_t o) {
    return FieldId{fr.u16(o), fr.u16(o + 2), fr.u32(o + 4)};
  });
  d.method_ids = read_table<MethodId>(fr, fr.u32(88), fr.u32(92), 8, "method_ids", [&](std::uint64_t o) {
    return MethodId{fr.u16(o), fr.u16(o + 2), fr.u32(o + 4)};
  });
  d.class_defs = read_table<ClassDef>(fr, fr.u32(96), fr.u32(100), 32, "class_defs", [&](std::uint64_t o) {
    return ClassDef{fr.u32(o),      fr.u32(o + 4),  fr.u32(o + 8),  fr.u32(o + 12),
                    fr.u32(o + 16), fr.u32(o + 20), fr.u32(o + 24), fr.u32(o + 28)};
  });
  return d;
}

std::string DexLayout::string_at(std::uint32_t idx) const {
  if (idx >= string_ids.size()) {
    throw Error(ErrorCode::OffsetOutOfBounds, "string index " + std::to_string(idx));
  }
  return decode_string_data(data(), string_ids[idx]).utf8;
}

std::string DexLayout::type_descriptor(std::uint32_t type_idx) const {
  if (type_idx >= type_ids.size()) {
    throw Error(ErrorCode::OffsetOutOfBounds, "type index " + std::to_string(type_idx));
  }
  return string_at(type_ids[type_idx]);
}

std::string DexLayout::type_name(std::uint32_t type_idx) const {
  return descriptor_to_java(type_descriptor(type_idx));
}

std::string DexLayout::field_name(std::uint32_t field_idx) const {
  if (field_idx >= field_ids.size()) {
    throw Error(ErrorCode::OffsetOutOfBounds, "field index " + std::to_string(field_idx));
  }
  return string_at(field_ids[field_idx].name_idx);
}

std::string DexLayout::method_name(std::uint32_t method_idx) const {
  if (method_idx >= method_ids.size()) {
    throw Error(ErrorCode::OffsetOutOfBounds, "method index " + std::to_string(method_idx));
  }
  return string_at(method_ids[method_idx].name_idx);
}

std::vector<std::uint32_t> DexLayout::type_list(std::uint32_t offset) const {
  if (offset == 0) return {};
  const detail::ByteReader r(data());
  const std::uint32_t n = r.u32(offset);
  r.require(offset + 4ull, 2ull * n, "type_list");
  std::vector<std::uint32_t> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.u16(offset + 4ull + 2ull * i));
  return out;
}

std::string DexLayout::proto_descriptor(std::uint32_t proto_idx) const {
  if (proto_idx >= proto_ids.size()) {
    throw Error(ErrorCode::OffsetOutOfBounds, "proto index " + std::to_string(proto_idx));
  }
  const ProtoId& p = proto_ids[proto_idx];
  std::string out = "(";
  for (const auto t : type_list(p.parameters_off)) out += type_descriptor(t);
  out += ")";
  out += type_descriptor(p.return_type_idx);
  return out;
}

std::string DexLayout::method_signature(std::uint32_t method_idx) const {
  std::string name = method_name(method_idx);
  return name + proto_descriptor(method_ids[method_idx].proto_idx);
}

ClassData DexLayout::class_data(const ClassDef& def) const {
  ClassData cd;
  if (def.class_data_off == 0) return cd;
  const detail::ByteReader r(data());
  std::uint64_t pos = def.class_data_off;
  const std::uint32_t sizes[4] = {r.uleb128(pos), r.uleb128(pos), r.uleb128(pos), r.uleb128(pos)};
  // Every encoded member takes at least two bytes.
  const std::uint64_t total = std::uint64_t{sizes[0]} + sizes[1] + sizes[2] + sizes[3];
  r.require(pos, 2 * total, "class_data_item");

  auto read_fields = [&](std::uint32_t n, std::vector<EncodedField>& out) {
    std::uint32_t idx = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      idx += r.uleb128(pos);
      out.push_back({idx, r.uleb128(pos)});
    }
  };
  auto read_methods = [&](std::uint32_t n, std::vector<EncodedMethod>& out) {
    std::uint32_t idx = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      idx += r.uleb128(pos);
      const std::uint32_t flags = r.uleb128(pos);
      out.push_back({idx, flags, r.uleb128(pos)});
    }
  };
  read_fields(sizes[0], cd.static_fields);
  read_fields(sizes[1], cd.instance_fields);
  read_methods(sizes[2], cd.direct_methods);
  read_methods(sizes[3], cd.virtual_methods);
  return cd;
}

CodeItem DexLayout::code_item(std::uint32_t code_off) const {
  const detail::ByteReader r(data());
  CodeItem c;
  r.require(code_off, 16, "code_item");
  c.registers_size = r.u16(code_off);
  c.ins_size = r.u16(code_off + 2);
  c.outs_size = r.u16(code_off + 4);
  c.tries_size = r.u16(code_off + 6);
  c.debug_info_off = r.u32(code_off + 8);
  c.insns_size = r.u32(code_off + 12);
  c.insns_off = code_off + 16ull;
  r.require(c.insns_off, 2ull * c.insns_size, "insns");
  return c;
}

const ClassDef* DexLayout::find_class(std::string_view java_name) const {
  for (const auto& def : class_defs) {
    try {
      if (type_name(def.class_idx) == java_name) return &def;
    } catch (const Error&) {
    }
  }
  return nullptr;
}

StringTable read_string_table(const DexLayout& layout) {
  StringTable t;
  t.strings.reserve(layout.string_ids.size());
  for (std::uint32_t i = 0; i < layout.string_ids.size(); ++i) {
    try {
      Mutf8String s = decode_string_data(layout.data(), layout.string_ids[i]);
      if (!s.ok) t.decode_errors.push_back(i);
      t.strings.push_back(std::move(s.utf8));
    } catch (const Error&) {
      t.decode_errors.push_back(i);
      t.strings.emplace_back("\xEF\xBF\xBD");
    }
  }
  return t;
}

namespace {

void index_static_values(const DexLayout& d, const ClassDef& def, const ClassData& cd,
                         const std::string& cls, std::uint32_t dex_index, StringReferences& out) {
  const detail::ByteReader r(d.data());
  std::uint64_t pos = def.static_values_off;
  const std::uint32_t n = r.uleb128(pos);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t head = r.u8(pos);
    if ((head & 0x1f) != 0x17) {
      skip_encoded_value(r, pos, 0);
      continue;
    }
    ++pos;
    const unsigned len = (head >> 5) + 1u;
    std::uint32_t idx = 0;
    for (unsigned k = 0; k < len && k < 4; ++k) idx |= std::uint32_t{r.u8(pos + k)} << (8 * k);
    pos += len;
    if (idx >= d.string_ids.size()) continue;
    std::string field = i < cd.static_fields.size() ? d.field_name(cd.static_fields[i].field_idx)
                                                    : "static#" + std::to_string(i);
    out.sites[idx].push_back(CodeSite{dex_index, cls, std::move(field), 0, SiteKind::StaticValue});
  }
}

}  // namespace

StringReferences index_string_references(const DexLayout& d, const ReferenceOptions& opts) {
  StringReferences out;
  for (const auto& def : d.class_defs) {
    std::string cls;
    ClassData cd;
    try {
      cls = d.type_name(def.class_idx);
      cd = d.class_data(def);
    } catch (const Error& e) {
      out.issues.push_back({cls, {}, e.what()});
      continue;
    }
    auto walk = [&](const std::vector<EncodedMethod>& methods) {
      for (const auto& m : methods) {
        if (m.code_off == 0) continue;
        std::string sig;
        try {
          sig = d.method_signature(m.method_idx);
          const CodeItem code = d.code_item(m.code_off);
          const dalvik::CodeUnits units(code.insns(d.data()));
          // Decoding completes before any site is recorded, so a method that
          // fails to walk contributes nothing.
          for (const auto& insn : dalvik::decode_instructions(units)) {
            if (insn.payload != dalvik::Payload::None) continue;
            std::uint32_t idx = 0;
            SiteKind kind;
            if (insn.opcode == 0x1a) {
              idx = units[insn.offset + 1];
              kind = SiteKind::ConstString;
            } else if (insn.opcode == 0x1b) {
              idx = units[insn.offset + 1] | (std::uint32_t{units[insn.offset + 2]} << 16);
              kind = SiteKind::ConstStringJumbo;
            } else {
              continue;
            }
            if (idx >= d.string_ids.size()) {
              out.issues.push_back({cls, sig, "string index " + std::to_string(idx) +
                                                  " out of range at " + std::to_string(insn.offset)});
              continue;
            }
            out.sites[idx].push_back(CodeSite{opts.dex_index, cls, sig, insn.offset, kind});
          }
        } catch (const Error& e) {
          out.issues.push_back({cls, sig, e.what()});
        }
      }
    };
    walk(cd.direct_methods);
    walk(cd.virtual_methods);
    if (opts.include_static_values && def.static_values_off != 0) {
      try {
        index_static_values(d, def, cd, cls, opts.dex_index, out);
      } catch (const Error& e) {
        out.issues.push_back({cls, "<static values>", e.what()});
      }
    }
  }
  return out;
}

}  // namespace apksecrets
