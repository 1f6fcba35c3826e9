#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apksecrets/bytes.hpp"
#include "apksecrets/types.hpp"

namespace apksecrets {

struct ProtoId {
  std::uint32_t shorty_idx = 0;
  std::uint32_t return_type_idx = 0;
  std::uint32_t parameters_off = 0;
};

struct FieldId {
  std::uint16_t class_idx = 0;
  std::uint16_t type_idx = 0;
  std::uint32_t name_idx = 0;
};

struct MethodId {
  std::uint16_t class_idx = 0;
  std::uint16_t proto_idx = 0;
  std::uint32_t name_idx = 0;
};

struct ClassDef {
  std::uint32_t class_idx = 0;
  std::uint32_t access_flags = 0;
  std::uint32_t superclass_idx = 0;
  std::uint32_t interfaces_off = 0;
  std::uint32_t source_file_idx = 0;
  std::uint32_t annotations_off = 0;
  std::uint32_t class_data_off = 0;
  std::uint32_t static_values_off = 0;
};

struct EncodedField {
  std::uint32_t field_idx = 0;
  std::uint32_t access_flags = 0;
};

struct EncodedMethod {
  std::uint32_t method_idx = 0;
  std::uint32_t access_flags = 0;
  std::uint32_t code_off = 0;
};

struct ClassData {
  std::vector<EncodedField> static_fields;
  std::vector<EncodedField> instance_fields;
  std::vector<EncodedMethod> direct_methods;
  std::vector<EncodedMethod> virtual_methods;
};

struct CodeItem {
  std::uint16_t registers_size = 0;
  std::uint16_t ins_size = 0;
  std::uint16_t outs_size = 0;
  std::uint16_t tries_size = 0;
  std::uint32_t debug_info_off = 0;
  std::uint32_t insns_size = 0;  // code units
  std::uint64_t insns_off = 0;   // byte offset of insns[0]

  ByteView insns(ByteView file) const { return file.subspan(insns_off, 2ull * insns_size); }
};

inline constexpr std::uint32_t kNoIndex = 0xFFFFFFFFu;

// Parsed DEX header plus index tables. Holds the file bytes; immutable after
// parse_dex() and safe to share across threads.
struct DexLayout {
  std::string version;  // "035" ... "041"
  std::uint32_t checksum = 0;
  std::uint32_t computed_checksum = 0;
  bool adler32_ok = false;
  std::uint32_t file_size = 0;
  std::uint32_t map_offset = 0;
  std::vector<std::uint32_t> string_ids;  // string_data_off per string
  std::vector<std::uint32_t> type_ids;    // descriptor string index per type
  std::vector<ProtoId> proto_ids;
  std::vector<FieldId> field_ids;
  std::vector<MethodId> method_ids;
  std::vector<ClassDef> class_defs;
  SharedBytes bytes;

  ByteView data() const { return {bytes->data(), file_size}; }

  // Decoded string; invalid MUTF-8 yields replacement characters.
  std::string string_at(std::uint32_t idx) const;
  std::string type_descriptor(std::uint32_t type_idx) const;
  std::string type_name(std::uint32_t type_idx) const;  // Java form
  std::string field_name(std::uint32_t field_idx) const;
  std::string method_name(std::uint32_t method_idx) const;
  std::string proto_descriptor(std::uint32_t proto_idx) const;  // "(II)V"
  std::string method_signature(std::uint32_t method_idx) const; // name + descriptor
  std::vector<std::uint32_t> type_list(std::uint32_t offset) const;

  // Throws Error(OffsetOutOfBounds) on malformed class data.
  ClassData class_data(const ClassDef& def) const;
  CodeItem code_item(std::uint32_t code_off) const;

  const ClassDef* find_class(std::string_view java_name) const;
};

// Converts "Lcom/example/Foo;" to "com.example.Foo", "[I" to "int[]".
std::string descriptor_to_java(std::string_view descriptor);

// Errors: BadMagic, TruncatedFile, OffsetOutOfBounds. Checksum mismatch is
// reported through adler32_ok.
DexLayout parse_dex(SharedBytes bytes);
DexLayout parse_dex(ByteView bytes);

struct StringTable {
  std::vector<std::string> strings;
  std::vector<std::uint32_t> decode_errors;  // indices substituted with U+FFFD
};

StringTable read_string_table(const DexLayout& layout);

struct WalkIssue {
  std::string class_name;
  std::string method_signature;  // empty for class-level failures
  std::string detail;
};

struct StringReferences {
  // string index -> sites, in class_def / method / offset order
  std::map<std::uint32_t, std::vector<CodeSite>> sites;
  std::vector<WalkIssue> issues;
};

struct ReferenceOptions {
  bool include_static_values = true;
  std::uint32_t dex_index = 0;
};

// Records every const-string / const-string/jumbo load (and, optionally,
// string-typed static field initializers). A method whose instruction stream
// cannot be walked is skipped and reported in `issues`.
StringReferences index_string_references(const DexLayout& layout, const ReferenceOptions& opts = {});

}  // namespace apksecrets
