#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace apksecrets {

enum class StringSource { Xml, Code };

std::string_view to_string(StringSource s);

enum class SiteKind {
  ConstString,       // const-string (0x1a)
  ConstStringJumbo,  // const-string/jumbo (0x1b)
  StaticValue,       // class_def static_values encoded_array entry
};

std::string_view to_string(SiteKind k);

// Where a code string is loaded. For StaticValue sites, method_signature
// names the field and insn_offset is 0.
struct CodeSite {
  std::uint32_t dex_index = 0;  // position in ApkArtifact::dex_entries
  std::string class_name;       // binary name, e.g. "com.example.Foo"
  std::string method_signature; // name + descriptor, e.g. "onCreate(Landroid/os/Bundle;)V"
  std::uint32_t insn_offset = 0;
  SiteKind kind = SiteKind::ConstString;

  bool is_instruction() const { return kind != SiteKind::StaticValue; }
  friend bool operator==(const CodeSite&, const CodeSite&) = default;
  friend auto operator<=>(const CodeSite&, const CodeSite&) = default;
};

struct ExtractedString {
  std::string value;
  StringSource source = StringSource::Xml;
  std::string resource_entry;   // Xml only
  std::vector<CodeSite> sites;  // Code only; sites.front() is the first site

  const CodeSite& first_site() const { return sites.front(); }
  std::size_t additional_site_count() const { return sites.empty() ? 0 : sites.size() - 1; }
};

}  // namespace apksecrets
