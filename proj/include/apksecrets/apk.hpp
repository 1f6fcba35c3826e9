#pragma once

#include <optional>
#include <string>
#include <vector>

#include "apksecrets/bytes.hpp"
#include "apksecrets/types.hpp"
#include "apksecrets/zip_archive.hpp"

namespace apksecrets {

enum class IngestWarning { NoDexPresent };

// An opened APK. Immutable after open_apk(); safe to share across threads.
struct ApkArtifact {
  std::string path;
  std::string sha256;
  std::vector<std::string> dex_entries;  // classes.dex, classes2.dex, ...
  std::optional<Bytes> resource_table;   // raw resources.arsc
  std::uint64_t size_bytes = 0;
  std::vector<IngestWarning> warnings;
  std::shared_ptr<const ZipArchive> archive;

  bool has_dex() const { return !dex_entries.empty(); }
  bool has_warning(IngestWarning w) const;
  Bytes read_dex(std::size_t index) const;
};

ApkArtifact open_apk(const std::string& path);
ApkArtifact open_apk_bytes(SharedBytes data, std::string path = {});

// Ordering key for classes*.dex names; nullopt for anything else.
std::optional<unsigned> dex_entry_number(std::string_view entry_name);

struct ResourceString {
  std::string entry_name;
  std::string value;
  std::string config_qualifier;  // "" for the default configuration
  bool malformed = false;        // value decoded from a broken pool entry

  friend bool operator==(const ResourceString&, const ResourceString&) = default;
  friend auto operator<=>(const ResourceString&, const ResourceString&) = default;
};

enum class TableIssue { None, MalformedChunk, UnsupportedPoolEncoding };

std::string_view to_string(TableIssue t);
std::string_view to_string(IngestWarning w);

struct ResourceTable {
  std::vector<ResourceString> strings;
  std::string package_name;
  TableIssue issue = TableIssue::None;
  std::string issue_detail;
};

// Walks the chunk sequence and returns every `string`-type entry. Malformed
// chunks stop the walk; whatever was parsed before is still returned.
ResourceTable parse_resource_table(ByteView bytes);

struct XmlStrings {
  std::vector<ExtractedString> strings;
  std::string document;  // canonical strings.xml rendering fed to A1/A2
  std::string package_name;
  TableIssue issue = TableIssue::None;
};

// Default-config string resources, plus their canonical XML rendering.
XmlStrings extract_xml_strings(const ApkArtifact& artifact);

// Canonical rendering: sorted by entry name, one <string> per entry,
// escaped values. Byte-identical for equal input sets.
std::string render_strings_xml(std::vector<ResourceString> entries);
std::string xml_escape(std::string_view text);

}  // namespace apksecrets
