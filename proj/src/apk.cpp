#include "apksecrets/apk.hpp"

#include <algorithm>
#include <charconv>

#include "apksecrets/error.hpp"

namespace apksecrets {

std::string_view to_string(StringSource s) { return s == StringSource::Xml ? "XML" : "CODE"; }

std::string_view to_string(SiteKind k) {
  switch (k) {
    case SiteKind::ConstString: return "const-string";
    case SiteKind::ConstStringJumbo: return "const-string/jumbo";
    case SiteKind::StaticValue: return "static-value";
  }
  return "?";
}

std::optional<unsigned> dex_entry_number(std::string_view name) {
  constexpr std::string_view prefix = "classes";
  constexpr std::string_view suffix = ".dex";
  if (name.size() < prefix.size() + suffix.size() || !name.starts_with(prefix) ||
      !name.ends_with(suffix)) {
    return std::nullopt;
  }
  const std::string_view digits =
      name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (digits.empty()) return 1;
  if (digits.front() == '0') return std::nullopt;
  unsigned n = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || n < 2) return std::nullopt;
  return n;
}

bool ApkArtifact::has_warning(IngestWarning w) const {
  return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
}

Bytes ApkArtifact::read_dex(std::size_t index) const {
  if (index >= dex_entries.size()) {
    throw Error(ErrorCode::InvalidParams, "dex index " + std::to_string(index) + " out of range");
  }
  return archive->read(dex_entries[index]);
}

ApkArtifact open_apk_bytes(SharedBytes data, std::string path) {
  ApkArtifact a;
  a.path = std::move(path);
  a.size_bytes = data->size();
  a.sha256 = sha256_hex(*data);
  a.archive = std::make_shared<const ZipArchive>(ZipArchive::open(std::move(data)));

  std::vector<std::pair<unsigned, std::string>> dex;
  for (const auto& e : a.archive->entries()) {
    if (const auto n = dex_entry_number(e.name)) dex.emplace_back(*n, e.name);
  }
  std::sort(dex.begin(), dex.end());
  dex.erase(std::unique(dex.begin(), dex.end()), dex.end());
  for (auto& [n, name] : dex) a.dex_entries.push_back(std::move(name));
  if (a.dex_entries.empty()) a.warnings.push_back(IngestWarning::NoDexPresent);

  if (a.archive->find("resources.arsc")) a.resource_table = a.archive->read("resources.arsc");
  return a;
}

ApkArtifact open_apk(const std::string& path) {
  auto bytes = std::make_shared<const Bytes>(read_file(path));
  return open_apk_bytes(std::move(bytes), path);
}

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string_view to_string(TableIssue t) {
  switch (t) {
    case TableIssue::None: return "NONE";
    case TableIssue::MalformedChunk: return "MALFORMED_CHUNK";
    case TableIssue::UnsupportedPoolEncoding: return "UNSUPPORTED_POOL_ENCODING";
  }
  return "?";
}

std::string_view to_string(IngestWarning w) {
  switch (w) {
    case IngestWarning::NoDexPresent: return "NO_DEX_PRESENT";
  }
  return "?";
}

std::string render_strings_xml(std::vector<ResourceString> entries) {
  if (entries.empty()) return {};
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.entry_name, a.value) < std::tie(b.entry_name, b.value);
  });
  std::string doc = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<resources>\n";
  for (const auto& e : entries) {
    doc += "    <string name=\"" + xml_escape(e.entry_name) + "\">" + xml_escape(e.value) +
           "</string>\n";
  }
  doc += "</resources>\n";
  return doc;
}

XmlStrings extract_xml_strings(const ApkArtifact& artifact) {
  XmlStrings out;
  if (!artifact.resource_table) return out;
  ResourceTable table = parse_resource_table(*artifact.resource_table);
  out.issue = table.issue;
  out.package_name = table.package_name;

  std::vector<ResourceString> defaults;
  for (auto& s : table.strings) {
    if (s.config_qualifier.empty()) defaults.push_back(std::move(s));
  }
  std::sort(defaults.begin(), defaults.end());
  defaults.erase(std::unique(defaults.begin(), defaults.end()), defaults.end());
  for (const auto& s : defaults) {
    ExtractedString e;
    e.value = s.value;
    e.source = StringSource::Xml;
    e.resource_entry = s.entry_name;
    out.strings.push_back(std::move(e));
  }
  out.document = render_strings_xml(std::move(defaults));
  return out;
}

}  // namespace apksecrets
