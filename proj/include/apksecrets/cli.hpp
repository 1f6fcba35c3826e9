#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "apksecrets/class_context.hpp"
#include "apksecrets/code_strings.hpp"
#include "apksecrets/llm.hpp"
#include "apksecrets/prefilter.hpp"
#include "apksecrets/providers.hpp"
#include "apksecrets/report.hpp"

namespace apksecrets {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;  // completed, but some phase or app failed
inline constexpr int kExitFatal = 2;    // unreadable input or bad configuration

struct RunConfig {
  ProviderSpec provider;
  PrefilterConfig prefilter;
  ScanMode mode = ScanMode::Standard;
  unsigned concurrency = 1;        // apps scanned side by side
  unsigned label_concurrency = 4;  // labeling calls in flight per app
  std::filesystem::path cache_dir;    // empty: no response cache
  std::filesystem::path rules_dir;    // empty: built-in catalog
  std::filesystem::path prompts_dir;  // empty: built-in templates
  std::filesystem::path mock_script;  // JSON MockScript for the mock endpoint
  std::filesystem::path output_dir = "apksecrets-out";
  bool redact = true;
  bool offline = false;  // refuse anything that would touch the network
  ClassContextOptions context;
  CodeStringOptions code;

  // Throws Error(ConfigError).
  void validate() const;
};

// JSON object mirroring RunConfig; absent keys keep defaults, unknown keys
// are rejected. Throws Error(ConfigError).
RunConfig parse_run_config(const std::string& json_text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

struct ManifestRow {
  std::string location;  // local path or http(s) URL
  std::optional<std::string> sha256;
};

// One entry per line: a path, or "sha256,location". Blank lines and lines
// starting with '#' are skipped.
std::vector<ManifestRow> parse_manifest(const std::string& text);

int cmd_scan(const std::string& apk_path, const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_corpus(const std::filesystem::path& manifest, const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const std::filesystem::path& strings_file, const RunConfig& cfg, std::ostream& out,
                 std::ostream& err);
int cmd_compare(const std::filesystem::path& reports_dir, const std::filesystem::path& ground_truth,
                const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace apksecrets
