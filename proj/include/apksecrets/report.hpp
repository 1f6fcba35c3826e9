#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apksecrets/llm.hpp"
#include "apksecrets/prefilter.hpp"
#include "apksecrets/types.hpp"
#include "apksecrets/validators.hpp"

namespace apksecrets {

inline constexpr int kReportSchemaVersion = 1;

enum class ScanMode { Standard, ContextualB1 };

std::string_view to_string(ScanMode m);
std::optional<ScanMode> scan_mode_from_string(std::string_view s);

struct Finding {
  std::string value;         // full value, or redacted when the report is
  std::string value_sha256;  // of the full value; lets redacted reports be compared
  StringSource source = StringSource::Xml;
  std::string resource_entry;
  std::vector<CodeSite> sites;
  std::string raw_label;
  std::string canonical_label;
  ValidationResult validation;  // decoded_form redacted along with value
  std::optional<std::string> decoded_sha256;
  std::vector<Phase> phases;  // identification phase, then labeling phase

  std::string origin() const;
  friend bool operator==(const Finding&, const Finding&) = default;
};

struct PhaseError {
  Phase phase = Phase::A1;
  std::string code;
  std::string message;
  friend bool operator==(const PhaseError&, const PhaseError&) = default;
};

struct PrefilterStats {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped;  // reason code -> count
  friend bool operator==(const PrefilterStats&, const PrefilterStats&) = default;
};

struct ExtractionStats {
  std::size_t dex_files = 0;
  std::size_t xml_strings = 0;
  std::size_t code_strings = 0;
  std::size_t string_table_size = 0;
  std::size_t walk_issues = 0;
  friend bool operator==(const ExtractionStats&, const ExtractionStats&) = default;
};

struct ConfigFingerprint {
  std::string model_id;
  std::string template_version;
  std::string ruleset_hash;
  ScanMode mode = ScanMode::Standard;
  PrefilterConfig prefilter;
  friend bool operator==(const ConfigFingerprint&, const ConfigFingerprint&) = default;
};

struct ScanReport {
  int schema_version = kReportSchemaVersion;
  std::string app_sha256;
  std::string package_name;
  bool redacted = true;
  std::vector<Finding> findings;
  std::vector<std::string> skipped_phases;
  std::vector<std::string> warnings;
  std::vector<PhaseError> errors;
  ExtractionStats extraction;
  PrefilterStats prefilter;
  std::size_t hallucinations = 0;
  std::vector<LedgerRecord> ledger;
  LedgerTotals totals;
  std::map<std::string, std::int64_t> timings_ms;  // phase name -> wall time
  ConfigFingerprint config;

  friend bool operator==(const ScanReport&, const ScanReport&) = default;
};

// First 4 and last 2 characters kept, the rest masked; values of 8 or fewer
// characters are masked entirely. Counts code points, not bytes.
std::string redact(std::string_view value);

// Masks every finding value (and decoded form). Idempotent.
ScanReport redacted(ScanReport report);

std::string render_json(const ScanReport& report);
ScanReport parse_report_json(const std::string& text);  // throws ReportParseError
std::string render_table(const ScanReport& report);

struct CorpusSummary {
  std::size_t apps = 0;
  std::size_t apps_with_findings = 0;
  double prevalence_percent = 0.0;
  std::size_t findings = 0;
  std::size_t apps_with_errors = 0;
  std::map<std::string, std::size_t> by_label;
  std::map<std::string, std::size_t> by_status;
  std::map<std::string, std::size_t> by_source;
  Money total_cost;
  std::size_t provider_calls = 0;
  std::vector<std::string> failed_inputs;  // sorted; apps that never produced a report

  friend bool operator==(const CorpusSummary&, const CorpusSummary&) = default;
};

CorpusSummary aggregate(const std::vector<ScanReport>& reports);
std::string render_json(const CorpusSummary& summary);
std::string render_table(const CorpusSummary& summary);

struct GroundTruthEntry {
  std::string app_sha256;
  std::string secret_value;
  std::string category;
};

// CSV with header "sha256,value,category"; RFC 4180 quoting. Throws
// Error(GroundTruthParseError).
std::vector<GroundTruthEntry> parse_ground_truth(const std::string& csv_text);

enum class Disposition { Both, OnlyOurs, OnlyBaseline };
std::string_view to_string(Disposition d);

struct DispositionRow {
  std::string app_sha256;
  std::string value;  // redacted
  std::string label;  // our canonical label, or the baseline category
  Disposition disposition = Disposition::Both;
};

struct OverlapSummary {
  std::size_t both = 0;
  std::size_t only_ours = 0;
  std::size_t only_baseline = 0;
  double recall = 1.0;
  bool empty_baseline = false;
  std::vector<DispositionRow> rows;
};

// Keys are (app sha256, exact value). A finding also matches on its decoded
// Base64 form. Findings are compared through value_sha256, so redacted
// reports work.
OverlapSummary compare_with_baseline(const std::vector<ScanReport>& reports,
                                     const std::vector<GroundTruthEntry>& ground_truth);
std::string render_json(const OverlapSummary& summary);

// Plain-text notification for the app's developer. Carries labels, counts and
// locations, never values. Throws Error(NoFindings).
std::string disclosure_export(const ScanReport& report, const std::optional<std::string>& contact = {});

// "GOOGLE_API_KEY" -> "Google API key".
std::string display_label(std::string_view canonical);

// Sample size for estimating a proportion (p = 0.5) at the given confidence
// (0.90, 0.95 or 0.99) and margin, with finite-population correction when a
// population is given, rounded to the nearest integer. Throws InvalidParams.
std::uint64_t sample_plan(std::optional<std::uint64_t> population, double confidence, double margin);

}  // namespace apksecrets
