#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apksecrets {

enum class RuleTier { Confirming, Indicative };
enum class RuleProvenance { Benchmark, Extended, Artifact };
enum class MatchMode { Find, Full };

std::string_view to_string(RuleTier t);
std::string_view to_string(RuleProvenance p);

struct RegexRule {
  std::string id;
  std::string service;  // canonical label
  std::string pattern;
  RuleTier tier = RuleTier::Confirming;
  RuleProvenance provenance = RuleProvenance::Artifact;
  MatchMode mode = MatchMode::Find;
  bool public_or_test = false;
  bool icase = false;
  std::string notes;
  std::string source;  // "file:line"

  bool matches(std::string_view value) const;

  struct Compiled;
  std::shared_ptr<const Compiled> compiled;
};

struct RuleSource {
  std::string name;     // file name; ".rules" or ".synonyms" decides the parser
  std::string content;
};

// Immutable after load; safe to share between threads.
struct Catalog {
  std::vector<RegexRule> rules;               // catalog order
  std::map<std::string, std::string> synonyms; // normalized variant -> canonical
  std::string hash;                           // sha256 over sources, in load order

  const RegexRule* find(std::string_view id) const;
};

// Throws Error(RuleParseError) naming file and line.
Catalog catalog_load(const std::vector<RuleSource>& sources);
Catalog catalog_load(const std::vector<std::filesystem::path>& rule_files);
// All *.rules and *.synonyms files of `dir`, sorted by file name.
Catalog catalog_load_dir(const std::filesystem::path& dir);
// The catalog compiled into the library from rules/.
const Catalog& default_catalog();

enum class ValidationStatus { Confirmed, ConfirmedAfterBase64, PublicOrTest, Unconfirmed };

std::string_view to_string(ValidationStatus s);
std::optional<ValidationStatus> validation_status_from_string(std::string_view s);

struct ValidationResult {
  ValidationStatus status = ValidationStatus::Unconfirmed;
  std::optional<std::string> matched_service;
  std::optional<std::string> decoded_form;
  std::optional<std::string> rule_id;
  std::optional<std::string> indicative_service;  // INDICATIVE-tier hit, informational

  friend bool operator==(const ValidationResult&, const ValidationResult&) = default;
};

// First CONFIRMING match in catalog order decides; public/test rules give
// PublicOrTest.
ValidationResult validate(std::string_view value, const Catalog& catalog);

// Decodes syntactically valid Base64 (standard or URL-safe, length >= 16,
// padding optional) and validates the decoded text if it is printable.
ValidationResult base64_rescan(std::string_view value, const Catalog& catalog);

// validate(), falling back to base64_rescan() when nothing confirms.
ValidationResult validate_with_rescan(std::string_view value, const Catalog& catalog);

inline constexpr std::size_t kMinBase64Length = 16;

// nullopt when `value` is not acceptable Base64 under the rescan rules.
std::optional<std::string> base64_decode(std::string_view value);

// Uppercase, trim, collapse separators to '_'. No synonym mapping.
std::string normalize_label_form(std::string_view raw);

// normalize_label_form() followed by the synonym table. Unknown labels pass
// through in normalized form.
std::string normalize_label(std::string_view raw, const Catalog& catalog);

inline constexpr std::string_view kNotSecretLabel = "NOT-SECRET";
bool is_not_secret_label(std::string_view raw);

}  // namespace apksecrets
