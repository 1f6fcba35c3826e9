#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apksecrets/apk.hpp"
#include "apksecrets/class_context.hpp"
#include "apksecrets/code_strings.hpp"
#include "apksecrets/llm.hpp"
#include "apksecrets/prefilter.hpp"
#include "apksecrets/report.hpp"
#include "apksecrets/types.hpp"
#include "apksecrets/validators.hpp"

namespace apksecrets {

struct CandidateSecret {
  std::string value;
  StringSource source = StringSource::Xml;
  std::string resource_entry;   // Xml
  std::vector<CodeSite> sites;  // Code
  Phase phase_found = Phase::A1;
};

struct LabeledSecret {
  CandidateSecret candidate;
  std::string raw_label;
  std::string canonical_label;  // empty when !is_secret
  bool is_secret = false;
  Phase phase_labeled = Phase::A2;
};

// Milliseconds on any monotonic scale.
using ClockMs = std::function<std::int64_t()>;

struct PipelineConfig {
  ProviderSpec provider;
  PrefilterConfig prefilter;
  ScanMode mode = ScanMode::Standard;
  ClassContextOptions context;
  CodeStringOptions code;
  unsigned label_concurrency = 4;  // concurrent A2/B2/contextual calls per app
  bool parallel_branches = true;   // XML and code branches side by side
  bool redact = true;
  ClockMs clock;                   // empty: steady clock
};

// Shared by every app of a run. Provider, cache and limiter must tolerate
// concurrent use; catalog and prompts are read-only.
struct PipelineServices {
  CompletionProvider* provider = nullptr;
  const Catalog* catalog = nullptr;
  const PromptTemplates* prompts = nullptr;
  ResponseCache* cache = nullptr;
  RateLimiter* limiter = nullptr;
};

// One app's view of the provider: caching, rate limiting, retries, the single
// repair re-prompt, and the cost ledger.
class LlmSession {
 public:
  LlmSession(PipelineServices services, ProviderSpec spec, std::string app_sha256, ClockMs clock = {});

  // Returns the first answer `acceptable` approves. Throws ProviderError once
  // retries are exhausted and MalformedResponse when the repair answer is
  // still unacceptable.
  std::string ask(std::size_t item, CompletionRequest req,
                  const std::function<bool(std::string_view)>& acceptable);

  const ProviderSpec& spec() const { return spec_; }
  const PromptTemplates& prompts() const { return *services_.prompts; }
  const Catalog& catalog() const { return *services_.catalog; }
  CostLedger& ledger() { return ledger_; }
  std::int64_t now_ms() const;

 private:
  CompletionResponse send(const CompletionRequest& req);

  PipelineServices services_;
  ProviderSpec spec_;
  std::string app_sha256_;
  ClockMs clock_;
  CostLedger ledger_;
};

// Answer parsing. Code fences and prose around the JSON payload are tolerated.
std::optional<std::vector<std::string>> parse_value_list(std::string_view text);
struct IdentifierAnswer {
  std::vector<std::int64_t> indices;  // 1-based entry numbers
  std::vector<std::string> values;
};
std::optional<IdentifierAnswer> parse_identifier_list(std::string_view text);
std::optional<std::string> parse_label(std::string_view text);
std::optional<bool> parse_verdict(std::string_view text);

// Splits `item_chars` into consecutive [begin, end) runs so that
// ceil((overhead_chars + run chars + separators) / chars_per_token) stays
// within max_tokens. An item that alone exceeds the budget gets its own run.
std::vector<std::pair<std::size_t, std::size_t>> greedy_chunks(const std::vector<std::size_t>& item_chars,
                                                               std::size_t overhead_chars,
                                                               std::size_t separator_chars,
                                                               std::int64_t max_tokens,
                                                               double chars_per_token);

struct XmlChunk {
  std::string document;
  std::vector<std::size_t> members;  // indices into XmlStrings::strings
};

// Element-boundary split of the strings.xml rendering for the A1 prompt.
std::vector<XmlChunk> plan_xml_chunks(const XmlStrings& xml, const PromptTemplates& prompts,
                                      const ProviderSpec& spec);

struct IdentifyResult {
  std::vector<CandidateSecret> candidates;
  std::size_t hallucinations = 0;
  std::size_t chunks = 0;
};

IdentifyResult phase_a1_identify(const XmlStrings& xml, LlmSession& session);
LabeledSecret phase_a2_label(const CandidateSecret& candidate, const XmlStrings& xml,
                             LlmSession& session, std::size_t item = 0);

// Renders "N. \"value\"" lines and splits them for the B1 prompt.
std::vector<std::string> b1_lines(const std::vector<ExtractedString>& kept);
std::vector<std::pair<std::size_t, std::size_t>> plan_b1_chunks(const std::vector<ExtractedString>& kept,
                                                                const PromptTemplates& prompts,
                                                                const ProviderSpec& spec);

IdentifyResult phase_b1_identify(const std::vector<ExtractedString>& kept, LlmSession& session);
LabeledSecret phase_b2_label(const CandidateSecret& candidate, const ClassContext& context,
                             LlmSession& session, std::size_t item = 0);
bool phase_b1_contextual(const ExtractedString& s, const ClassContext& context, LlmSession& session,
                         std::size_t item = 0);

// Extraction, both branches, validation and report assembly for one app.
// Phase failures are recorded in the report; only a broken artifact throws.
ScanReport run_pipeline(const ApkArtifact& artifact, const PipelineConfig& config,
                        const PipelineServices& services);

}  // namespace apksecrets
