#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apksecrets {

enum class Phase { A1, A2, B1, B2, B1Contextual };

std::string_view to_string(Phase p);
std::optional<Phase> phase_from_string(std::string_view s);

// Money in picodollars. A price of P nanodollars per 1k tokens costs exactly
// P picodollars per token, so ledger arithmetic stays integral.
struct Money {
  std::int64_t pico = 0;

  Money& operator+=(Money o) {
    pico += o.pico;
    return *this;
  }
  friend Money operator+(Money a, Money b) { return Money{a.pico + b.pico}; }
  friend bool operator==(Money, Money) = default;
  friend auto operator<=>(Money, Money) = default;

  double usd() const { return static_cast<double>(pico) / 1e12; }
};

// "$0.008123" style; `decimals` digits after the point, rounded half-up.
std::string format_usd(Money m, int decimals = 6);

// Exact decimal dollars ("0.00015") to nanodollars. Throws Error(ConfigError).
std::int64_t parse_nano_usd(std::string_view decimal);

struct ProviderSpec {
  std::string model_id = "gpt-4o-mini";
  std::string endpoint = "mock";              // "mock" or an http(s) base URL
  std::int64_t prompt_price_nano_per_1k = 150000;      // $0.00015 per 1k prompt tokens
  std::int64_t completion_price_nano_per_1k = 600000;  // $0.0006 per 1k completion tokens
  std::int64_t max_context_tokens = 128000;
  double request_timeout_s = 60.0;
  int max_retries = 2;
  double retry_backoff_s = 1.0;  // doubled after each failed attempt
  double chars_per_token = 4.0;
  double temperature = 0.0;
  std::string api_key_env = "OPENAI_API_KEY";
  int requests_per_minute = 0;  // 0 = unlimited
  std::int64_t tokens_per_minute = 0;

  bool is_mock() const { return endpoint == "mock"; }
  // Throws Error(ConfigError).
  void validate() const;

  friend bool operator==(const ProviderSpec&, const ProviderSpec&) = default;
};

// ceil(chars / chars_per_token), at least 1 for non-empty text.
std::int64_t estimate_tokens(std::string_view text, double chars_per_token);

Money call_cost(const ProviderSpec& spec, std::int64_t prompt_tokens,
                std::int64_t completion_tokens);

struct CompletionRequest {
  Phase phase = Phase::A1;
  std::string system;
  std::string prompt;
  // Set on the single repair attempt: the unparseable answer and the follow-up
  // instruction, sent as extra conversation turns after `prompt`.
  bool repair = false;
  std::string previous_response;
  std::string repair_prompt;

  // The inputs the prompt was rendered from. HTTP providers ignore these;
  // the mock provider decides on them instead of parsing prompt text.
  std::vector<std::string> items;  // A1: entry values of the chunk; B1: numbered strings
  std::string candidate;
  std::string context;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  friend bool operator==(const Usage&, const Usage&) = default;
};

struct CompletionResponse {
  std::string text;
  std::optional<Usage> usage;  // when the provider reports it
};

// Prompt-side token estimate of a whole request (system + user turns).
std::int64_t request_tokens(const CompletionRequest& req, double chars_per_token);

// Implementations throw Error(ProviderError) for failures worth retrying.
// Must be safe to call from several threads.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual CompletionResponse complete(const CompletionRequest& req) = 0;
  virtual std::string name() const = 0;
};

struct LedgerRecord {
  Phase phase = Phase::A1;
  std::size_t item = 0;  // chunk or candidate index within the phase
  bool repair = false;
  bool cached = false;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t latency_ms = 0;
  Money cost;

  friend bool operator==(const LedgerRecord&, const LedgerRecord&) = default;
};

struct LedgerTotals {
  std::size_t calls = 0;  // provider calls, cache hits excluded
  std::size_t cached = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  Money cost;

  friend bool operator==(const LedgerTotals&, const LedgerTotals&) = default;
};

LedgerTotals sum_ledger(const std::vector<LedgerRecord>& records);

// Accepts concurrent appends.
class CostLedger {
 public:
  void append(LedgerRecord r);
  // Records in (phase, item, repair) order, independent of arrival order.
  std::vector<LedgerRecord> records() const;
  LedgerTotals totals() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<LedgerRecord> records_;
};

// Shared request/token budget across all workers. Zero limits disable it.
class RateLimiter {
 public:
  RateLimiter(int requests_per_minute, std::int64_t tokens_per_minute);
  void acquire(std::int64_t tokens);

 private:
  using Clock = std::chrono::steady_clock;
  void refill(Clock::time_point now);

  std::mutex mu_;
  double rpm_, tpm_;
  double request_tokens_, token_tokens_;
  Clock::time_point last_;
};

// Content-addressed response store: one file per key under `dir`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(std::string_view app_sha256, std::string_view model_id,
                         std::string_view template_version, Phase phase,
                         std::string_view payload);

  std::optional<CompletionResponse> get(const std::string& key) const;
  void put(const std::string& key, const CompletionResponse& resp) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

struct PromptTemplates {
  std::map<std::string, std::string> files;  // file name -> text
  std::string version;                       // sha256 over all files

  const std::string& get(std::string_view name) const;  // throws ConfigError
};

PromptTemplates default_prompts();
PromptTemplates load_prompts(const std::filesystem::path& dir);

// Replaces {{name}} placeholders. Unknown placeholders are left as they are.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace apksecrets
