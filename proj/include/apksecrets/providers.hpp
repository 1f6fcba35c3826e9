#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "apksecrets/llm.hpp"

namespace apksecrets {

struct MockLabelRule {
  std::string prefix;
  std::string label;
};

// Applies only to key-shaped candidates: 16+ characters, no whitespace,
// letters and digits both present.
struct MockContextRule {
  std::string keyword;  // case-insensitive substring of the class context
  std::string label;
};

// Behaviour of the offline provider. Identification flags values that start
// with a marker prefix; labeling answers from the prefix table, then from
// context keywords, else NOT-SECRET.
struct MockScript {
  std::vector<std::string> secret_prefixes;
  std::vector<MockLabelRule> labels;
  std::vector<MockContextRule> context_rules;
  std::vector<std::string> hallucinations;  // appended to every identification answer
  bool b1_answer_with_values = false;       // values instead of entry numbers
  int malformed_first = 0;                  // first N answers are not JSON
  int fail_first = 0;                       // first N calls throw ProviderError
  std::vector<Usage> usage_script;          // reported usage for answers 1..N
};

MockScript default_mock_script();
// Fields absent from `json_text` keep their defaults. Throws Error(ConfigError).
MockScript mock_script_from_json(const std::string& json_text);

class MockProvider : public CompletionProvider {
 public:
  explicit MockProvider(MockScript script = default_mock_script());

  CompletionResponse complete(const CompletionRequest& req) override;
  std::string name() const override { return "mock"; }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string identify(const CompletionRequest& req) const;
  std::string label_for(const std::string& candidate, const std::string& context) const;
  bool flagged(const std::string& value) const;

  MockScript script_;
  std::atomic<std::size_t> calls_{0};
};

// Chat-completions client: POST {endpoint}/chat/completions with a bearer
// token read from the environment variable named by api_key_env.
class HttpProvider : public CompletionProvider {
 public:
  explicit HttpProvider(ProviderSpec spec);

  CompletionResponse complete(const CompletionRequest& req) override;
  std::string name() const override { return "http:" + spec_.endpoint; }

  // Exposed for tests.
  static std::string request_body(const ProviderSpec& spec, const CompletionRequest& req);
  static CompletionResponse parse_body(const std::string& body);

 private:
  ProviderSpec spec_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string base_path_;
};

// Mock when the endpoint is "mock", HTTP otherwise.
std::unique_ptr<CompletionProvider> make_provider(const ProviderSpec& spec,
                                                  const MockScript& script = default_mock_script());

}  // namespace apksecrets
