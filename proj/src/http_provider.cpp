#include <httplib.h>
#include <json.hpp>

#include <cstdlib>

#include "apksecrets/error.hpp"
#include "apksecrets/providers.hpp"

namespace apksecrets {

HttpProvider::HttpProvider(ProviderSpec spec) : spec_(std::move(spec)) {
  const std::string& ep = spec_.endpoint;
  const auto scheme_end = ep.find("://");
  if (scheme_end == std::string::npos || !(ep.starts_with("http://") || ep.starts_with("https://"))) {
    throw Error(ErrorCode::ConfigError, "endpoint must be an http(s) URL or 'mock': " + ep);
  }
  const auto path_start = ep.find('/', scheme_end + 3);
  scheme_host_port_ = ep.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : ep.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  if (const char* key = std::getenv(spec_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpProvider::request_body(const ProviderSpec& spec, const CompletionRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  messages.push_back({{"role", "user"}, {"content", req.prompt}});
  if (req.repair) {
    messages.push_back({{"role", "assistant"}, {"content", req.previous_response}});
    messages.push_back({{"role", "user"}, {"content", req.repair_prompt}});
  }
  nlohmann::json body{{"model", spec.model_id}, {"messages", messages}, {"temperature", spec.temperature}};
  return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

CompletionResponse HttpProvider::parse_body(const std::string& body) {
  CompletionResponse r;
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    r.text = content.is_string() ? content.get<std::string>() : std::string();
    if (j.contains("usage") && j["usage"].is_object()) {
      const auto& u = j["usage"];
      r.usage = Usage{u.value("prompt_tokens", std::int64_t{0}), u.value("completion_tokens", std::int64_t{0})};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderError, std::string("unexpected response body: ") + e.what());
  }
  return r;
}

CompletionResponse HttpProvider::complete(const CompletionRequest& req) {
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration<double>(spec_.request_timeout_s);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(base_path_ + "/chat/completions", headers, request_body(spec_, req),
                         "application/json");
  if (!res) {
    throw Error(ErrorCode::ProviderError, "request to " + spec_.endpoint + " failed: " +
                                              httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ProviderError,
                "provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return parse_body(res->body);
}

std::unique_ptr<CompletionProvider> make_provider(const ProviderSpec& spec, const MockScript& script) {
  if (spec.is_mock()) return std::make_unique<MockProvider>(script);
  return std::make_unique<HttpProvider>(spec);
}

}  // namespace apksecrets
