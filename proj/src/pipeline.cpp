#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "apksecrets/error.hpp"
#include "apksecrets/pipeline.hpp"

namespace apksecrets {

namespace {

std::int64_t steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::int64_t tokens_for(std::size_t chars, double cpt) {
  if (chars == 0) return 0;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(static_cast<double>(chars) / cpt)));
}

std::string json_quote(std::string_view s) {
  return nlohmann::json(std::string(s)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace

LlmSession::LlmSession(PipelineServices services, ProviderSpec spec, std::string app_sha256, ClockMs clock)
    : services_(services), spec_(std::move(spec)), app_sha256_(std::move(app_sha256)), clock_(std::move(clock)) {
  if (!services_.provider || !services_.catalog || !services_.prompts) {
    throw Error(ErrorCode::ConfigError, "pipeline services incomplete");
  }
}

std::int64_t LlmSession::now_ms() const { return clock_ ? clock_() : steady_ms(); }

CompletionResponse LlmSession::send(const CompletionRequest& req) {
  double backoff = spec_.retry_backoff_s;
  for (int attempt = 0;; ++attempt) {
    if (services_.limiter) services_.limiter->acquire(request_tokens(req, spec_.chars_per_token));
    try {
      return services_.provider->complete(req);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProviderError || attempt >= spec_.max_retries) throw;
    } catch (const std::exception& e) {
      if (attempt >= spec_.max_retries) throw Error(ErrorCode::ProviderError, e.what());
    }
    if (backoff > 0) std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    backoff *= 2;
  }
}

std::string LlmSession::ask(std::size_t item, CompletionRequest req,
                            const std::function<bool(std::string_view)>& acceptable) {
  std::string key;
  if (services_.cache) {
    std::string payload = req.system;
    payload.push_back('\0');
    payload += req.prompt;
    key = ResponseCache::key(app_sha256_, spec_.model_id, services_.prompts->version, req.phase, payload);
    if (auto hit = services_.cache->get(key); hit && acceptable(hit->text)) {
      LedgerRecord r;
      r.phase = req.phase;
      r.item = item;
      r.cached = true;
      if (hit->usage) {
        r.prompt_tokens = hit->usage->prompt_tokens;
        r.completion_tokens = hit->usage->completion_tokens;
      }
      ledger_.append(r);
      return hit->text;
    }
  }

  auto exchange = [&](const CompletionRequest& rq) {
    const std::int64_t t0 = now_ms();
    CompletionResponse resp = send(rq);
    LedgerRecord r;
    r.phase = rq.phase;
    r.item = item;
    r.repair = rq.repair;
    r.latency_ms = now_ms() - t0;
    if (!resp.usage) {
      resp.usage = Usage{request_tokens(rq, spec_.chars_per_token),
                         estimate_tokens(resp.text, spec_.chars_per_token)};
    }
    r.prompt_tokens = resp.usage->prompt_tokens;
    r.completion_tokens = resp.usage->completion_tokens;
    r.cost = call_cost(spec_, r.prompt_tokens, r.completion_tokens);
    ledger_.append(r);
    return resp;
  };

  CompletionResponse first = exchange(req);
  if (acceptable(first.text)) {
    if (services_.cache) services_.cache->put(key, first);
    return first.text;
  }
  req.repair = true;
  req.previous_response = first.text;
  req.repair_prompt = services_.prompts->get("repair.txt");
  CompletionResponse second = exchange(req);
  if (acceptable(second.text)) {
    if (services_.cache) services_.cache->put(key, second);
    return second.text;
  }
  throw Error(ErrorCode::MalformedResponse,
              std::string(to_string(req.phase)) + " answer is not the requested JSON: " +
                  second.text.substr(0, 120));
}

namespace {

std::optional<nlohmann::json> json_payload(std::string_view text) {
  auto try_parse = [](std::string_view s) -> std::optional<nlohmann::json> {
    auto j = nlohmann::json::parse(s.begin(), s.end(), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  };
  if (auto j = try_parse(text)) return j;
  // Models like to wrap answers in fences or a sentence; take the outermost
  // bracketed span.
  const auto open = text.find_first_of("[{");
  if (open == std::string_view::npos) return std::nullopt;
  const char close_ch = text[open] == '[' ? ']' : '}';
  const auto close = text.rfind(close_ch);
  if (close == std::string_view::npos || close < open) return std::nullopt;
  return try_parse(text.substr(open, close - open + 1));
}

// Some models wrap the list in an object with a single array member.
const nlohmann::json* unwrap_array(const nlohmann::json& j) {
  if (j.is_array()) return &j;
  if (j.is_object() && j.size() == 1 && j.begin()->is_array()) return &*j.begin();
  return nullptr;
}

}  // namespace

std::optional<std::vector<std::string>> parse_value_list(std::string_view text) {
  auto j = json_payload(text);
  if (!j) return std::nullopt;
  const nlohmann::json* arr = unwrap_array(*j);
  if (!arr) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& e : *arr) {
    if (!e.is_string()) return std::nullopt;
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::optional<IdentifierAnswer> parse_identifier_list(std::string_view text) {
  auto j = json_payload(text);
  if (!j) return std::nullopt;
  const nlohmann::json* arr = unwrap_array(*j);
  if (!arr) return std::nullopt;
  IdentifierAnswer out;
  for (const auto& e : *arr) {
    if (e.is_number_integer()) out.indices.push_back(e.get<std::int64_t>());
    else if (e.is_string()) out.values.push_back(e.get<std::string>());
    else return std::nullopt;
  }
  return out;
}

std::optional<std::string> parse_label(std::string_view text) {
  auto j = json_payload(text);
  if (!j) return std::nullopt;
  if (j->is_object() && j->contains("label") && (*j)["label"].is_string()) {
    return (*j)["label"].get<std::string>();
  }
  if (j->is_string()) return j->get<std::string>();
  return std::nullopt;
}

std::optional<bool> parse_verdict(std::string_view text) {
  auto j = json_payload(text);
  if (!j) return std::nullopt;
  const nlohmann::json* v = j.operator->();
  if (j->is_object()) {
    if (!j->contains("is_secret")) return std::nullopt;
    v = &(*j)["is_secret"];
  }
  if (v->is_boolean()) return v->get<bool>();
  if (v->is_string()) {
    const std::string s = v->get<std::string>();
    if (s == "true" || s == "yes") return true;
    if (s == "false" || s == "no") return false;
  }
  return std::nullopt;
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_chunks(const std::vector<std::size_t>& item_chars,
                                                               std::size_t overhead_chars,
                                                               std::size_t separator_chars,
                                                               std::int64_t max_tokens,
                                                               double chars_per_token) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t begin = 0, run_chars = 0;
  for (std::size_t i = 0; i < item_chars.size(); ++i) {
    if (i == begin) {
      run_chars = item_chars[i];
      continue;
    }
    const std::size_t grown = run_chars + separator_chars + item_chars[i];
    if (tokens_for(overhead_chars + grown, chars_per_token) > max_tokens) {
      runs.emplace_back(begin, i);
      begin = i;
      run_chars = item_chars[i];
    } else {
      run_chars = grown;
    }
  }
  if (begin < item_chars.size()) runs.emplace_back(begin, item_chars.size());
  return runs;
}

namespace {

ResourceString as_resource(const ExtractedString& s) { return ResourceString{s.resource_entry, s.value, "", false}; }

std::string a1_prompt(const PromptTemplates& p, const std::string& document) {
  return render_template(p.get("a1_identify.txt"), {{"document", document}});
}

}  // namespace

std::vector<XmlChunk> plan_xml_chunks(const XmlStrings& xml, const PromptTemplates& prompts,
                                      const ProviderSpec& spec) {
  std::vector<XmlChunk> out;
  if (xml.strings.empty()) return out;
  const std::size_t overhead = prompts.get("system.txt").size() + a1_prompt(prompts, "").size();
  // Document frame shared by every chunk; element size is a one-entry
  // rendering minus the frame.
  const std::size_t wrapper =
      render_strings_xml({ResourceString{}}).size() - std::string_view("    <string name=\"\"></string>\n").size();
  std::vector<std::size_t> sizes;
  for (const auto& s : xml.strings) {
    sizes.push_back(render_strings_xml({as_resource(s)}).size() - wrapper);
  }
  for (auto [b, e] : greedy_chunks(sizes, overhead + wrapper, 0, spec.max_context_tokens, spec.chars_per_token)) {
    XmlChunk c;
    std::vector<ResourceString> entries;
    for (std::size_t i = b; i < e; ++i) {
      c.members.push_back(i);
      entries.push_back(as_resource(xml.strings[i]));
    }
    c.document = render_strings_xml(std::move(entries));
    out.push_back(std::move(c));
  }
  return out;
}

IdentifyResult phase_a1_identify(const XmlStrings& xml, LlmSession& session) {
  IdentifyResult out;
  if (xml.strings.empty()) return out;
  const auto& prompts = session.prompts();
  const auto chunks = plan_xml_chunks(xml, prompts, session.spec());
  out.chunks = chunks.size();
  std::unordered_map<std::string, bool> seen;
  for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
    const XmlChunk& chunk = chunks[ci];
    CompletionRequest req;
    req.phase = Phase::A1;
    req.system = prompts.get("system.txt");
    req.prompt = a1_prompt(prompts, chunk.document);
    for (std::size_t m : chunk.members) req.items.push_back(xml.strings[m].value);
    const std::string answer =
        session.ask(ci, req, [](std::string_view t) { return parse_value_list(t).has_value(); });
    // Exact match back to an entry of this chunk, raw or as escaped in the document.
    std::unordered_map<std::string, std::size_t> lookup;
    for (std::size_t m : chunk.members) {
      lookup.try_emplace(xml.strings[m].value, m);
      lookup.try_emplace(xml_escape(xml.strings[m].value), m);
    }
    const auto values = parse_value_list(answer);
    for (const auto& v : *values) {
      auto it = lookup.find(v);
      if (v.empty() || it == lookup.end()) {
        ++out.hallucinations;
        continue;
      }
      const ExtractedString& s = xml.strings[it->second];
      if (seen.emplace(s.value, true).second) {
        out.candidates.push_back(CandidateSecret{s.value, StringSource::Xml, s.resource_entry, {}, Phase::A1});
      }
    }
  }
  return out;
}

namespace {

LabeledSecret make_labeled(const CandidateSecret& c, const std::string& raw, Phase phase, const Catalog& catalog) {
  LabeledSecret l;
  l.candidate = c;
  l.raw_label = raw;
  l.phase_labeled = phase;
  l.is_secret = !is_not_secret_label(raw);
  if (l.is_secret) l.canonical_label = normalize_label(raw, catalog);
  return l;
}

bool label_ok(std::string_view t) { return parse_label(t).has_value(); }

}  // namespace

LabeledSecret phase_a2_label(const CandidateSecret& candidate, const XmlStrings& xml, LlmSession& session,
                             std::size_t item) {
  const auto& prompts = session.prompts();
  CompletionRequest req;
  req.phase = Phase::A2;
  req.system = prompts.get("system.txt");
  req.candidate = candidate.value;
  req.context = xml.document;
  req.prompt = render_template(prompts.get("a2_label.txt"), {{"candidate", candidate.value}, {"document", xml.document}});
  if (request_tokens(req, session.spec().chars_per_token) > session.spec().max_context_tokens) {
    for (const auto& chunk : plan_xml_chunks(xml, prompts, session.spec())) {
      const bool here = std::any_of(chunk.members.begin(), chunk.members.end(), [&](std::size_t m) {
        return xml.strings[m].value == candidate.value;
      });
      if (!here) continue;
      req.context = chunk.document;
      req.prompt = render_template(prompts.get("a2_label.txt"), {{"candidate", candidate.value}, {"document", chunk.document}});
      break;
    }
  }
  const std::string answer = session.ask(item, req, label_ok);
  return make_labeled(candidate, *parse_label(answer), Phase::A2, session.catalog());
}

std::vector<std::string> b1_lines(const std::vector<ExtractedString>& kept) {
  std::vector<std::string> out;
  out.reserve(kept.size());
  for (const auto& s : kept) out.push_back(json_quote(s.value));
  return out;
}

namespace {

std::string b1_prompt(const PromptTemplates& p, const std::string& list) {
  return render_template(p.get("b1_identify.txt"), {{"strings", list}});
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> plan_b1_chunks(const std::vector<ExtractedString>& kept,
                                                                const PromptTemplates& prompts,
                                                                const ProviderSpec& spec) {
  const auto lines = b1_lines(kept);
  std::vector<std::size_t> sizes;
  sizes.reserve(lines.size());
  // Sized with global numbering; chunks number from 1, so rendered lines are
  // never longer than planned.
  for (std::size_t i = 0; i < lines.size(); ++i) sizes.push_back(std::to_string(i + 1).size() + 2 + lines[i].size());
  const std::size_t overhead = prompts.get("system.txt").size() + b1_prompt(prompts, "").size();
  return greedy_chunks(sizes, overhead, 1, spec.max_context_tokens, spec.chars_per_token);
}

IdentifyResult phase_b1_identify(const std::vector<ExtractedString>& kept, LlmSession& session) {
  IdentifyResult out;
  if (kept.empty()) return out;
  const auto& prompts = session.prompts();
  const auto lines = b1_lines(kept);
  const auto runs = plan_b1_chunks(kept, prompts, session.spec());
  out.chunks = runs.size();
  std::unordered_map<std::string, bool> seen;
  for (std::size_t ci = 0; ci < runs.size(); ++ci) {
    const auto [b, e] = runs[ci];
    std::string list;
    CompletionRequest req;
    req.phase = Phase::B1;
    req.system = prompts.get("system.txt");
    for (std::size_t i = b; i < e; ++i) {
      if (i > b) list.push_back('\n');
      list += std::to_string(i - b + 1) + ". " + lines[i];
      req.items.push_back(kept[i].value);
    }
    req.prompt = b1_prompt(prompts, list);
    const std::string answer =
        session.ask(ci, req, [](std::string_view t) { return parse_identifier_list(t).has_value(); });
    const IdentifierAnswer parsed = *parse_identifier_list(answer);
    std::vector<std::size_t> picked;
    for (std::int64_t idx : parsed.indices) {
      if (idx < 1 || static_cast<std::size_t>(idx) > e - b) {
        ++out.hallucinations;
        continue;
      }
      picked.push_back(b + static_cast<std::size_t>(idx) - 1);
    }
    for (const auto& v : parsed.values) {
      std::size_t found = e;
      for (std::size_t i = b; i < e; ++i) {
        if (kept[i].value == v) {
          found = i;
          break;
        }
      }
      if (found == e) {
        ++out.hallucinations;
        continue;
      }
      picked.push_back(found);
    }
    for (std::size_t i : picked) {
      if (!seen.emplace(kept[i].value, true).second) continue;
      out.candidates.push_back(CandidateSecret{kept[i].value, StringSource::Code, "", kept[i].sites, Phase::B1});
    }
  }
  return out;
}

LabeledSecret phase_b2_label(const CandidateSecret& candidate, const ClassContext& context, LlmSession& session,
                             std::size_t item) {
  const auto& prompts = session.prompts();
  CompletionRequest req;
  req.phase = Phase::B2;
  req.system = prompts.get("system.txt");
  req.candidate = candidate.value;
  req.context = context.text;
  req.prompt = render_template(prompts.get("b2_label.txt"), {{"candidate", candidate.value}, {"context", context.text}});
  const std::string answer = session.ask(item, req, label_ok);
  return make_labeled(candidate, *parse_label(answer), Phase::B2, session.catalog());
}

bool phase_b1_contextual(const ExtractedString& s, const ClassContext& context, LlmSession& session,
                         std::size_t item) {
  const auto& prompts = session.prompts();
  CompletionRequest req;
  req.phase = Phase::B1Contextual;
  req.system = prompts.get("system.txt");
  req.candidate = s.value;
  req.context = context.text;
  req.prompt = render_template(prompts.get("b1_contextual.txt"), {{"candidate", s.value}, {"context", context.text}});
  const std::string answer =
      session.ask(item, req, [](std::string_view t) { return parse_verdict(t).has_value(); });
  return *parse_verdict(answer);
}

}  // namespace apksecrets
