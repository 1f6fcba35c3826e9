#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "apksecrets/assets.hpp"
#include "apksecrets/bytes.hpp"
#include "apksecrets/error.hpp"
#include "apksecrets/llm.hpp"

namespace apksecrets {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::A1: return "A1";
    case Phase::A2: return "A2";
    case Phase::B1: return "B1";
    case Phase::B2: return "B2";
    case Phase::B1Contextual: return "B1_CONTEXTUAL";
  }
  return "?";
}

std::optional<Phase> phase_from_string(std::string_view s) {
  for (auto p : {Phase::A1, Phase::A2, Phase::B1, Phase::B2, Phase::B1Contextual}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

std::string format_usd(Money m, int decimals) {
  decimals = std::clamp(decimals, 0, 12);
  const bool neg = m.pico < 0;
  // Work in unsigned to survive INT64_MIN.
  unsigned __int128 v = neg ? static_cast<unsigned __int128>(-(m.pico + 1)) + 1
                            : static_cast<unsigned __int128>(m.pico);
  unsigned __int128 unit = 1;
  for (int i = 0; i < 12 - decimals; ++i) unit *= 10;
  v = (v + unit / 2) / unit;
  unsigned __int128 scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  const auto whole = static_cast<unsigned long long>(v / scale);
  auto frac = static_cast<unsigned long long>(v % scale);
  std::string out = neg ? "-$" : "$";
  out += std::to_string(whole);
  if (decimals > 0) {
    std::string f = std::to_string(frac);
    out += '.';
    out += std::string(static_cast<std::size_t>(decimals) - f.size(), '0');
    out += f;
  }
  return out;
}

std::int64_t parse_nano_usd(std::string_view s) {
  auto fail = [&] { throw Error(ErrorCode::ConfigError, "invalid price: " + std::string(s)); };
  if (!s.empty() && s.front() == '$') s.remove_prefix(1);
  if (s.empty()) fail();
  std::int64_t whole = 0, frac = 0;
  int frac_digits = 0;
  bool seen_dot = false, any = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) fail();
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') fail();
    any = true;
    if (seen_dot) {
      if (++frac_digits > 9) {
        if (c != '0') fail();  // finer than a nanodollar
        continue;
      }
      frac = frac * 10 + (c - '0');
    } else {
      if (whole > 1'000'000) fail();
      whole = whole * 10 + (c - '0');
    }
  }
  if (!any) fail();
  for (int i = std::min(frac_digits, 9); i < 9; ++i) frac *= 10;
  return whole * 1'000'000'000 + frac;
}

void ProviderSpec::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (model_id.empty()) bad("model_id is empty");
  if (endpoint.empty()) bad("endpoint is empty");
  if (prompt_price_nano_per_1k < 0 || completion_price_nano_per_1k < 0) bad("prices must be >= 0");
  if (max_context_tokens <= 0) bad("max_context_tokens must be > 0");
  if (request_timeout_s <= 0) bad("request_timeout must be > 0");
  if (max_retries < 0) bad("max_retries must be >= 0");
  if (retry_backoff_s < 0) bad("retry_backoff must be >= 0");
  if (!(chars_per_token > 0)) bad("chars_per_token must be > 0");
  if (requests_per_minute < 0 || tokens_per_minute < 0) bad("rate limits must be >= 0");
}

std::int64_t estimate_tokens(std::string_view text, double chars_per_token) {
  if (text.empty()) return 0;
  return std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(static_cast<double>(text.size()) / chars_per_token)));
}

std::int64_t request_tokens(const CompletionRequest& req, double chars_per_token) {
  std::size_t chars = req.system.size() + req.prompt.size();
  if (req.repair) chars += req.previous_response.size() + req.repair_prompt.size();
  if (chars == 0) return 0;
  return std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(static_cast<double>(chars) / chars_per_token)));
}

Money call_cost(const ProviderSpec& spec, std::int64_t prompt_tokens,
                std::int64_t completion_tokens) {
  return Money{prompt_tokens * spec.prompt_price_nano_per_1k +
               completion_tokens * spec.completion_price_nano_per_1k};
}

LedgerTotals sum_ledger(const std::vector<LedgerRecord>& records) {
  LedgerTotals t;
  for (const auto& r : records) {
    if (r.cached) {
      ++t.cached;
      continue;
    }
    ++t.calls;
    t.prompt_tokens += r.prompt_tokens;
    t.completion_tokens += r.completion_tokens;
    t.cost += r.cost;
  }
  return t;
}

void CostLedger::append(LedgerRecord r) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(r));
}

std::vector<LedgerRecord> CostLedger::records() const {
  std::vector<LedgerRecord> out;
  {
    std::lock_guard lock(mu_);
    out = records_;
  }
  std::stable_sort(out.begin(), out.end(), [](const LedgerRecord& a, const LedgerRecord& b) {
    return std::tie(a.phase, a.item, a.repair) < std::tie(b.phase, b.item, b.repair);
  });
  return out;
}

LedgerTotals CostLedger::totals() const { return sum_ledger(records()); }

std::size_t CostLedger::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

RateLimiter::RateLimiter(int requests_per_minute, std::int64_t tokens_per_minute)
    : rpm_(requests_per_minute),
      tpm_(static_cast<double>(tokens_per_minute)),
      request_tokens_(requests_per_minute),
      token_tokens_(static_cast<double>(tokens_per_minute)),
      last_(Clock::now()) {}

void RateLimiter::refill(Clock::time_point now) {
  const double minutes = std::chrono::duration<double>(now - last_).count() / 60.0;
  last_ = now;
  if (rpm_ > 0) request_tokens_ = std::min(rpm_, request_tokens_ + minutes * rpm_);
  if (tpm_ > 0) token_tokens_ = std::min(tpm_, token_tokens_ + minutes * tpm_);
}

void RateLimiter::acquire(std::int64_t tokens) {
  if (rpm_ <= 0 && tpm_ <= 0) return;
  // A single request larger than the per-minute token budget waits for a full
  // bucket and then goes through.
  const double need = tpm_ > 0 ? std::min(static_cast<double>(tokens), tpm_) : 0.0;
  std::unique_lock lock(mu_);
  for (;;) {
    refill(Clock::now());
    const bool req_ok = rpm_ <= 0 || request_tokens_ >= 1.0;
    const bool tok_ok = tpm_ <= 0 || token_tokens_ >= need;
    if (req_ok && tok_ok) {
      if (rpm_ > 0) request_tokens_ -= 1.0;
      if (tpm_ > 0) token_tokens_ -= need;
      return;
    }
    double wait_min = 0;
    if (!req_ok) wait_min = std::max(wait_min, (1.0 - request_tokens_) / rpm_);
    if (!tok_ok) wait_min = std::max(wait_min, (need - token_tokens_) / tpm_);
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_min * 60.0 + 0.001));
    lock.lock();
  }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create cache dir " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::key(std::string_view app_sha256, std::string_view model_id,
                               std::string_view template_version, Phase phase,
                               std::string_view payload) {
  std::string buf;
  for (std::string_view part : {app_sha256, model_id, template_version, to_string(phase), payload}) {
    buf += std::to_string(part.size());
    buf += ':';
    buf += part;
  }
  return sha256_hex(buf);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CompletionResponse> ResponseCache::get(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    CompletionResponse r;
    r.text = j.at("text").get<std::string>();
    if (j.contains("prompt_tokens")) {
      r.usage = Usage{j.at("prompt_tokens").get<std::int64_t>(),
                      j.at("completion_tokens").get<std::int64_t>()};
    }
    return r;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // a torn or foreign file is a miss
  }
}

void ResponseCache::put(const std::string& key, const CompletionResponse& resp) const {
  nlohmann::json j;
  j["text"] = resp.text;
  if (resp.usage) {
    j["prompt_tokens"] = resp.usage->prompt_tokens;
    j["completion_tokens"] = resp.usage->completion_tokens;
  }
  const auto final_path = path_for(key);
  std::error_code ec;
  std::filesystem::create_directories(final_path.parent_path(), ec);
  std::ostringstream tid;
  tid << std::this_thread::get_id();
  const auto tmp = final_path.string() + ".tmp" + tid.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  }
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

const std::string& PromptTemplates::get(std::string_view name) const {
  auto it = files.find(std::string(name));
  if (it == files.end()) throw Error(ErrorCode::ConfigError, "missing prompt template " + std::string(name));
  return it->second;
}

namespace {

PromptTemplates finish(std::map<std::string, std::string> files) {
  std::string buf;
  for (const auto& [name, text] : files) {
    buf += name;
    buf.push_back('\0');
    buf += text;
    buf.push_back('\0');
  }
  PromptTemplates t;
  t.version = sha256_hex(buf).substr(0, 16);
  t.files = std::move(files);
  for (const char* required : {"system.txt", "a1_identify.txt", "a2_label.txt", "b1_identify.txt",
                               "b1_contextual.txt", "b2_label.txt", "repair.txt"}) {
    t.get(required);
  }
  return t;
}

}  // namespace

PromptTemplates default_prompts() {
  std::map<std::string, std::string> files;
  for (const auto& f : assets::prompt_files()) files.emplace(f.name, f.content);
  return finish(std::move(files));
}

PromptTemplates load_prompts(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::ConfigError, dir.string() + ": not a directory");
  }
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files.emplace(e.path().filename().string(), ss.str());
  }
  return finish(std::move(files));
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it != vars.end()) out += it->second;
    else out.append(tmpl.substr(open, close + 2 - open));
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace apksecrets
