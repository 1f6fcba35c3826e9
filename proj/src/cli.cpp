#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "apksecrets/apk.hpp"
#include "apksecrets/bytes.hpp"
#include "apksecrets/cli.hpp"
#include "apksecrets/error.hpp"
#include "apksecrets/pipeline.hpp"
#include "apksecrets/validators.hpp"
#include "json_io.hpp"

namespace apksecrets {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  provider.validate();
  prefilter.validate();
  if (concurrency < 1) throw Error(ErrorCode::ConfigError, "concurrency must be >= 1");
  if (label_concurrency < 1) throw Error(ErrorCode::ConfigError, "label_concurrency must be >= 1");
  if (offline && !provider.is_mock()) {
    throw Error(ErrorCode::ConfigError, "offline mode needs the mock endpoint (--mock), got " + provider.endpoint);
  }
  if (output_dir.empty()) throw Error(ErrorCode::ConfigError, "output_dir is empty");
}

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw Error(ErrorCode::ConfigError, "unknown key " + where + "." + k);
  }
}

std::int64_t price(const nlohmann::json& v) {
  if (v.is_string()) return parse_nano_usd(v.get<std::string>());
  if (v.is_number()) {
    // Through text so 0.00015 stays exact.
    std::ostringstream ss;
    ss.precision(12);
    ss << std::fixed << v.get<double>();
    return parse_nano_usd(ss.str());
  }
  throw Error(ErrorCode::ConfigError, "price must be a number or decimal string");
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, RunConfig c) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    check_keys(j,
               {"provider", "prefilter", "mode", "concurrency", "label_concurrency", "cache_dir", "rules_dir",
                "prompts_dir", "mock_script", "output_dir", "redact", "offline", "context", "include_static_values"},
               "config");
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      check_keys(p,
                 {"model_id", "endpoint", "prompt_price_per_1k", "completion_price_per_1k", "max_context_tokens",
                  "request_timeout_s", "max_retries", "retry_backoff_s", "chars_per_token", "temperature",
                  "api_key_env", "requests_per_minute", "tokens_per_minute"},
                 "provider");
      auto& s = c.provider;
      s.model_id = p.value("model_id", s.model_id);
      s.endpoint = p.value("endpoint", s.endpoint);
      if (p.contains("prompt_price_per_1k")) s.prompt_price_nano_per_1k = price(p["prompt_price_per_1k"]);
      if (p.contains("completion_price_per_1k")) s.completion_price_nano_per_1k = price(p["completion_price_per_1k"]);
      s.max_context_tokens = p.value("max_context_tokens", s.max_context_tokens);
      s.request_timeout_s = p.value("request_timeout_s", s.request_timeout_s);
      s.max_retries = p.value("max_retries", s.max_retries);
      s.retry_backoff_s = p.value("retry_backoff_s", s.retry_backoff_s);
      s.chars_per_token = p.value("chars_per_token", s.chars_per_token);
      s.temperature = p.value("temperature", s.temperature);
      s.api_key_env = p.value("api_key_env", s.api_key_env);
      s.requests_per_minute = p.value("requests_per_minute", s.requests_per_minute);
      s.tokens_per_minute = p.value("tokens_per_minute", s.tokens_per_minute);
    }
    if (j.contains("prefilter")) {
      check_keys(j["prefilter"],
                 {"min_length", "max_length", "max_space_ratio", "drop_uuid_like", "min_charset_classes",
                  "allowlist_prefixes", "min_entropy"},
                 "prefilter");
      c.prefilter = prefilter_from_json(j["prefilter"], c.prefilter);
    }
    if (j.contains("mode")) {
      auto m = scan_mode_from_string(j["mode"].get<std::string>());
      if (!m) throw Error(ErrorCode::ConfigError, "mode must be STANDARD or CONTEXTUAL_B1");
      c.mode = *m;
    }
    c.concurrency = j.value("concurrency", c.concurrency);
    c.label_concurrency = j.value("label_concurrency", c.label_concurrency);
    if (j.contains("cache_dir")) c.cache_dir = j["cache_dir"].get<std::string>();
    if (j.contains("rules_dir")) c.rules_dir = j["rules_dir"].get<std::string>();
    if (j.contains("prompts_dir")) c.prompts_dir = j["prompts_dir"].get<std::string>();
    if (j.contains("mock_script")) c.mock_script = j["mock_script"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    c.redact = j.value("redact", c.redact);
    c.offline = j.value("offline", c.offline);
    if (j.contains("context")) {
      check_keys(j["context"], {"window", "char_budget"}, "context");
      c.context.window = j["context"].value("window", c.context.window);
      c.context.char_budget = j["context"].value("char_budget", c.context.char_budget);
    }
    c.code.include_static_values = j.value("include_static_values", c.code.include_static_values);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base));
}

std::vector<ManifestRow> parse_manifest(const std::string& text) {
  std::vector<ManifestRow> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    line = line.substr(start);
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      rows.push_back({line, std::nullopt});
      continue;
    }
    std::string sha = line.substr(0, comma);
    std::transform(sha.begin(), sha.end(), sha.begin(), [](unsigned char ch) { return std::tolower(ch); });
    rows.push_back({line.substr(comma + 1), sha});
  }
  return rows;
}

namespace {

// Everything a command needs to run the pipeline, shared by all apps.
struct Services {
  Catalog catalog;
  PromptTemplates prompts;
  std::unique_ptr<CompletionProvider> provider;
  std::unique_ptr<ResponseCache> cache;
  std::unique_ptr<RateLimiter> limiter;

  PipelineServices view() {
    return PipelineServices{provider.get(), &catalog, &prompts, cache.get(), limiter.get()};
  }
};

Catalog load_catalog(const RunConfig& cfg) {
  return cfg.rules_dir.empty() ? default_catalog() : catalog_load_dir(cfg.rules_dir);
}

std::unique_ptr<Services> make_services(const RunConfig& cfg) {
  auto s = std::make_unique<Services>();
  s->catalog = load_catalog(cfg);
  s->prompts = cfg.prompts_dir.empty() ? default_prompts() : load_prompts(cfg.prompts_dir);
  MockScript script = default_mock_script();
  if (!cfg.mock_script.empty()) {
    std::ifstream in(cfg.mock_script, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read mock script " + cfg.mock_script.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    script = mock_script_from_json(ss.str());
  }
  s->provider = make_provider(cfg.provider, script);
  if (!cfg.cache_dir.empty()) s->cache = std::make_unique<ResponseCache>(cfg.cache_dir);
  if (cfg.provider.requests_per_minute > 0 || cfg.provider.tokens_per_minute > 0) {
    s->limiter = std::make_unique<RateLimiter>(cfg.provider.requests_per_minute, cfg.provider.tokens_per_minute);
  }
  return s;
}

PipelineConfig pipeline_config(const RunConfig& cfg) {
  PipelineConfig p;
  p.provider = cfg.provider;
  p.prefilter = cfg.prefilter;
  p.mode = cfg.mode;
  p.context = cfg.context;
  p.code = cfg.code;
  p.label_concurrency = cfg.label_concurrency;
  p.redact = cfg.redact;
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  write_file(p.string(), text);
}

void contextual_warning(const RunConfig& cfg, std::ostream& err) {
  if (cfg.mode == ScanMode::ContextualB1) {
    err << "warning: contextual B1 sends one request per kept code string; expect far higher cost and time\n";
  }
}

void write_report(const fs::path& dir, const ScanReport& r) {
  write_text(dir / (r.app_sha256 + ".json"), render_json(r));
  write_text(dir / (r.app_sha256 + ".txt"), render_table(r));
}

}  // namespace

int cmd_scan(const std::string& apk_path, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::unique_ptr<Services> services;
  try {
    cfg.validate();
    services = make_services(cfg);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  contextual_warning(cfg, err);
  ApkArtifact artifact;
  try {
    artifact = open_apk(apk_path);
  } catch (const Error& e) {
    err << "error: " << apk_path << ": " << e.what() << "\n";
    return kExitFatal;
  }
  ScanReport report;
  try {
    report = run_pipeline(artifact, pipeline_config(cfg), services->view());
  } catch (const Error& e) {
    err << "error: " << apk_path << ": " << e.what() << "\n";
    return kExitFatal;
  }
  try {
    write_report(cfg.output_dir, report);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  out << render_table(report);
  for (const auto& e : report.errors) err << "error: " << to_string(e.phase) << ": " << e.message << "\n";
  return report.errors.empty() ? kExitOk : kExitPartial;
}

namespace {

// Downloads `url` to `dest`. Returns an error message, or empty on success.
std::string http_fetch(const std::string& url, const fs::path& dest) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string host = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
  httplib::Client client(host);
  client.set_follow_location(true);
  client.set_connection_timeout(30, 0);
  client.set_read_timeout(300, 0);
  auto res = client.Get(path);
  if (!res) return "fetch failed: " + httplib::to_string(res.error());
  if (res->status != 200) return "fetch failed: HTTP " + std::to_string(res->status);
  write_text(dest, res->body);
  return {};
}

bool is_url(const std::string& s) { return s.starts_with("http://") || s.starts_with("https://"); }

}  // namespace

int cmd_corpus(const fs::path& manifest, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::unique_ptr<Services> services;
  std::vector<ManifestRow> rows;
  try {
    cfg.validate();
    services = make_services(cfg);
    const Bytes text = read_file(manifest.string());
    rows = parse_manifest(std::string(text.begin(), text.end()));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  contextual_warning(cfg, err);
  const fs::path reports_dir = cfg.output_dir / "reports";
  const PipelineConfig pcfg = pipeline_config(cfg);

  std::vector<std::optional<ScanReport>> reports(rows.size());
  std::vector<std::string> failures(rows.size());
  std::mutex log_mu;
  auto log = [&](const std::string& msg) {
    std::lock_guard lock(log_mu);
    err << msg << "\n";
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      const ManifestRow& row = rows[i];
      try {
        fs::path local = row.location;
        if (is_url(row.location)) {
          if (cfg.offline) throw Error(ErrorCode::ConfigError, "offline mode cannot fetch " + row.location);
          if (!row.sha256) throw Error(ErrorCode::ConfigError, "remote rows need a sha256");
          local = cfg.output_dir / "downloads" / (*row.sha256 + ".apk");
          if (auto msg = http_fetch(row.location, local); !msg.empty()) throw Error(ErrorCode::IoError, msg);
        }
        ApkArtifact artifact = open_apk(local.string());
        if (row.sha256 && artifact.sha256 != *row.sha256) {
          // Downloads move; local inputs are copied so the original stays put.
          const fs::path q = cfg.output_dir / "quarantine" / (artifact.sha256 + ".apk");
          std::error_code ec;
          fs::create_directories(q.parent_path(), ec);
          if (is_url(row.location)) {
            fs::rename(local, q, ec);
          } else {
            fs::copy_file(local, q, fs::copy_options::overwrite_existing, ec);
          }
          throw Error(ErrorCode::HashMismatch, "expected " + *row.sha256 + ", got " + artifact.sha256);
        }
        ScanReport r = run_pipeline(artifact, pcfg, services->view());
        write_report(reports_dir, r);
        reports[i] = std::move(r);
      } catch (const std::exception& e) {
        failures[i] = row.location + ": " + e.what();
        log("error: " + failures[i]);
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.concurrency, static_cast<unsigned>(std::max<std::size_t>(rows.size(), 1))));
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<ScanReport> done;
  bool partial = false;
  for (auto& r : reports) {
    if (!r) continue;
    partial |= !r->errors.empty();
    done.push_back(std::move(*r));
  }
  CorpusSummary summary = aggregate(done);
  for (const auto& f : failures) {
    if (!f.empty()) summary.failed_inputs.push_back(f);
  }
  std::sort(summary.failed_inputs.begin(), summary.failed_inputs.end());
  try {
    write_text(cfg.output_dir / "summary.json", render_json(summary));
    write_text(cfg.output_dir / "summary.txt", render_table(summary));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  out << render_table(summary);
  return partial || !summary.failed_inputs.empty() ? kExitPartial : kExitOk;
}

int cmd_validate(const fs::path& strings_file, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Catalog catalog;
  std::string text;
  try {
    catalog = load_catalog(cfg);
    const Bytes b = read_file(strings_file.string());
    text.assign(b.begin(), b.end());
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const ValidationResult v = validate_with_rescan(line, catalog);
    out << lineno << '\t' << to_string(v.status) << '\t' << v.matched_service.value_or("-") << '\t'
        << (cfg.redact ? redact(line) : line);
    if (v.decoded_form) out << '\t' << (cfg.redact ? redact(*v.decoded_form) : *v.decoded_form);
    out << '\n';
  }
  return kExitOk;
}

int cmd_compare(const fs::path& reports_dir, const fs::path& ground_truth, const RunConfig& cfg, std::ostream& out,
                std::ostream& err) {
  std::vector<ScanReport> reports;
  std::vector<GroundTruthEntry> gt;
  try {
    std::error_code ec;
    if (!fs::is_directory(reports_dir, ec)) throw Error(ErrorCode::IoError, reports_dir.string() + ": not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(reports_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const Bytes b = read_file(f.string());
      try {
        reports.push_back(parse_report_json(std::string(b.begin(), b.end())));
      } catch (const Error& e) {
        throw Error(ErrorCode::ReportParseError, f.string() + ": " + e.what());
      }
    }
    const Bytes g = read_file(ground_truth.string());
    gt = parse_ground_truth(std::string(g.begin(), g.end()));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  const OverlapSummary s = compare_with_baseline(reports, gt);
  try {
    write_text(cfg.output_dir / "overlap.json", render_json(s));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  char recall[32];
  std::snprintf(recall, sizeof recall, "%.4f", s.recall);
  out << "both " << s.both << "  only_ours " << s.only_ours << "  only_baseline " << s.only_baseline << "  recall "
      << recall << (s.empty_baseline ? "  EMPTY_BASELINE" : "") << "\n";
  return kExitOk;
}

}  // namespace apksecrets
