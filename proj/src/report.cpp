#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "apksecrets/bytes.hpp"
#include "apksecrets/error.hpp"
#include "apksecrets/report.hpp"
#include "json_io.hpp"

namespace apksecrets {

using ojson = nlohmann::ordered_json;

std::string_view to_string(ScanMode m) { return m == ScanMode::Standard ? "STANDARD" : "CONTEXTUAL_B1"; }

std::optional<ScanMode> scan_mode_from_string(std::string_view s) {
  if (s == "STANDARD") return ScanMode::Standard;
  if (s == "CONTEXTUAL_B1") return ScanMode::ContextualB1;
  return std::nullopt;
}

std::string Finding::origin() const {
  if (source == StringSource::Xml) return "string/" + resource_entry;
  if (sites.empty()) return "";
  const CodeSite& s = sites.front();
  std::string out = s.class_name + "->" + s.method_signature;
  if (s.is_instruction()) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "@%04x", s.insn_offset);
    out += buf;
  } else {
    out += " (static)";
  }
  if (sites.size() > 1) out += " +" + std::to_string(sites.size() - 1);
  return out;
}

namespace {

// Byte offsets of code point starts; invalid bytes count as one point each.
std::vector<std::size_t> code_points(std::string_view s) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  return starts;
}

}  // namespace

std::string redact(std::string_view value) {
  const auto cps = code_points(value);
  const std::size_t n = cps.size();
  if (n <= 8) return std::string(n, '*');
  const std::size_t head_end = cps[4];
  const std::size_t tail_start = cps[n - 2];
  return std::string(value.substr(0, head_end)) + std::string(n - 6, '*') + std::string(value.substr(tail_start));
}

ScanReport redacted(ScanReport report) {
  if (report.redacted) return report;
  for (auto& f : report.findings) {
    f.value = redact(f.value);
    if (f.validation.decoded_form) f.validation.decoded_form = redact(*f.validation.decoded_form);
  }
  report.redacted = true;
  return report;
}

namespace {

ojson opt(const std::optional<std::string>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<std::string> opt_str(const ojson& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

ojson prefilter_json(const PrefilterConfig& c) {
  return ojson{{"min_length", c.min_length},
               {"max_length", c.max_length},
               {"max_space_ratio", c.max_space_ratio},
               {"drop_uuid_like", c.drop_uuid_like},
               {"min_charset_classes", c.min_charset_classes},
               {"allowlist_prefixes", c.allowlist_prefixes},
               {"min_entropy", c.min_entropy}};
}

}  // namespace

// Shared with the config loader, which accepts partial objects.
PrefilterConfig prefilter_from_json(const nlohmann::json& j, PrefilterConfig c) {
  c.min_length = j.value("min_length", c.min_length);
  c.max_length = j.value("max_length", c.max_length);
  c.max_space_ratio = j.value("max_space_ratio", c.max_space_ratio);
  c.drop_uuid_like = j.value("drop_uuid_like", c.drop_uuid_like);
  c.min_charset_classes = j.value("min_charset_classes", c.min_charset_classes);
  if (j.contains("allowlist_prefixes")) c.allowlist_prefixes = j["allowlist_prefixes"].get<std::vector<std::string>>();
  c.min_entropy = j.value("min_entropy", c.min_entropy);
  return c;
}

namespace {

ojson site_json(const CodeSite& s) {
  return ojson{{"dex_index", s.dex_index},
               {"class", s.class_name},
               {"method", s.method_signature},
               {"offset", s.insn_offset},
               {"kind", to_string(s.kind)}};
}

SiteKind site_kind_from(const std::string& s) {
  for (auto k : {SiteKind::ConstString, SiteKind::ConstStringJumbo, SiteKind::StaticValue}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::ReportParseError, "unknown site kind " + s);
}

ojson report_json(const ScanReport& r) {
  ojson findings = ojson::array();
  for (const auto& f : r.findings) {
    ojson sites = ojson::array();
    for (const auto& s : f.sites) sites.push_back(site_json(s));
    ojson phases = ojson::array();
    for (auto p : f.phases) phases.push_back(to_string(p));
    findings.push_back(ojson{
        {"value", f.value},
        {"value_sha256", f.value_sha256},
        {"source", to_string(f.source)},
        {"origin", f.origin()},
        {"resource_entry", f.resource_entry},
        {"sites", sites},
        {"raw_label", f.raw_label},
        {"canonical_label", f.canonical_label},
        {"validation",
         ojson{{"status", to_string(f.validation.status)},
               {"matched_service", opt(f.validation.matched_service)},
               {"decoded_form", opt(f.validation.decoded_form)},
               {"rule_id", opt(f.validation.rule_id)},
               {"indicative_service", opt(f.validation.indicative_service)}}},
        {"decoded_sha256", opt(f.decoded_sha256)},
        {"phases", phases},
    });
  }
  ojson errors = ojson::array();
  for (const auto& e : r.errors) errors.push_back(ojson{{"phase", to_string(e.phase)}, {"code", e.code}, {"message", e.message}});
  ojson records = ojson::array();
  for (const auto& l : r.ledger) {
    records.push_back(ojson{{"phase", to_string(l.phase)},
                            {"item", l.item},
                            {"repair", l.repair},
                            {"cached", l.cached},
                            {"prompt_tokens", l.prompt_tokens},
                            {"completion_tokens", l.completion_tokens},
                            {"latency_ms", l.latency_ms},
                            {"cost_pico_usd", l.cost.pico}});
  }
  ojson dropped = ojson::object();
  for (const auto& [k, v] : r.prefilter.dropped) dropped[k] = v;
  ojson timings = ojson::object();
  for (const auto& [k, v] : r.timings_ms) timings[k] = v;
  return ojson{
      {"schema_version", r.schema_version},
      {"app_sha256", r.app_sha256},
      {"package_name", r.package_name},
      {"redacted", r.redacted},
      {"config",
       ojson{{"model_id", r.config.model_id},
             {"template_version", r.config.template_version},
             {"ruleset_hash", r.config.ruleset_hash},
             {"mode", to_string(r.config.mode)},
             {"prefilter", prefilter_json(r.config.prefilter)}}},
      {"findings", findings},
      {"skipped_phases", r.skipped_phases},
      {"warnings", r.warnings},
      {"errors", errors},
      {"extraction",
       ojson{{"dex_files", r.extraction.dex_files},
             {"xml_strings", r.extraction.xml_strings},
             {"code_strings", r.extraction.code_strings},
             {"string_table_size", r.extraction.string_table_size},
             {"walk_issues", r.extraction.walk_issues}}},
      {"prefilter", ojson{{"input", r.prefilter.input}, {"kept", r.prefilter.kept}, {"dropped", dropped}}},
      {"hallucinations", r.hallucinations},
      {"ledger",
       ojson{{"records", records},
             {"totals",
              ojson{{"calls", r.totals.calls},
                    {"cached", r.totals.cached},
                    {"prompt_tokens", r.totals.prompt_tokens},
                    {"completion_tokens", r.totals.completion_tokens},
                    {"cost_pico_usd", r.totals.cost.pico},
                    {"cost_usd", format_usd(r.totals.cost)}}}}},
      {"timings_ms", timings},
  };
}

Phase phase_from(const std::string& s) {
  if (auto p = phase_from_string(s)) return *p;
  throw Error(ErrorCode::ReportParseError, "unknown phase " + s);
}

}  // namespace

std::string render_json(const ScanReport& report) {
  return report_json(report).dump(2, ' ', false, ojson::error_handler_t::replace) + "\n";
}

ScanReport parse_report_json(const std::string& text) {
  ScanReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw Error(ErrorCode::ReportParseError, "unsupported schema_version " + std::to_string(r.schema_version));
    }
    r.app_sha256 = j.at("app_sha256");
    r.package_name = j.at("package_name");
    r.redacted = j.at("redacted");
    const auto& c = j.at("config");
    r.config.model_id = c.at("model_id");
    r.config.template_version = c.at("template_version");
    r.config.ruleset_hash = c.at("ruleset_hash");
    auto mode = scan_mode_from_string(c.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::ReportParseError, "unknown mode");
    r.config.mode = *mode;
    r.config.prefilter = prefilter_from_json(c.at("prefilter"), PrefilterConfig{});
    for (const auto& fj : j.at("findings")) {
      Finding f;
      f.value = fj.at("value");
      f.value_sha256 = fj.at("value_sha256");
      f.source = fj.at("source").get<std::string>() == "XML" ? StringSource::Xml : StringSource::Code;
      f.resource_entry = fj.at("resource_entry");
      for (const auto& sj : fj.at("sites")) {
        f.sites.push_back(CodeSite{sj.at("dex_index"), sj.at("class"), sj.at("method"), sj.at("offset"),
                                   site_kind_from(sj.at("kind"))});
      }
      f.raw_label = fj.at("raw_label");
      f.canonical_label = fj.at("canonical_label");
      const auto& vj = fj.at("validation");
      auto status = validation_status_from_string(vj.at("status").get<std::string>());
      if (!status) throw Error(ErrorCode::ReportParseError, "unknown validation status");
      f.validation.status = *status;
      f.validation.matched_service = opt_str(vj, "matched_service");
      f.validation.decoded_form = opt_str(vj, "decoded_form");
      f.validation.rule_id = opt_str(vj, "rule_id");
      f.validation.indicative_service = opt_str(vj, "indicative_service");
      f.decoded_sha256 = opt_str(fj, "decoded_sha256");
      for (const auto& p : fj.at("phases")) f.phases.push_back(phase_from(p));
      r.findings.push_back(std::move(f));
    }
    r.skipped_phases = j.at("skipped_phases").get<std::vector<std::string>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& ej : j.at("errors")) r.errors.push_back(PhaseError{phase_from(ej.at("phase")), ej.at("code"), ej.at("message")});
    const auto& x = j.at("extraction");
    r.extraction = ExtractionStats{x.at("dex_files"), x.at("xml_strings"), x.at("code_strings"),
                                   x.at("string_table_size"), x.at("walk_issues")};
    const auto& p = j.at("prefilter");
    r.prefilter.input = p.at("input");
    r.prefilter.kept = p.at("kept");
    for (const auto& [k, v] : p.at("dropped").items()) r.prefilter.dropped[k] = v.get<std::size_t>();
    r.hallucinations = j.at("hallucinations");
    for (const auto& lj : j.at("ledger").at("records")) {
      LedgerRecord l;
      l.phase = phase_from(lj.at("phase"));
      l.item = lj.at("item");
      l.repair = lj.at("repair");
      l.cached = lj.at("cached");
      l.prompt_tokens = lj.at("prompt_tokens");
      l.completion_tokens = lj.at("completion_tokens");
      l.latency_ms = lj.at("latency_ms");
      l.cost = Money{lj.at("cost_pico_usd").get<std::int64_t>()};
      r.ledger.push_back(l);
    }
    const auto& t = j.at("ledger").at("totals");
    r.totals = LedgerTotals{t.at("calls"), t.at("cached"), t.at("prompt_tokens"), t.at("completion_tokens"),
                            Money{t.at("cost_pico_usd").get<std::int64_t>()}};
    for (const auto& [k, v] : j.at("timings_ms").items()) r.timings_ms[k] = v.get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ReportParseError, e.what());
  }
  return r;
}

namespace {

// Left-aligned columns separated by two spaces.
std::string render_columns(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], code_points(row[i]).size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size()) line += std::string(width[i] - code_points(row[i]).size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string render_table(const ScanReport& r) {
  std::string out;
  out += "app      " + r.app_sha256 + "\n";
  out += "package  " + (r.package_name.empty() ? std::string("-") : r.package_name) + "\n";
  out += "mode     " + std::string(to_string(r.config.mode)) + "  model " + r.config.model_id + "\n";
  out += "calls    " + std::to_string(r.totals.calls) + " (" + std::to_string(r.totals.cached) + " cached)  cost " +
         format_usd(r.totals.cost) + "  hallucinations " + std::to_string(r.hallucinations) + "\n";
  out += "strings  xml " + std::to_string(r.extraction.xml_strings) + "  code " +
         std::to_string(r.extraction.code_strings) + "  kept " + std::to_string(r.prefilter.kept) + "\n";
  for (const auto& p : r.skipped_phases) out += "skipped  " + p + "\n";
  for (const auto& w : r.warnings) out += "warning  " + w + "\n";
  for (const auto& e : r.errors) out += "error    " + std::string(to_string(e.phase)) + " " + e.message + "\n";
  out += "\n";
  if (r.findings.empty()) return out + "no findings\n";
  std::vector<std::vector<std::string>> rows{{"#", "SOURCE", "LABEL", "STATUS", "SERVICE", "VALUE", "ORIGIN"}};
  for (std::size_t i = 0; i < r.findings.size(); ++i) {
    const auto& f = r.findings[i];
    // Human output never carries full values.
    rows.push_back({std::to_string(i + 1), std::string(to_string(f.source)), f.canonical_label,
                    std::string(to_string(f.validation.status)), f.validation.matched_service.value_or("-"),
                    r.redacted ? f.value : redact(f.value), f.origin()});
  }
  return out + render_columns(rows);
}

CorpusSummary aggregate(const std::vector<ScanReport>& reports) {
  CorpusSummary s;
  s.apps = reports.size();
  for (const auto& r : reports) {
    if (!r.findings.empty()) ++s.apps_with_findings;
    if (!r.errors.empty()) ++s.apps_with_errors;
    s.findings += r.findings.size();
    for (const auto& f : r.findings) {
      ++s.by_label[f.canonical_label];
      ++s.by_status[std::string(to_string(f.validation.status))];
      ++s.by_source[std::string(to_string(f.source))];
    }
    s.total_cost += r.totals.cost;
    s.provider_calls += r.totals.calls;
  }
  s.prevalence_percent = s.apps ? 100.0 * static_cast<double>(s.apps_with_findings) / static_cast<double>(s.apps) : 0.0;
  return s;
}

std::string render_json(const CorpusSummary& s) {
  auto counts = [](const std::map<std::string, std::size_t>& m) {
    ojson j = ojson::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
  };
  ojson j{{"apps", s.apps},
          {"apps_with_findings", s.apps_with_findings},
          {"prevalence_percent", s.prevalence_percent},
          {"findings", s.findings},
          {"apps_with_errors", s.apps_with_errors},
          {"by_label", counts(s.by_label)},
          {"by_status", counts(s.by_status)},
          {"by_source", counts(s.by_source)},
          {"provider_calls", s.provider_calls},
          {"total_cost_pico_usd", s.total_cost.pico},
          {"total_cost_usd", format_usd(s.total_cost)},
          {"failed_inputs", s.failed_inputs}};
  return j.dump(2, ' ', false, ojson::error_handler_t::replace) + "\n";
}

std::string render_table(const CorpusSummary& s) {
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.1f%%", s.prevalence_percent);
  std::string out = "apps " + std::to_string(s.apps) + "  with findings " + std::to_string(s.apps_with_findings) +
                    " (" + pct + ")  findings " + std::to_string(s.findings) + "  errors " +
                    std::to_string(s.apps_with_errors) + "  cost " + format_usd(s.total_cost) + "\n";
  auto table = [&](const char* title, const std::map<std::string, std::size_t>& m) {
    if (m.empty()) return;
    std::vector<std::vector<std::string>> rows{{title, "COUNT"}};
    for (const auto& [k, v] : m) rows.push_back({k, std::to_string(v)});
    out += "\n" + render_columns(rows);
  };
  table("LABEL", s.by_label);
  table("STATUS", s.by_status);
  table("SOURCE", s.by_source);
  if (!s.failed_inputs.empty()) {
    out += "\nfailed\n";
    for (const auto& f : s.failed_inputs) out += "  " + f + "\n";
  }
  return out;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
    ++line;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // handled by the '\n'
    } else if (c == '\n') {
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::GroundTruthParseError, "line " + std::to_string(line) + ": unterminated quote");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string lower_trim(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

std::vector<GroundTruthEntry> parse_ground_truth(const std::string& csv_text) {
  std::string text = csv_text;
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCode::GroundTruthParseError, "missing header sha256,value,category");
  const auto& h = rows[0];
  if (h.size() != 3 || lower_trim(h[0]) != "sha256" || lower_trim(h[1]) != "value" || lower_trim(h[2]) != "category") {
    throw Error(ErrorCode::GroundTruthParseError, "header must be sha256,value,category");
  }
  std::vector<GroundTruthEntry> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "row " + std::to_string(i + 1);
    if (r.size() != 3) throw Error(ErrorCode::GroundTruthParseError, where + ": expected 3 fields");
    GroundTruthEntry e{lower_trim(r[0]), r[1], r[2]};
    if (e.app_sha256.empty()) throw Error(ErrorCode::GroundTruthParseError, where + ": empty sha256");
    if (e.secret_value.empty()) throw Error(ErrorCode::GroundTruthParseError, where + ": empty value");
    out.push_back(std::move(e));
  }
  return out;
}

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::Both: return "BOTH";
    case Disposition::OnlyOurs: return "ONLY_OURS";
    case Disposition::OnlyBaseline: return "ONLY_BASELINE";
  }
  return "?";
}

OverlapSummary compare_with_baseline(const std::vector<ScanReport>& reports,
                                     const std::vector<GroundTruthEntry>& ground_truth) {
  using Key = std::pair<std::string, std::string>;  // (app sha256, value sha256)
  std::map<Key, const GroundTruthEntry*> gt;
  for (const auto& e : ground_truth) gt.emplace(Key{e.app_sha256, sha256_hex(e.secret_value)}, &e);

  std::map<Key, const Finding*> ours;
  for (const auto& r : reports) {
    for (const auto& f : r.findings) ours.emplace(Key{r.app_sha256, f.value_sha256}, &f);
  }

  OverlapSummary out;
  std::map<Key, const Finding*> matched;  // ground-truth key -> finding
  for (const auto& [key, f] : ours) {
    bool hit = false;
    for (const auto* h : {&f->value_sha256, f->decoded_sha256 ? &*f->decoded_sha256 : nullptr}) {
      if (!h) continue;
      Key k{key.first, *h};
      if (gt.count(k)) {
        matched.emplace(k, f);
        hit = true;
      }
    }
    if (!hit) {
      ++out.only_ours;
      out.rows.push_back({key.first, redact(f->value), f->canonical_label, Disposition::OnlyOurs});
    }
  }
  for (const auto& [key, e] : gt) {
    auto it = matched.find(key);
    if (it != matched.end()) {
      ++out.both;
      out.rows.push_back({key.first, redact(e->secret_value), it->second->canonical_label, Disposition::Both});
    } else {
      ++out.only_baseline;
      out.rows.push_back({key.first, redact(e->secret_value), e->category, Disposition::OnlyBaseline});
    }
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const DispositionRow& a, const DispositionRow& b) {
    return std::tie(a.app_sha256, a.disposition, a.value, a.label) <
           std::tie(b.app_sha256, b.disposition, b.value, b.label);
  });
  if (gt.empty()) {
    out.empty_baseline = true;
    out.recall = 1.0;
  } else {
    out.recall = static_cast<double>(out.both) / static_cast<double>(out.both + out.only_baseline);
  }
  return out;
}

std::string render_json(const OverlapSummary& s) {
  ojson rows = ojson::array();
  for (const auto& r : s.rows) {
    rows.push_back(ojson{{"app_sha256", r.app_sha256}, {"value", r.value}, {"label", r.label},
                         {"disposition", to_string(r.disposition)}});
  }
  ojson flags = ojson::array();
  if (s.empty_baseline) flags.push_back("EMPTY_BASELINE");
  ojson j{{"both", s.both}, {"only_ours", s.only_ours}, {"only_baseline", s.only_baseline},
          {"recall", s.recall}, {"flags", flags}, {"rows", rows}};
  return j.dump(2, ' ', false, ojson::error_handler_t::replace) + "\n";
}

std::string display_label(std::string_view canonical) {
  static const std::set<std::string> acronyms{"API", "AWS", "JWT", "RSA", "ID", "URL", "SDK", "PAT", "MWS",
                                              "SSH", "PEM", "PGP", "GCP", "DSA", "EC", "FCM", "SMS", "IAM"};
  static const std::map<std::string, std::string> brands{
      {"OPENAI", "OpenAI"},   {"GITHUB", "GitHub"},     {"PAYPAL", "PayPal"},   {"MAILCHIMP", "MailChimp"},
      {"OAUTH", "OAuth"},     {"OAUTH2", "OAuth2"},     {"APPMETRICA", "AppMetrica"}, {"LINKEDIN", "LinkedIn"},
      {"SENDGRID", "SendGrid"}, {"YOUTUBE", "YouTube"}, {"PAYU", "PayU"}};
  static const std::set<std::string> generic{"KEY", "TOKEN", "SECRET", "ACCESS", "PASSWORD", "PRIVATE", "PUBLIC",
                                             "CLIENT", "AUTH", "PERSONAL", "STANDARD", "RESTRICTED", "APP",
                                             "APPLICATION", "CONSUMER", "SERVICE", "ACCOUNT", "LIVE", "TEST",
                                             "CREDENTIALS", "CREDENTIAL", "SIGNING", "NATIVE", "FINE", "GRAINED"};
  std::string out;
  std::stringstream ss{std::string(canonical)};
  std::string word;
  bool first = true;
  while (std::getline(ss, word, '_')) {
    if (word.empty()) continue;
    std::string shown;
    if (acronyms.count(word)) {
      shown = word;
    } else if (auto it = brands.find(word); it != brands.end()) {
      shown = it->second;
    } else {
      shown = word;
      std::transform(shown.begin(), shown.end(), shown.begin(), [](unsigned char c) { return std::tolower(c); });
      if (first || !generic.count(word)) shown[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(shown[0])));
    }
    if (!first) out += ' ';
    out += shown;
    first = false;
  }
  return out.empty() ? std::string(canonical) : out;
}

namespace {

// Masks every occurrence of any 6-byte window (or the whole value, if
// shorter) of the secrets. The mask byte never occurs in a secret, so masked
// text cannot form a new match.
std::string scrub(std::string doc, const std::vector<std::string>& secrets) {
  char mask = 0;
  for (char c : std::string("#~^|")) {
    if (std::none_of(secrets.begin(), secrets.end(), [&](const std::string& s) { return s.find(c) != std::string::npos; })) {
      mask = c;
      break;
    }
  }
  for (;;) {
    std::vector<bool> hit(doc.size(), false);
    bool any = false;
    for (const auto& s : secrets) {
      if (s.empty()) continue;
      const std::size_t w = std::min<std::size_t>(6, s.size());
      std::unordered_set<std::string_view> windows;
      for (std::size_t i = 0; i + w <= s.size(); ++i) windows.insert(std::string_view(s).substr(i, w));
      for (std::size_t i = 0; i + w <= doc.size(); ++i) {
        if (windows.count(std::string_view(doc).substr(i, w))) {
          std::fill(hit.begin() + static_cast<std::ptrdiff_t>(i), hit.begin() + static_cast<std::ptrdiff_t>(i + w), true);
          any = true;
        }
      }
    }
    if (!any) return doc;
    std::string next;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (!hit[i]) next.push_back(doc[i]);
      else if (mask) next.push_back(mask);
    }
    doc = std::move(next);
  }
}

}  // namespace

std::string disclosure_export(const ScanReport& report, const std::optional<std::string>& contact) {
  if (report.findings.empty()) throw Error(ErrorCode::NoFindings, "report " + report.app_sha256 + " has no findings");
  std::map<std::string, std::size_t> by_label;
  std::set<std::string> locations;
  std::vector<std::string> secrets;
  for (const auto& f : report.findings) {
    ++by_label[f.canonical_label];
    if (f.source == StringSource::Xml) locations.insert("string resource \"" + f.resource_entry + "\"");
    else if (!f.sites.empty()) locations.insert("class " + f.sites.front().class_name);
    secrets.push_back(f.value);
    if (f.validation.decoded_form) secrets.push_back(*f.validation.decoded_form);
  }
  const std::string app = report.package_name.empty() ? "your application" : report.package_name;
  const std::size_t n = report.findings.size();
  std::string doc;
  doc += "Subject: Hardcoded credentials found in " + app + "\n\n";
  doc += "Hello,\n\n";
  doc += "While reviewing the Android application " + app + " (APK SHA-256 " + report.app_sha256 + "), we found " +
         std::to_string(n) + (n == 1 ? " hardcoded credential" : " hardcoded credentials") +
         " embedded in the published package:\n\n";
  for (const auto& [label, count] : by_label) doc += "  - " + display_label(label) + ": " + std::to_string(count) + "\n";
  doc += "\nThey appear in:\n\n";
  for (const auto& l : locations) doc += "  - " + l + "\n";
  doc += "\nThe values themselves are intentionally not included in this message. We did not use any of them.\n\n";
  doc += "Recommended steps:\n\n";
  doc += "  1. Revoke or rotate each affected credential with its provider.\n";
  doc += "  2. Move secret operations to a backend you control, or restrict the keys (for example to your package name\n"
         "     and signing certificate) where the provider supports it.\n";
  doc += "  3. Publish an update without the credentials and remove them from your source history.\n";
  if (contact) doc += "\nYou can reach us at " + *contact + " for details.\n";
  doc += "\nRegards\n";
  return scrub(std::move(doc), secrets);
}

std::uint64_t sample_plan(std::optional<std::uint64_t> population, double confidence, double margin) {
  double z = 0;
  if (std::fabs(confidence - 0.90) < 1e-9) z = 1.6448536269514722;
  else if (std::fabs(confidence - 0.95) < 1e-9) z = 1.959963984540054;
  else if (std::fabs(confidence - 0.99) < 1e-9) z = 2.5758293035489004;
  else throw Error(ErrorCode::InvalidParams, "confidence must be 0.90, 0.95 or 0.99");
  if (!(margin > 0.0 && margin < 1.0)) throw Error(ErrorCode::InvalidParams, "margin must be in (0, 1)");
  if (population && *population == 0) throw Error(ErrorCode::InvalidParams, "population must be >= 1");
  const double n0 = z * z * 0.25 / (margin * margin);
  double n = n0;
  if (population) n = n0 / (1.0 + (n0 - 1.0) / static_cast<double>(*population));
  auto size = static_cast<std::uint64_t>(std::floor(n + 0.5));
  size = std::max<std::uint64_t>(size, 1);
  if (population) size = std::min(size, *population);
  return size;
}

}  // namespace apksecrets
