#include <boost/regex.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "apksecrets/assets.hpp"
#include "apksecrets/bytes.hpp"
#include "apksecrets/error.hpp"
#include "apksecrets/validators.hpp"

namespace apksecrets {

struct RegexRule::Compiled {
  boost::regex re;
};

std::string_view to_string(RuleTier t) { return t == RuleTier::Confirming ? "CONFIRMING" : "INDICATIVE"; }

std::string_view to_string(RuleProvenance p) {
  switch (p) {
    case RuleProvenance::Benchmark: return "BENCHMARK";
    case RuleProvenance::Extended: return "EXTENDED";
    case RuleProvenance::Artifact: return "ARTIFACT";
  }
  return "?";
}

bool RegexRule::matches(std::string_view value) const {
  if (!compiled) return false;
  try {
    return mode == MatchMode::Full
               ? boost::regex_match(value.begin(), value.end(), compiled->re)
               : boost::regex_search(value.begin(), value.end(), compiled->re);
  } catch (const std::runtime_error&) {
    // Boost aborts pathological matches with an exception; treat as no match.
    return false;
  }
}

const RegexRule* Catalog::find(std::string_view id) const {
  for (const auto& r : rules) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

namespace {

[[noreturn]] void rule_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::RuleParseError, where + ": " + what);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

RegexRule parse_rule(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) rule_error(where, "rule must be a JSON object");
  auto req = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
      rule_error(where, std::string("missing string field '") + key + "'");
    }
    return j[key].get<std::string>();
  };
  RegexRule r;
  r.id = req("id");
  r.service = req("service");
  r.pattern = req("pattern");
  const std::string tier = req("tier");
  if (tier == "CONFIRMING") r.tier = RuleTier::Confirming;
  else if (tier == "INDICATIVE") r.tier = RuleTier::Indicative;
  else rule_error(where, "unknown tier " + tier);
  const std::string prov = req("provenance");
  if (prov == "BENCHMARK") r.provenance = RuleProvenance::Benchmark;
  else if (prov == "EXTENDED") r.provenance = RuleProvenance::Extended;
  else if (prov == "ARTIFACT") r.provenance = RuleProvenance::Artifact;
  else rule_error(where, "unknown provenance " + prov);
  const std::string mode = j.value("match", std::string("find"));
  if (mode == "find") r.mode = MatchMode::Find;
  else if (mode == "full") r.mode = MatchMode::Full;
  else rule_error(where, "unknown match mode " + mode);
  r.public_or_test = j.value("public_or_test", false);
  r.icase = j.value("icase", false);
  r.notes = j.value("notes", std::string());
  r.source = where;
  try {
    boost::regex::flag_type flags = boost::regex::perl;
    if (r.icase) flags |= boost::regex::icase;
    r.compiled = std::make_shared<const RegexRule::Compiled>(RegexRule::Compiled{boost::regex(r.pattern, flags)});
  } catch (const boost::regex_error& e) {
    rule_error(where, "pattern does not compile: " + std::string(e.what()));
  }
  return r;
}

void parse_synonyms(const RuleSource& src, Catalog& c) {
  std::istringstream in(src.content);
  std::string line;
  int lineno = 0;
  std::map<std::string, std::string> canonical_of;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = src.name + ":" + std::to_string(lineno);
    const auto eq = t.find('=');
    if (eq == std::string::npos) rule_error(where, "expected CANONICAL = variant, ...");
    const std::string canonical = normalize_label_form(t.substr(0, eq));
    if (canonical.empty()) rule_error(where, "empty canonical label");
    std::stringstream variants(t.substr(eq + 1));
    std::string v;
    while (std::getline(variants, v, ',')) {
      const std::string nv = normalize_label_form(v);
      if (nv.empty() || nv == canonical) continue;
      const auto [it, inserted] = c.synonyms.emplace(nv, canonical);
      if (!inserted && it->second != canonical) {
        rule_error(where, "variant " + nv + " already maps to " + it->second);
      }
    }
  }
  // Canonical labels must be fixed points so normalization stays idempotent.
  for (const auto& [variant, canonical] : c.synonyms) {
    if (c.synonyms.count(canonical)) {
      rule_error(src.name, "canonical label " + canonical + " is also listed as a variant");
    }
  }
}

}  // namespace

Catalog catalog_load(const std::vector<RuleSource>& sources) {
  Catalog c;
  std::set<std::string> ids;
  std::string digest_input;
  for (const auto& src : sources) {
    digest_input += src.name;
    digest_input.push_back('\0');
    digest_input += src.content;
    digest_input.push_back('\0');
    if (src.name.ends_with(".synonyms")) {
      parse_synonyms(src, c);
      continue;
    }
    std::istringstream in(src.content);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const std::string where = src.name + ":" + std::to_string(lineno);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(t);
      } catch (const nlohmann::json::parse_error& e) {
        rule_error(where, e.what());
      }
      RegexRule r = parse_rule(j, where);
      if (!ids.insert(r.id).second) rule_error(where, "duplicate rule id " + r.id);
      c.rules.push_back(std::move(r));
    }
  }
  c.hash = sha256_hex(digest_input);
  return c;
}

Catalog catalog_load(const std::vector<std::filesystem::path>& files) {
  std::vector<RuleSource> sources;
  for (const auto& p : files) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::RuleParseError, p.string() + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    sources.push_back({p.filename().string(), ss.str()});
  }
  return catalog_load(sources);
}

Catalog catalog_load_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::RuleParseError, dir.string() + ": not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".rules" || ext == ".synonyms")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return catalog_load(files);
}

const Catalog& default_catalog() {
  static const Catalog catalog = [] {
    std::vector<RuleSource> sources;
    for (const auto& f : assets::rule_files()) {
      const std::string name(f.name);
      if (name.ends_with(".rules") || name.ends_with(".synonyms")) {
        sources.push_back({name, std::string(f.content)});
      }
    }
    return catalog_load(sources);
  }();
  return catalog;
}

}  // namespace apksecrets
