#include <algorithm>
#include <atomic>
#include <future>
#include <thread>

#include "apksecrets/bytes.hpp"
#include "apksecrets/dex.hpp"
#include "apksecrets/error.hpp"
#include "apksecrets/pipeline.hpp"

namespace apksecrets {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::min<std::size_t>(n, 64))));
  if (n == 0) return;
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

PhaseError phase_error(Phase phase, const std::exception& e) {
  if (auto* err = dynamic_cast<const Error*>(&e)) return PhaseError{phase, std::string(to_string(err->code())), err->what()};
  return PhaseError{phase, "Unexpected", e.what()};
}

struct BranchResult {
  std::vector<LabeledSecret> secrets;
  std::vector<PhaseError> errors;
  std::size_t hallucinations = 0;
  std::map<std::string, std::int64_t> timings;
  PrefilterStats prefilter;
  std::vector<std::string> warnings;
};

// Labels every candidate; failures are recorded and the candidate dropped.
template <typename LabelFn>
void label_all(const std::vector<CandidateSecret>& candidates, Phase phase, unsigned workers, BranchResult& out,
               LabelFn label) {
  std::vector<std::optional<LabeledSecret>> labeled(candidates.size());
  std::vector<std::optional<PhaseError>> errors(candidates.size());
  parallel_for(candidates.size(), workers, [&](std::size_t i) {
    try {
      labeled[i] = label(candidates[i], i);
    } catch (const std::exception& e) {
      errors[i] = phase_error(phase, e);
    }
  });
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (labeled[i]) out.secrets.push_back(std::move(*labeled[i]));
    if (errors[i]) out.errors.push_back(std::move(*errors[i]));
  }
}

BranchResult xml_branch(const XmlStrings& xml, const PipelineConfig& cfg, LlmSession& session) {
  BranchResult out;
  std::int64_t t0 = session.now_ms();
  IdentifyResult found;
  try {
    found = phase_a1_identify(xml, session);
  } catch (const std::exception& e) {
    out.errors.push_back(phase_error(Phase::A1, e));
    out.timings["A1"] = session.now_ms() - t0;
    return out;
  }
  out.hallucinations = found.hallucinations;
  out.timings["A1"] = session.now_ms() - t0;
  t0 = session.now_ms();
  label_all(found.candidates, Phase::A2, cfg.label_concurrency, out,
            [&](const CandidateSecret& c, std::size_t i) { return phase_a2_label(c, xml, session, i); });
  out.timings["A2"] = session.now_ms() - t0;
  return out;
}

ClassContext context_for(const std::vector<DexLayout>& layouts, const std::vector<CodeSite>& sites,
                         ClassContextOptions opts, const LlmSession& session, std::size_t candidate_chars) {
  // Keep the labeling prompt inside the model's window.
  const double window_chars = static_cast<double>(session.spec().max_context_tokens) * session.spec().chars_per_token;
  const double fixed = static_cast<double>(session.prompts().get("system.txt").size() +
                                           session.prompts().get("b2_label.txt").size() + candidate_chars);
  const double room = std::max(0.0, window_chars - fixed);
  if (room < static_cast<double>(opts.char_budget)) opts.char_budget = static_cast<std::size_t>(room);
  if (sites.empty()) return {};
  const CodeSite& first = sites.front();
  if (first.dex_index >= layouts.size()) return {};
  try {
    return render_class_context(layouts[first.dex_index], first.class_name, sites, opts);
  } catch (const Error&) {
    ClassContext c;
    c.class_name = first.class_name;
    return c;
  }
}

BranchResult code_branch(const CodeStrings& code, const std::vector<DexLayout>& layouts,
                         const PipelineConfig& cfg, LlmSession& session) {
  BranchResult out;
  const bool contextual = cfg.mode == ScanMode::ContextualB1;
  std::int64_t t0 = session.now_ms();
  PrefilterResult pf = prefilter(code.strings, cfg.prefilter, /*bypass_uuid=*/contextual);
  out.prefilter.input = code.strings.size();
  out.prefilter.kept = pf.kept.size();
  for (const auto& d : pf.dropped) ++out.prefilter.dropped[std::string(to_string(d.reason))];
  out.timings["prefilter"] = session.now_ms() - t0;

  std::vector<CandidateSecret> candidates;
  t0 = session.now_ms();
  if (contextual) {
    out.warnings.push_back("contextual B1 issues one provider call per kept string (" +
                           std::to_string(pf.kept.size()) + " calls)");
    std::vector<std::optional<bool>> verdicts(pf.kept.size());
    std::vector<std::optional<PhaseError>> errors(pf.kept.size());
    parallel_for(pf.kept.size(), cfg.label_concurrency, [&](std::size_t i) {
      try {
        const auto& s = pf.kept[i];
        verdicts[i] = phase_b1_contextual(s, context_for(layouts, s.sites, cfg.context, session, s.value.size()),
                                          session, i);
      } catch (const std::exception& e) {
        errors[i] = phase_error(Phase::B1Contextual, e);
      }
    });
    for (std::size_t i = 0; i < pf.kept.size(); ++i) {
      if (errors[i]) out.errors.push_back(std::move(*errors[i]));
      if (verdicts[i].value_or(false)) {
        const auto& s = pf.kept[i];
        candidates.push_back(CandidateSecret{s.value, StringSource::Code, "", s.sites, Phase::B1Contextual});
      }
    }
    out.timings["B1_CONTEXTUAL"] = session.now_ms() - t0;
  } else {
    try {
      IdentifyResult found = phase_b1_identify(pf.kept, session);
      out.hallucinations = found.hallucinations;
      candidates = std::move(found.candidates);
    } catch (const std::exception& e) {
      out.errors.push_back(phase_error(Phase::B1, e));
      out.timings["B1"] = session.now_ms() - t0;
      return out;
    }
    out.timings["B1"] = session.now_ms() - t0;
  }

  t0 = session.now_ms();
  label_all(candidates, Phase::B2, cfg.label_concurrency, out, [&](const CandidateSecret& c, std::size_t i) {
    return phase_b2_label(c, context_for(layouts, c.sites, cfg.context, session, c.value.size()), session, i);
  });
  out.timings["B2"] = session.now_ms() - t0;
  return out;
}

void merge(ScanReport& rep, std::vector<LabeledSecret>& secrets, BranchResult&& b) {
  for (auto& s : b.secrets) secrets.push_back(std::move(s));
  rep.errors.insert(rep.errors.end(), b.errors.begin(), b.errors.end());
  rep.hallucinations += b.hallucinations;
  for (const auto& [k, v] : b.timings) rep.timings_ms[k] = v;
  rep.warnings.insert(rep.warnings.end(), b.warnings.begin(), b.warnings.end());
}

}  // namespace

ScanReport run_pipeline(const ApkArtifact& artifact, const PipelineConfig& cfg, const PipelineServices& services) {
  cfg.provider.validate();
  cfg.prefilter.validate();
  LlmSession session(services, cfg.provider, artifact.sha256, cfg.clock);
  const std::int64_t t_start = session.now_ms();

  ScanReport rep;
  rep.app_sha256 = artifact.sha256;
  rep.redacted = false;
  rep.config = ConfigFingerprint{cfg.provider.model_id, services.prompts->version, services.catalog->hash, cfg.mode,
                                 cfg.prefilter};

  std::int64_t t0 = session.now_ms();
  XmlStrings xml;
  const bool have_table = artifact.resource_table.has_value();
  if (have_table) {
    xml = extract_xml_strings(artifact);
    if (xml.issue != TableIssue::None) rep.warnings.push_back("resources.arsc: " + std::string(to_string(xml.issue)));
  } else {
    rep.warnings.push_back("NO_RESOURCE_TABLE");
    rep.skipped_phases.push_back("A1");
    rep.skipped_phases.push_back("A2");
  }
  rep.package_name = xml.package_name;

  std::vector<DexLayout> layouts(artifact.dex_entries.size());
  for (std::size_t i = 0; i < artifact.dex_entries.size(); ++i) {
    const std::string& name = artifact.dex_entries[i];
    try {
      layouts[i] = parse_dex(std::make_shared<const Bytes>(artifact.read_dex(i)));
      if (!layouts[i].adler32_ok) rep.warnings.push_back(name + ": checksum mismatch");
    } catch (const Error& e) {
      rep.warnings.push_back(name + ": " + e.what());
    }
  }
  CodeStrings code = extract_code_strings(layouts, cfg.code);
  if (!artifact.has_dex()) {
    rep.warnings.push_back(std::string(to_string(IngestWarning::NoDexPresent)));
    rep.skipped_phases.push_back(cfg.mode == ScanMode::ContextualB1 ? "B1_CONTEXTUAL" : "B1");
    rep.skipped_phases.push_back("B2");
  }
  rep.extraction = ExtractionStats{artifact.dex_entries.size(), xml.strings.size(), code.strings.size(),
                                   code.table_size, code.issues.size()};
  rep.timings_ms["extract"] = session.now_ms() - t0;

  std::vector<LabeledSecret> secrets;
  auto run_xml = [&] { return have_table ? xml_branch(xml, cfg, session) : BranchResult{}; };
  auto run_code = [&] {
    if (!artifact.has_dex()) return BranchResult{};
    return code_branch(code, layouts, cfg, session);
  };
  BranchResult xml_res, code_res;
  if (cfg.parallel_branches) {
    auto fut = std::async(std::launch::async, run_code);
    xml_res = run_xml();
    code_res = fut.get();
  } else {
    xml_res = run_xml();
    code_res = run_code();
  }
  rep.prefilter = code_res.prefilter;
  merge(rep, secrets, std::move(xml_res));
  merge(rep, secrets, std::move(code_res));

  t0 = session.now_ms();
  for (const auto& s : secrets) {
    if (!s.is_secret) continue;
    Finding f;
    f.value = s.candidate.value;
    f.value_sha256 = sha256_hex(f.value);
    f.source = s.candidate.source;
    f.resource_entry = s.candidate.resource_entry;
    f.sites = s.candidate.sites;
    f.raw_label = s.raw_label;
    f.canonical_label = s.canonical_label;
    f.validation = validate_with_rescan(f.value, *services.catalog);
    if (f.validation.decoded_form) f.decoded_sha256 = sha256_hex(*f.validation.decoded_form);
    f.phases = {s.candidate.phase_found, s.phase_labeled};
    rep.findings.push_back(std::move(f));
  }
  std::sort(rep.findings.begin(), rep.findings.end(), [](const Finding& a, const Finding& b) {
    return std::tuple(a.source, a.origin(), a.value) < std::tuple(b.source, b.origin(), b.value);
  });
  rep.timings_ms["validate"] = session.now_ms() - t0;

  rep.ledger = session.ledger().records();
  rep.totals = sum_ledger(rep.ledger);
  rep.timings_ms["total"] = session.now_ms() - t_start;
  return cfg.redact ? redacted(std::move(rep)) : rep;
}

}  // namespace apksecrets
