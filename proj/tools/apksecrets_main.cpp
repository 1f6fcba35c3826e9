#include <CLI11.hpp>

#include <iostream>

#include "apksecrets/cli.hpp"
#include "apksecrets/error.hpp"

using namespace apksecrets;

int main(int argc, char** argv) {
  CLI::App app{"Find hardcoded secrets in Android APKs"};
  app.require_subcommand(1);

  std::string config_file, model, endpoint, cache_dir, rules_dir, prompts_dir, mock_script, output_dir;
  bool offline = false, mock = false, contextual = false, no_redact = false;
  unsigned concurrency = 0;
  app.add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--model", model, "Model identifier sent to the provider");
  app.add_option("--endpoint", endpoint, "Chat-completions base URL, or 'mock'");
  app.add_flag("--offline", offline, "Fail instead of using any network provider");
  app.add_flag("--mock", mock, "Use the built-in mock provider");
  app.add_option("--mock-script", mock_script, "JSON behaviour script for the mock provider");
  app.add_flag("--contextual-b1", contextual, "Classify each code string with its class context");
  app.add_option("--concurrency", concurrency, "Apps scanned in parallel")->check(CLI::PositiveNumber);
  app.add_option("--cache-dir", cache_dir, "Response cache directory");
  app.add_option("--rules-dir", rules_dir, "Directory of *.rules and *.synonyms files");
  app.add_option("--prompts-dir", prompts_dir, "Directory of prompt templates");
  app.add_flag("--no-redact", no_redact, "Write full secret values to machine-readable reports");
  app.add_option("-o,--output", output_dir, "Output directory");

  std::string apk, manifest, strings_file, reports_dir, ground_truth;
  auto* scan = app.add_subcommand("scan", "Scan one APK");
  scan->add_option("apk", apk, "APK file")->required();
  auto* corpus = app.add_subcommand("corpus", "Scan every APK listed in a manifest");
  corpus->add_option("manifest", manifest, "Manifest: one path, or sha256,location, per line")->required();
  auto* validate = app.add_subcommand("validate", "Check strings against the rule catalog (no LLM)");
  validate->add_option("strings", strings_file, "File with one candidate per line")->required();
  auto* compare = app.add_subcommand("compare", "Compare reports with a ground-truth CSV");
  compare->add_option("reports", reports_dir, "Directory of report JSON files")->required();
  compare->add_option("ground_truth", ground_truth, "CSV with header sha256,value,category")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitFatal;
  }

  RunConfig cfg;
  try {
    if (!config_file.empty()) cfg = load_run_config(config_file);
    if (!model.empty()) cfg.provider.model_id = model;
    if (!endpoint.empty()) cfg.provider.endpoint = endpoint;
    if (mock) cfg.provider.endpoint = "mock";
    if (offline) cfg.offline = true;
    if (!mock_script.empty()) cfg.mock_script = mock_script;
    if (contextual) cfg.mode = ScanMode::ContextualB1;
    if (concurrency) cfg.concurrency = concurrency;
    if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
    if (!rules_dir.empty()) cfg.rules_dir = rules_dir;
    if (!prompts_dir.empty()) cfg.prompts_dir = prompts_dir;
    if (no_redact) cfg.redact = false;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }

  if (*scan) return cmd_scan(apk, cfg, std::cout, std::cerr);
  if (*corpus) return cmd_corpus(manifest, cfg, std::cout, std::cerr);
  if (*validate) return cmd_validate(strings_file, cfg, std::cout, std::cerr);
  return cmd_compare(reports_dir, ground_truth, cfg, std::cout, std::cerr);
}
