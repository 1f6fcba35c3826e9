#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apksecrets/dalvik.hpp"
#include "apksecrets/dex.hpp"
#include "apksecrets/types.hpp"

namespace apksecrets {

struct ClassContextOptions {
  unsigned window = 8;              // instructions either side of a site
  std::size_t char_budget = 12000;  // cap on the rendered text
};

struct MethodStrings {
  std::string method_signature;
  std::vector<std::string> strings;
};

// Textual summary of one class used as labeling context for code strings.
struct ClassContext {
  std::string class_name;
  std::string superclass_name;
  std::vector<std::string> interfaces;
  std::vector<std::string> field_summaries;   // "name:type"
  std::vector<std::string> method_summaries;  // "name(descriptor)"
  std::vector<MethodStrings> string_constants;
  std::vector<std::string> disasm_windows;
  std::string text;
  bool truncated = false;
};

inline constexpr std::string_view kTruncationMarker = "\n[... context truncated ...]\n";

// Throws Error(ClassNotFound). Sites whose class differs from `class_name`
// are ignored.
ClassContext render_class_context(const DexLayout& layout, std::string_view class_name,
                                  std::span<const CodeSite> candidate_sites,
                                  const ClassContextOptions& opts = {});

// One line of disassembly: "const-string v0, \"text\"".
std::string disassemble(const DexLayout& layout, const dalvik::CodeUnits& code,
                        const dalvik::Instruction& insn);

// Mnemonic, with payload pseudo-instructions named explicitly.
std::string_view mnemonic(const dalvik::Instruction& insn);

// Double-quoted literal with escapes, cut at `max_chars` bytes.
std::string quote_literal(std::string_view s, std::size_t max_chars = 160);

}  // namespace apksecrets
