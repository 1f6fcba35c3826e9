#pragma once

#include <vector>

#include "apksecrets/dex.hpp"
#include "apksecrets/types.hpp"

namespace apksecrets {

struct CodeStringOptions {
  bool include_static_values = true;
};

struct CodeStrings {
  std::vector<ExtractedString> strings;  // by dex, then string table index
  std::vector<WalkIssue> issues;
  std::size_t table_size = 0;  // total string_ids across all dex files
};

// Strings that are loaded by at least one site, deduplicated by value across
// all dex files with every site retained. `layouts[i]` must correspond to
// dex_index i.
CodeStrings extract_code_strings(const std::vector<DexLayout>& layouts,
                                 const CodeStringOptions& opts = {});

}  // namespace apksecrets
