#include "apksecrets/code_strings.hpp"

#include <algorithm>
#include <unordered_map>

namespace apksecrets {

CodeStrings extract_code_strings(const std::vector<DexLayout>& layouts,
                                 const CodeStringOptions& opts) {
  CodeStrings out;
  std::unordered_map<std::string, std::size_t> by_value;
  for (std::uint32_t dex = 0; dex < layouts.size(); ++dex) {
    const DexLayout& layout = layouts[dex];
    out.table_size += layout.string_ids.size();
    StringReferences refs = index_string_references(
        layout, ReferenceOptions{opts.include_static_values, dex});
    out.issues.insert(out.issues.end(), refs.issues.begin(), refs.issues.end());
    const StringTable table = read_string_table(layout);
    for (auto& [idx, sites] : refs.sites) {
      const std::string& value = table.strings[idx];
      auto [it, inserted] = by_value.try_emplace(value, out.strings.size());
      if (inserted) {
        ExtractedString e;
        e.value = value;
        e.source = StringSource::Code;
        out.strings.push_back(std::move(e));
      }
      auto& dst = out.strings[it->second].sites;
      dst.insert(dst.end(), std::make_move_iterator(sites.begin()),
                 std::make_move_iterator(sites.end()));
    }
  }
  // Instruction sites first so that first_site() is a real load when one exists.
  for (auto& s : out.strings) {
    std::stable_partition(s.sites.begin(), s.sites.end(),
                          [](const CodeSite& c) { return c.is_instruction(); });
  }
  return out;
}

}  // namespace apksecrets
