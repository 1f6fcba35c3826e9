#include "oracle_check.hpp"

#include <map>
#include <set>
#include <tuple>

#include "apksecrets/apk.hpp"
#include "apksecrets/code_strings.hpp"
#include "apksecrets/dalvik.hpp"
#include "apksecrets/dex.hpp"

namespace fixtures {

using namespace apksecrets;

namespace {

struct Walk {
  std::uint32_t insns_size = 0;
  std::vector<std::uint32_t> offsets;
};

// (dex_index, class descriptor, name + descriptor) -> walk
std::map<std::tuple<int, std::string, std::string>, Walk> walk_all(const std::vector<DexLayout>& layouts) {
  std::map<std::tuple<int, std::string, std::string>, Walk> out;
  for (std::size_t d = 0; d < layouts.size(); ++d) {
    const auto& L = layouts[d];
    for (const auto& def : L.class_defs) {
      const auto cd = L.class_data(def);
      for (const auto* list : {&cd.direct_methods, &cd.virtual_methods}) {
        for (const auto& m : *list) {
          if (m.code_off == 0) continue;
          const auto item = L.code_item(m.code_off);
          Walk w{item.insns_size, {}};
          for (const auto& ins : dalvik::decode_instructions(dalvik::CodeUnits(item.insns(L.data())))) {
            w.offsets.push_back(ins.offset);
          }
          out[{static_cast<int>(d), L.type_descriptor(def.class_idx), L.method_signature(m.method_idx)}] =
              std::move(w);
        }
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> oracle_mismatches(const Bytes& apk, const nlohmann::json& oracle) {
  std::vector<std::string> out;
  if (sha256_hex(apk) != oracle["sha256"].get<std::string>()) out.push_back("sha256");
  const auto a = open_apk_bytes(std::make_shared<const Bytes>(apk));

  // default configuration strings, name and value
  std::multiset<std::pair<std::string, std::string>> ours, theirs;
  for (const auto& s : extract_xml_strings(a).strings) ours.insert({s.resource_entry, s.value});
  for (const auto& p : oracle["xml_strings"]) theirs.insert({p[0].get<std::string>(), p[1].get<std::string>()});
  if (ours != theirs) out.push_back("xml_strings");

  // whole table, every configuration
  std::multiset<std::tuple<std::string, std::string, std::string>> rt_ours, rt_theirs;
  if (a.resource_table) {
    for (const auto& s : parse_resource_table(*a.resource_table).strings) {
      rt_ours.insert({s.entry_name, s.config_qualifier, s.value});
    }
  }
  for (const auto& t : oracle["resource_strings"]) {
    rt_theirs.insert({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
  }
  if (rt_ours != rt_theirs) out.push_back("resource_strings");

  // code strings and load-site counts
  std::vector<DexLayout> layouts;
  for (std::size_t i = 0; i < a.dex_entries.size(); ++i) {
    layouts.push_back(parse_dex(std::make_shared<const Bytes>(a.read_dex(i))));
  }
  const auto cs = extract_code_strings(layouts);
  std::map<std::string, std::size_t> sites_ours, sites_theirs;
  for (const auto& s : cs.strings) sites_ours[s.value] = s.sites.size();
  for (const auto& [k, v] : oracle["code_string_sites"].items()) sites_theirs[k] = v.get<std::size_t>();
  if (sites_ours != sites_theirs) out.push_back("code_string_sites");
  if (!cs.issues.empty()) out.push_back("code string walk issues");

  // instruction boundaries
  const auto walks = walk_all(layouts);
  if (walks.size() != oracle["methods"].size()) out.push_back("method count");
  for (const auto& m : oracle["methods"]) {
    const auto key = std::make_tuple(m["dex_index"].get<int>(), m["class"].get<std::string>(),
                                     m["name"].get<std::string>() + m["descriptor"].get<std::string>());
    const auto it = walks.find(key);
    if (it == walks.end()) {
      out.push_back("missing method " + std::get<2>(key));
      continue;
    }
    if (it->second.insns_size != m["insns_size"].get<std::uint32_t>()) out.push_back("insns_size " + std::get<2>(key));
    if (it->second.offsets != m["offsets"].get<std::vector<std::uint32_t>>()) {
      out.push_back("offsets " + std::get<2>(key));
    }
  }
  return out;
}

}  // namespace fixtures
