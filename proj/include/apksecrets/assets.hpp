#pragma once

#include <span>
#include <string_view>

namespace apksecrets::assets {

struct EmbeddedFile {
  std::string_view name;
  std::string_view content;
};

// Copies of rules/ and prompts/ compiled into the library.
std::span<const EmbeddedFile> rule_files();
std::span<const EmbeddedFile> prompt_files();

}  // namespace apksecrets::assets
