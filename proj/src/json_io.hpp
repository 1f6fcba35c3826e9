#pragma once

#include <json.hpp>

#include "apksecrets/prefilter.hpp"

namespace apksecrets {

// Fields absent from `j` keep the values of `base`.
PrefilterConfig prefilter_from_json(const nlohmann::json& j, PrefilterConfig base);

}  // namespace apksecrets
