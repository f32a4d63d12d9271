#pragma once

#include <json.hpp>

#include "almatch/dataio.hpp"

namespace almatch::detail {

using Json = nlohmann::ordered_json;

Json config_to_json(const SessionConfig& config);
Json config_to_json(const ToolkitConfig& config);
ToolkitConfig config_from_json(const Json& j);

/// SessionConfig from a config whose dataset-dependent fields are all
/// explicit (as in a snapshot).
SessionConfig materialize(const ToolkitConfig& config);

Json eval_to_json(const EvalReport& r);

}  // namespace almatch::detail
