#pragma once

#include <string>

#include "json.hpp"

namespace polydepth {

using Json = nlohmann::ordered_json;

/// Serializes with every float printed to 17 significant digits so artifacts
/// are byte-stable and round-trip exactly.
std::string dump_json(const Json& j, int indent = 2);

}  // namespace polydepth
