#pragma once

#include <string>

#include <json.hpp>

namespace lunarbound::detail {

using ojson = nlohmann::ordered_json;

/// Like dump(2) but every float carries 17 significant digits; non-finite values become null.
std::string dump17(const ojson& j, int indent = 2);
std::string fmt17(double v);

}  // namespace lunarbound::detail
