#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace maskprobe::toml {

// Minimal TOML reader covering the config surface of this project:
// comments, [table] headers, dotted bare keys, basic strings, integers,
// floats, booleans, and single-line arrays. Anything else is rejected
// with a line-numbered error.
nlohmann::json parse(std::string_view text);
nlohmann::json parse_file(const std::string& path);

}  // namespace maskprobe::toml
