#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

// Small TOML subset for run configuration files:
//   # comments, [table] and [a.b] headers, bare or quoted keys,
//   basic "..." and literal '...' strings, integers, floats, booleans and
//   single-line arrays of those. Inline tables, dates and multi-line strings
//   are rejected.

namespace mockless {

/// Nested JSON object mirroring the tables. Throws ConfigError with
/// "name:line: message" on malformed input or duplicate keys.
nlohmann::json parse_toml(std::string_view text, const std::string& name = "<config>");
nlohmann::json load_toml(const std::string& path);

}  // namespace mockless
