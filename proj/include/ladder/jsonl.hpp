#pragma once

#include <json.hpp>

#include <string>

namespace ladder {

/// Compact single-line dump. Invalid UTF-8 (models do emit it) is replaced
/// rather than throwing.
inline std::string dump_compact(const nlohmann::json& value) {
  return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline std::string dump_pretty(const nlohmann::json& value) {
  return value.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace ladder
