#pragma once

#include <string>

#include <json.hpp>

namespace winsel {

/// Single-line JSON; invalid UTF-8 in strings is replaced rather than thrown.
inline std::string dump_line(const nlohmann::json& value) {
    return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

/// Indented JSON document with the same UTF-8 handling.
inline std::string dump_pretty(const nlohmann::json& value) {
    return value.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace winsel
