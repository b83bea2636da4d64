#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace winsel::text {

std::string_view trim(std::string_view s);
bool is_space(char c);

/// Splits on runs of ASCII whitespace; empty fields are dropped.
std::vector<std::string_view> split_ws(std::string_view s);

/// Splits on '\n', stripping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view s);

std::string ascii_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

/// Number of unicode scalar values in a UTF-8 string. Invalid bytes count
/// as one scalar each.
std::size_t utf8_length(std::string_view s);

/// Largest byte offset <= pos that does not fall inside a UTF-8 sequence.
std::size_t utf8_floor(std::string_view s, std::size_t pos);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Fixed-point formatting with the given number of decimals.
std::string format_fixed(double v, int decimals);

}  // namespace winsel::text
