#include "winsel/text.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace winsel::text {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < s.size()) {
                std::string_view line = s.substr(start);
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                out.push_back(line);
            }
            break;
        }
        std::string_view line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back(line);
        start = nl + 1;
    }
    return out;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && ascii_lower(a) == ascii_lower(b);
}

namespace {
bool is_continuation(char c) {
    return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}
}  // namespace

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (char c : s) {
        if (!is_continuation(c)) ++n;
    }
    // A string made only of stray continuation bytes still has a length.
    if (n == 0 && !s.empty()) n = s.size();
    return n;
}

std::size_t utf8_floor(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return s.size();
    std::size_t p = pos;
    // A scalar is at most four bytes; do not walk further on invalid data.
    for (int k = 0; k < 4 && p > 0 && is_continuation(s[p]); ++k) --p;
    return is_continuation(s[p]) ? pos : p;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string format_fixed(double v, int decimals) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                             std::chars_format::fixed, decimals);
    return std::string(buf.data(), res.ptr);
}

}  // namespace winsel::text
