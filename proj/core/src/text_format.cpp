#include "dna/text_format.hpp"

#include "dna/error.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace dna::text {

void append_double(std::string& out, double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), res.ptr);
}

std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

double parse_double(std::string_view s, std::size_t line) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError(line, "malformed number '" + std::string(s) + "'");
    }
    return v;
}

long long parse_int(std::string_view s, std::size_t line) {
    s = trim(s);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError(line, "malformed integer '" + std::string(s) + "'");
    }
    return v;
}

std::size_t parse_count(std::string_view s, std::size_t line) {
    const long long v = parse_int(s, line);
    if (v < 0) throw ParseError(line, "expected a nonnegative count, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            break;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

std::string_view trim(std::string_view s) {
    const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && ws(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace dna::text
