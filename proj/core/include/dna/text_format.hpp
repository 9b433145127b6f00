#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dna::text {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
void append_double(std::string& out, double v);

// Parsers throw ParseError carrying `line` on malformed input.
double parse_double(std::string_view s, std::size_t line);
long long parse_int(std::string_view s, std::size_t line);
std::size_t parse_count(std::string_view s, std::size_t line);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace dna::text
