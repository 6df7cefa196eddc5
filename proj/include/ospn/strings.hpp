#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ospn {

// Shortest decimal form that parses back to the exact same double.
// Used everywhere a real goes into a text format (CSV, config echo).
std::string format_double(double v);

std::string format_size_t(std::size_t v);

// Strict parses: the whole token must be consumed.
double parse_double(const std::string& token);   // throws ParseError
long long parse_int(const std::string& token);   // throws ParseError

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

// FNV-1a 64-bit over raw bytes; checkpoint payload checksum.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string to_hex(std::uint64_t v);

} // namespace ospn
