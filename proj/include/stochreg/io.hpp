#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stochreg::io {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Exact inverse of format_double. Throws ConfigError on malformed input.
double parse_double(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Lines of a text file without trailing '\r'; the final empty line is dropped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace stochreg::io
