#pragma once

// Small text helpers shared by the CSV and key-value readers/writers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace loadbench::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Strict parse of a whole field; throws Error(Data) on garbage.
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);

/// Shortest representation that round-trips through parse_double.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Reads a file line by line, stripping a trailing '\r'.
std::vector<std::string> read_lines(const std::string& path);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace loadbench::text
