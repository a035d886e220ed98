#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evdistill::io {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Both parsers reject trailing garbage and throw DataError.
double parse_double(std::string_view s);
long long parse_long(std::string_view s);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames, so readers never observe
// a partially written file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split(std::string_view line, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace evdistill::io
