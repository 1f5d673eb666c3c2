#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mckv {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

/// Splits one CSV record (RFC 4180 quoting is accepted but not required for
/// the numeric files this library writes).
std::vector<std::string> split_csv_record(std::string_view line);
double parse_double(std::string_view text);

/// SHA-256 of "blob <size>\0" followed by the content, in lowercase hex:
/// git's object hashing scheme with a stronger digest.
std::string content_hash(std::string_view content);
std::string content_hash(std::span<const double> values);
std::string file_content_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mckv
