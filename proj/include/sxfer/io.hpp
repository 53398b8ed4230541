#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sxfer {

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Fixed 17 significant digits: exact round trip and byte-stable output.
std::string format_double(double value);
// Strict parse: the whole token must be consumed. Throws FormatError naming `what`.
double parse_double(std::string_view token, std::string_view what);

}  // namespace sxfer
