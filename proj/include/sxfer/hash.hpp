#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sxfer {

// Lower-case hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const std::byte> bytes);

std::string base64_encode(std::span<const std::byte> bytes);
// Throws FormatError on malformed input.
std::vector<std::byte> base64_decode(std::string_view text);

}  // namespace sxfer
