#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace vleval {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

// SHA-256 of a file's contents. Throws InputError if unreadable.
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace vleval
