#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace visex::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, flushes it to disk, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace visex::io
