#pragma once

#include <filesystem>
#include <string>

namespace dsva {

// Writes via a temp file in the same directory, then renames. Partial
// output never lands at the destination path.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace dsva
