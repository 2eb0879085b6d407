#pragma once

#include <filesystem>
#include <string>

namespace symplan::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace symplan::io
