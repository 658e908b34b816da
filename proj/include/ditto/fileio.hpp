#pragma once

#include <filesystem>
#include <string>

namespace ditto {

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64-bit, hex encoded; used for run metadata and manifest hashes.
std::string content_hash(const std::string& bytes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace ditto
