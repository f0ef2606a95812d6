#pragma once

#include <filesystem>
#include <string>

namespace dagmix::cli {

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Writes through `<path>.partial` and renames on success, so an interrupted
// write never leaves a file under the final name.
void write_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace dagmix::cli
