#pragma once

#include <filesystem>
#include <string>

namespace ropd::util {

std::string read_file(const std::filesystem::path& path);

/// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace ropd::util
