#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace agreesum::io {

// Calls `on_line(line_number, text)` for every non-empty line (1-based numbering).
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& on_line);

std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temporary file and rename, so readers never observe a
// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

void append_line(const std::filesystem::path& path, std::string_view line);

std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace agreesum::io
