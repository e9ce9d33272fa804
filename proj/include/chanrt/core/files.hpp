#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace chanrt {

/// Throws Error(StorageFull) for ENOSPC/EDQUOT, Error(IoError) otherwise.
[[noreturn]] void io_failure(const std::filesystem::path& path, const char* what, int err);

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
/// Creates missing parent directories. Throws Error(StorageFull) or Error(IoError).
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace chanrt
