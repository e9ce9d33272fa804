#include "chanrt/core/files.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace fs = std::filesystem;

namespace chanrt {

void io_failure(const fs::path& path, const char* what, int err) {
  if (err == ENOSPC || err == EDQUOT) throw Error(ErrorCode::StorageFull, fmt::format("{} {}", what, path.string()));
  throw Error(ErrorCode::IoError, fmt::format("{} {}: {}", what, path.string(), std::strerror(err)));
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (f == nullptr) io_failure(tmp, "open", errno);
  const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
  const int werr = errno;
  if (std::fclose(f) != 0 || !ok) {
    const int err = ok ? errno : werr;
    fs::remove(tmp, ec);
    io_failure(tmp, "write", err);
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    const int err = ec.value();
    fs::remove(tmp, ec);
    io_failure(path, "rename", err);
  }
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_failure(path, "open", errno);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(fs::file_size(path)));
  if (!out.empty() && !in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()))) {
    io_failure(path, "read", errno);
  }
  return out;
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace chanrt
