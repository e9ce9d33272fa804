#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "chanrt/wire/value.hpp"

namespace chanrt::sensing {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
/// Throws Error(IoError).
std::uint64_t fnv1a64_file(const fs::path& path);

struct ManifestEntry {
  std::string relative_path;  // always '/'-separated
  std::uint64_t size_bytes = 0;
  std::uint64_t checksum = 0;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Sorted by path, paths unique.
using Manifest = std::vector<ManifestEntry>;

/// Remembers checksums by (path, size, mtime) so unchanged files are not
/// rehashed on every scan. Thread-safe.
class ChecksumCache {
 public:
  std::uint64_t checksum(const fs::path& path, std::uint64_t size, fs::file_time_type mtime);
  [[nodiscard]] std::size_t size() const;

 private:
  struct Key {
    std::uint64_t size;
    fs::file_time_type mtime;
    std::uint64_t checksum;
  };
  mutable std::mutex mutex_;
  std::map<std::string, Key> entries_;
};

/// Every regular file under `dir` except "*.tmp" files. A missing directory
/// gives an empty manifest. Throws Error(IoError).
Manifest build_manifest(const fs::path& dir, ChecksumCache* cache = nullptr);

/// Client paths missing on the server or differing in size or checksum, sorted.
std::vector<std::string> diff_manifests(const Manifest& client, const Manifest& server);

wire::WireValue to_wire(const ManifestEntry& entry);
ManifestEntry manifest_entry_from_wire(const wire::WireValue& value);
wire::WireValue to_wire(const Manifest& manifest);
Manifest manifest_from_wire(const wire::WireValue& value);

}  // namespace chanrt::sensing
