#include "chanrt/sensing/manifest.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace chanrt::sensing {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<std::uint8_t> buf(64 * 1024);
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(std::span(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

std::uint64_t ChecksumCache::checksum(const fs::path& path, std::uint64_t size, fs::file_time_type mtime) {
  const auto key = path.string();
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end() && it->second.size == size && it->second.mtime == mtime) return it->second.checksum;
  }
  const auto sum = fnv1a64_file(path);
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign(key, Key{size, mtime, sum});
  return sum;
}

std::size_t ChecksumCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Manifest build_manifest(const fs::path& dir, ChecksumCache* cache) {
  Manifest out;
  std::error_code ec;
  if (!fs::exists(dir, ec)) return out;
  for (fs::recursive_directory_iterator it(dir, ec), end; it != end; it.increment(ec)) {
    if (ec) throw Error(ErrorCode::IoError, fmt::format("scanning {}: {}", dir.string(), ec.message()));
    if (!it->is_regular_file(ec)) continue;
    const auto& p = it->path();
    if (p.extension() == ".tmp") continue;
    // A file may vanish between listing and stat (temp rename races); skip it.
    const auto size = fs::file_size(p, ec);
    if (ec) continue;
    const auto mtime = fs::last_write_time(p, ec);
    if (ec) continue;
    ManifestEntry e;
    e.relative_path = fs::relative(p, dir).generic_string();
    e.size_bytes = size;
    try {
      e.checksum = cache ? cache->checksum(p, size, mtime) : fnv1a64_file(p);
    } catch (const Error&) {
      if (!fs::exists(p)) continue;
      throw;
    }
    out.push_back(std::move(e));
  }
  if (ec) throw Error(ErrorCode::IoError, fmt::format("scanning {}: {}", dir.string(), ec.message()));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.relative_path < b.relative_path; });
  return out;
}

std::vector<std::string> diff_manifests(const Manifest& client, const Manifest& server) {
  std::map<std::string_view, const ManifestEntry*> theirs;
  for (const auto& e : server) theirs.emplace(e.relative_path, &e);
  std::vector<std::string> out;
  for (const auto& e : client) {
    auto it = theirs.find(e.relative_path);
    if (it == theirs.end() || it->second->size_bytes != e.size_bytes || it->second->checksum != e.checksum) {
      out.push_back(e.relative_path);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

wire::WireValue to_wire(const ManifestEntry& entry) {
  wire::Struct s;
  s.type_name = "ManifestEntry";
  s.add("path", entry.relative_path);
  s.add("size", static_cast<std::int64_t>(entry.size_bytes));
  s.add("checksum", static_cast<std::int64_t>(entry.checksum));
  return s;
}

ManifestEntry manifest_entry_from_wire(const wire::WireValue& value) {
  const auto& s = value.as<wire::Struct>();
  return {s.at("path").as<std::string>(), static_cast<std::uint64_t>(s.at("size").as<std::int64_t>()),
          static_cast<std::uint64_t>(s.at("checksum").as<std::int64_t>())};
}

wire::WireValue to_wire(const Manifest& manifest) {
  wire::List l;
  l.reserve(manifest.size());
  for (const auto& e : manifest) l.push_back(to_wire(e));
  return l;
}

Manifest manifest_from_wire(const wire::WireValue& value) {
  Manifest out;
  for (const auto& v : value.as<wire::List>()) out.push_back(manifest_entry_from_wire(v));
  return out;
}

}  // namespace chanrt::sensing
