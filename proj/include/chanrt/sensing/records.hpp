#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chanrt/core/channel.hpp"
#include "chanrt/core/files.hpp"
#include "chanrt/wire/value.hpp"

namespace chanrt::sensing {

namespace fs = std::filesystem;

/// One saved sample. Stored as a "SampleRecord" struct.
struct StoredRecord {
  std::string channel;
  std::uint64_t sequence = 0;
  std::int64_t timestamp_ms = 0;
  wire::WireValue payload;

  friend bool operator==(const StoredRecord&, const StoredRecord&) = default;
};

StoredRecord record_from(const Envelope& envelope);
wire::WireValue to_wire(const StoredRecord& record);
StoredRecord record_from_wire(const wire::WireValue& value);

/// u32 big-endian length followed by encode(to_wire(record)).
wire::Bytes frame_record(const StoredRecord& record);

/// Throws Error(IoError) when unreadable, Error(TruncatedInput) on a torn tail.
std::vector<StoredRecord> read_record_file(const fs::path& path);
/// Walks the length prefixes only.
std::size_t count_records(const fs::path& path);
/// Timestamps of every record, read from record headers without decoding
/// payloads.
std::vector<std::int64_t> record_timestamps(const fs::path& path);
/// Same walk as count_records over an in-memory file image.
std::size_t count_framed(std::span<const std::uint8_t> bytes);

/// "YYYYMMDD_HHMM.rec" of the UTC minute containing `timestamp_ms`.
std::string minute_file_name(std::int64_t timestamp_ms);
fs::path record_path(const fs::path& storage_root, const std::string& channel, std::int64_t timestamp_ms);
/// Start of the minute a "YYYYMMDD_HHMM.rec" name stands for.
std::optional<std::int64_t> minute_of_file(const std::string& file_name);

/// `<prefix>_<epoch_ms>.chunk`; no extra '_' when the prefix already ends in one.
fs::path chunk_path(const std::string& prefix, std::int64_t timestamp_ms);
std::optional<std::int64_t> chunk_time(const std::string& file_name);

using chanrt::read_file;
using chanrt::write_file_atomic;

}  // namespace chanrt::sensing
