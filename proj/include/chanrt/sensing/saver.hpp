#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "chanrt/core/runtime.hpp"
#include "chanrt/sensing/records.hpp"

namespace chanrt::sensing {

enum class SaveFormat { MinuteRecords, Chunk };

struct SaveRule {
  std::string channel;
  fs::path storage;  // directory (MinuteRecords) or file prefix (Chunk)
  SaveFormat format = SaveFormat::MinuteRecords;
};

struct SaverStats {
  std::uint64_t records_written = 0;
  std::uint64_t records_lost = 0;
  std::uint64_t files_created = 0;
};

/// Appends records to per-minute files, keeping one descriptor per channel
/// open until the minute rolls over.
class MinuteFileWriter {
 public:
  explicit MinuteFileWriter(fs::path root) : root_(std::move(root)) {}
  ~MinuteFileWriter();
  MinuteFileWriter(const MinuteFileWriter&) = delete;
  MinuteFileWriter& operator=(const MinuteFileWriter&) = delete;

  /// Returns true when the write opened a new file. Throws Error(StorageFull)
  /// or Error(IoError); a failed write leaves no partial record behind.
  bool append(const StoredRecord& record);
  void close_all();

 private:
  struct Open {
    fs::path path;
    int fd = -1;
  };
  fs::path root_;
  std::map<std::string, Open> open_;
};

/// Properties: one or more <save> blocks, each with What (channel),
/// StoragePath, and FileFormat. FileFormat "WAV" or "chunk" writes one file
/// per record at `<StoragePath>_<ms>.chunk`; anything else (default "rec")
/// appends to `<StoragePath>/<channel>/YYYYMMDD_HHMM.rec`.
class DataSaverModule : public Module {
 public:
  void configure(const Properties& properties) override;
  void initialize() override;
  void terminate() override;

  [[nodiscard]] const std::vector<SaveRule>& rules() const noexcept { return rules_; }
  [[nodiscard]] SaverStats stats() const;

 private:
  void save(const SaveRule& rule, const Envelope& envelope);

  std::vector<SaveRule> rules_;
  std::map<fs::path, std::unique_ptr<MinuteFileWriter>> writers_;
  mutable std::mutex stats_mutex_;
  SaverStats stats_;
};

void register_saver_module(ModuleFactory& factory);

}  // namespace chanrt::sensing
