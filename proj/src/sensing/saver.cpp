#include "chanrt/sensing/saver.hpp"

#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "chanrt/error.hpp"

namespace chanrt::sensing {

namespace {

[[noreturn]] void fail(const fs::path& path, const char* what, int err) {
  if (err == ENOSPC || err == EDQUOT) throw Error(ErrorCode::StorageFull, fmt::format("{} {}", what, path.string()));
  throw Error(ErrorCode::IoError, fmt::format("{} {}: {}", what, path.string(), std::strerror(err)));
}

SaveFormat parse_format(const std::string& text) {
  if (text == "WAV" || text == "wav" || text == "chunk") return SaveFormat::Chunk;
  return SaveFormat::MinuteRecords;
}

}  // namespace

MinuteFileWriter::~MinuteFileWriter() { close_all(); }

void MinuteFileWriter::close_all() {
  for (auto& [_, o] : open_) {
    if (o.fd >= 0) ::close(o.fd);
  }
  open_.clear();
}

bool MinuteFileWriter::append(const StoredRecord& record) {
  const auto path = record_path(root_, record.channel, record.timestamp_ms);
  auto& o = open_[record.channel];
  bool opened = false;
  if (o.fd < 0 || o.path != path) {
    if (o.fd >= 0) ::close(o.fd);
    o.fd = -1;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(path.parent_path(), "create", ec.value());
    opened = !fs::exists(path);
    o.fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (o.fd < 0) fail(path, "open", errno);
    o.path = path;
  }
  const auto bytes = frame_record(record);
  const auto start = ::lseek(o.fd, 0, SEEK_END);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::write(o.fd, bytes.data() + done, bytes.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      const int err = errno;
      if (start >= 0 && ::ftruncate(o.fd, start) != 0) spdlog::warn("could not roll back {}", path.string());
      fail(path, "write", err);
    }
    done += static_cast<std::size_t>(n);
  }
  return opened;
}

void DataSaverModule::configure(const Properties& p) {
  rules_.clear();
  for (const auto& block : p.list("save")) {
    if (!block.is_map()) throw Error(ErrorCode::InvalidProperty, "save: expected nested What/StoragePath");
    const Properties b(block.map());
    SaveRule rule;
    rule.channel = b.string("What");
    rule.storage = b.string("StoragePath");
    rule.format = parse_format(b.string_or("FileFormat", "rec"));
    if (rule.channel.empty() || rule.storage.empty()) {
      throw Error(ErrorCode::InvalidProperty, "save: What and StoragePath must be non-empty");
    }
    rules_.push_back(std::move(rule));
  }
  if (rules_.empty()) throw Error(ErrorCode::InvalidProperty, "DataSaverModule needs at least one <save> block");
}

void DataSaverModule::initialize() {
  for (const auto& rule : rules_) {
    if (rule.format == SaveFormat::MinuteRecords && !writers_.contains(rule.storage)) {
      writers_.emplace(rule.storage, std::make_unique<MinuteFileWriter>(rule.storage));
    }
    subscribe(rule.channel, kAnyType, [this, &rule](const Envelope& e) { save(rule, e); });
  }
}

void DataSaverModule::terminate() {
  for (auto& [_, w] : writers_) w->close_all();
}

void DataSaverModule::save(const SaveRule& rule, const Envelope& envelope) {
  const auto record = record_from(envelope);
  bool created = false;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      if (rule.format == SaveFormat::Chunk) {
        const auto path = chunk_path(rule.storage.string(), record.timestamp_ms);
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        write_file_atomic(path, frame_record(record));
        created = true;
      } else {
        created = writers_.at(rule.storage)->append(record);
      }
      std::lock_guard lock(stats_mutex_);
      ++stats_.records_written;
      if (created) ++stats_.files_created;
      return;
    } catch (const Error& e) {
      if (attempt == 0 && e.code() == ErrorCode::IoError) continue;
      spdlog::error("{}: lost record {}#{}: {}", instance_name(), envelope.channel, envelope.sequence, e.what());
      break;
    }
  }
  std::lock_guard lock(stats_mutex_);
  ++stats_.records_lost;
}

SaverStats DataSaverModule::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

void register_saver_module(ModuleFactory& factory) {
  factory.add("DataSaverModule", [] { return std::make_unique<DataSaverModule>(); });
}

}  // namespace chanrt::sensing
