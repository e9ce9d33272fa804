#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "chanrt/core/runtime.hpp"
#include "chanrt/sensing/manifest.hpp"
#include "chanrt/sensing/schedule.hpp"

namespace chanrt::sensing {

inline constexpr const char* kSyncRequestChannel = "SyncRequest";
inline constexpr const char* kSyncManifestChannel = "SyncManifest";
inline constexpr const char* kSyncFileChannel = "SyncFile";

inline constexpr double kWiFiBytesPerSecond = 8e6;
inline constexpr double kCellularBytesPerSecond = 3e6;
inline constexpr std::uint64_t kDefaultSendWindow = 4u << 20;

struct SyncStats {
  std::uint64_t files_sent = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t files_confirmed = 0;
  std::int64_t started_ms = 0;
  std::int64_t finished_ms = 0;
};

struct SyncTotals {
  std::uint64_t sessions = 0;
  std::uint64_t aborted = 0;
  std::uint64_t files_sent = 0;
  std::uint64_t bytes_sent = 0;
  std::optional<std::int64_t> last_session_start_ms;
};

/// Uploads closed files under FilePath to a DataReceiverModule reachable over
/// the SyncRequest/SyncManifest/SyncFile channels.
///
/// A session lists closed files whose (size, checksum) the receiver has not
/// yet confirmed, asks the receiver for its entries for those paths, sends
/// every file that differs, then asks again to confirm. Per-minute record
/// files count as closed once their minute plus ClosedGrace has passed.
///
/// Properties: FilePath, UserIdentifier (both required), SyncInterval
/// (virtual, default 1m, "0" means sync_now() only), ClosedGrace (default 5s),
/// LinkChannel (default "LinkMode"; carries WiFi/Cellular/Disconnected),
/// SessionRetry (virtual, default 5s), RequestTimeout (virtual, default 1m),
/// WiFiBandwidth and CellularBandwidth (bytes per virtual second), SendWindow
/// (bytes sent before waiting for the receiver to acknowledge, default 4 MiB).
class DataSyncModule : public Module {
 public:
  ~DataSyncModule() override;

  void configure(const Properties& properties) override;
  void initialize() override;
  void terminate() override;

  /// One session on the calling thread. `full` re-checks every closed file,
  /// confirmed or not. Throws Error(PeerDisconnected) when the link drops or
  /// no receiver is reachable, Error(Timeout) when the receiver is silent.
  SyncStats sync_now(bool full = false);

  [[nodiscard]] SyncTotals totals() const;
  [[nodiscard]] LinkMode link_mode() const noexcept { return mode_.load(); }
  [[nodiscard]] bool link_up() const;
  [[nodiscard]] const fs::path& root() const noexcept { return root_; }

 private:
  struct Pending {
    std::int64_t id = 0;
    std::optional<Manifest> reply;
  };

  void worker();
  SyncStats run_session(bool full);
  Manifest request_manifest(const Manifest& entries);
  void send_file(const ManifestEntry& entry, SyncStats& stats);
  void wait_virtual(std::int64_t until_ms);
  [[nodiscard]] bool closed(const fs::path& relative, std::int64_t now_ms) const;

  fs::path root_;
  std::string user_;
  std::int64_t interval_ms_ = kMsPerMinute;
  std::int64_t grace_ms_ = 5 * kMsPerSecond;
  std::int64_t retry_ms_ = 5 * kMsPerSecond;
  std::int64_t timeout_ms_ = kMsPerMinute;
  std::string link_channel_ = "LinkMode";
  double wifi_bps_ = kWiFiBytesPerSecond;
  double cellular_bps_ = kCellularBytesPerSecond;
  std::uint64_t window_bytes_ = kDefaultSendWindow;

  Publisher request_pub_;
  Publisher file_pub_;
  ChecksumCache cache_;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> confirmed_;
  std::int64_t next_request_id_ = 1;
  std::int64_t next_free_ms_ = 0;

  std::atomic<LinkMode> mode_{LinkMode::WiFi};
  std::mutex session_mutex_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  Pending pending_;
  SyncTotals totals_;
  bool kick_ = false;
  bool stopping_ = false;
  std::thread thread_;
};

/// Receives SyncFile uploads into `<StoragePath>/<user>/<path>` and answers
/// SyncRequest with its own manifest entries. Files are written atomically
/// and only when size and checksum match, so a torn upload leaves nothing
/// behind. Each newly stored file appends "path,arrival_ms,record_count" to
/// `<StoragePath>/<user>.arrivals.csv`.
class DataReceiverModule : public Module {
 public:
  struct Stats {
    std::uint64_t requests = 0;
    std::uint64_t files_stored = 0;
    std::uint64_t files_unchanged = 0;
    std::uint64_t files_rejected = 0;
  };

  void configure(const Properties& properties) override;
  void initialize() override;
  void terminate() override;

  [[nodiscard]] Stats stats() const;
  [[nodiscard]] Manifest manifest(const std::string& user) const;
  [[nodiscard]] fs::path user_dir(const std::string& user) const { return root_ / user; }
  [[nodiscard]] fs::path arrivals_path(const std::string& user) const { return root_ / (user + ".arrivals.csv"); }

 private:
  struct UserState {
    std::map<std::string, ManifestEntry> files;
    std::ofstream arrivals;
  };

  UserState& user_state(const std::string& user);
  void on_request(const Envelope& envelope);
  void on_file(const Envelope& envelope);

  fs::path root_;
  Publisher reply_pub_;
  mutable std::mutex mutex_;
  std::map<std::string, UserState> users_;
  Stats stats_;
};

void register_sync_modules(ModuleFactory& factory);

}  // namespace chanrt::sensing
