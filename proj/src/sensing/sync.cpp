#include "chanrt/sensing/sync.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "chanrt/core/timer.hpp"
#include "chanrt/error.hpp"
#include "chanrt/sensing/records.hpp"

namespace chanrt::sensing {

namespace {

// Request timeouts never drop below this in real time, whatever the scale.
constexpr auto kMinRealTimeout = std::chrono::seconds(2);
constexpr auto kPollSlice = std::chrono::milliseconds(20);

bool safe_component(std::string_view s) {
  return !s.empty() && s != "." && s != ".." && s.find('/') == std::string_view::npos &&
         s.find('\0') == std::string_view::npos;
}

bool safe_relative(std::string_view p) {
  if (p.empty()) return false;
  while (true) {
    const auto slash = p.find('/');
    if (!safe_component(p.substr(0, slash))) return false;
    if (slash == std::string_view::npos) return true;
    p.remove_prefix(slash + 1);
  }
}

wire::WireValue sync_message(const char* type, const std::string& user, std::int64_t request_id, const Manifest& entries) {
  wire::Struct s;
  s.type_name = type;
  s.add("user", user);
  s.add("request_id", request_id);
  s.add("entries", to_wire(entries));
  return s;
}

}  // namespace

// ---- DataSyncModule --------------------------------------------------------

DataSyncModule::~DataSyncModule() { terminate(); }

void DataSyncModule::configure(const Properties& p) {
  root_ = p.string("FilePath");
  user_ = p.string("UserIdentifier");
  if (!safe_component(user_)) throw Error(ErrorCode::InvalidProperty, fmt::format("UserIdentifier: '{}'", user_));
  interval_ms_ = p.duration_ms_or("SyncInterval", kMsPerMinute);
  grace_ms_ = p.duration_ms_or("ClosedGrace", 5 * kMsPerSecond);
  retry_ms_ = p.duration_ms_or("SessionRetry", 5 * kMsPerSecond);
  timeout_ms_ = p.duration_ms_or("RequestTimeout", kMsPerMinute);
  link_channel_ = p.string_or("LinkChannel", "LinkMode");
  wifi_bps_ = p.number_or("WiFiBandwidth", kWiFiBytesPerSecond);
  cellular_bps_ = p.number_or("CellularBandwidth", kCellularBytesPerSecond);
  if (retry_ms_ <= 0 || timeout_ms_ <= 0) throw Error(ErrorCode::InvalidProperty, "SessionRetry and RequestTimeout must be positive");
  if (!(wifi_bps_ > 0) || !(cellular_bps_ > 0)) throw Error(ErrorCode::InvalidProperty, "bandwidths must be positive");
  const double window = p.number_or("SendWindow", static_cast<double>(kDefaultSendWindow));
  if (!(window >= 1)) throw Error(ErrorCode::InvalidProperty, "SendWindow must be at least one byte");
  window_bytes_ = static_cast<std::uint64_t>(window);
}

void DataSyncModule::initialize() {
  request_pub_ = publish(kSyncRequestChannel, "SyncRequest");
  file_pub_ = publish(kSyncFileChannel, "SyncFile");
  subscribe(kSyncManifestChannel, "SyncManifest", [this](const Envelope& e) {
    try {
      const auto& s = e.payload.as<wire::Struct>();
      if (s.at("user").as<std::string>() != user_) return;
      const auto id = s.at("request_id").as<std::int64_t>();
      auto entries = manifest_from_wire(s.at("entries"));
      std::lock_guard lock(mutex_);
      if (id == pending_.id) {
        pending_.reply = std::move(entries);
        cv_.notify_all();
      }
    } catch (const std::exception& ex) {
      spdlog::warn("{}: bad SyncManifest: {}", instance_name(), ex.what());
    }
  });
  if (!link_channel_.empty()) {
    subscribe(link_channel_, "String", [this](const Envelope& e) {
      LinkMode mode{};
      try {
        mode = parse_link_mode(e.payload.as<std::string>());
      } catch (const Error& ex) {
        spdlog::warn("{}: {}", instance_name(), ex.what());
        return;
      }
      const auto previous = mode_.exchange(mode);
      std::lock_guard lock(mutex_);
      if (previous == LinkMode::Disconnected && mode != LinkMode::Disconnected) kick_ = true;
      cv_.notify_all();
    });
  }
  if (interval_ms_ > 0) thread_ = std::thread([this] { worker(); });
}

void DataSyncModule::terminate() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

bool DataSyncModule::link_up() const {
  return mode_.load() != LinkMode::Disconnected && runtime().reach(kSyncRequestChannel) > 0 &&
         runtime().reach(kSyncFileChannel) > 0;
}

SyncTotals DataSyncModule::totals() const {
  std::lock_guard lock(mutex_);
  return totals_;
}

SyncStats DataSyncModule::sync_now(bool full) { return run_session(full); }

void DataSyncModule::worker() {
  const auto clock = runtime().clock();
  const PeriodicSpec spec{interval_ms_};
  auto due = first_due(spec, clock->now_ms() + 1, clock->epoch_ms());
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    cv_.wait_until(lock, clock->real_time_of(due), [&] { return stopping_ || kick_; });
    if (stopping_) break;
    if (!kick_ && clock->now_ms() < due) continue;
    kick_ = false;
    lock.unlock();
    bool retry = false;
    if (mode_.load() != LinkMode::Disconnected) {
      if (!link_up()) {
        retry = true;
      } else {
        try {
          const auto stats = run_session(false);
          if (stats.files_sent > 0) {
            spdlog::debug("{}: sent {} files ({} bytes)", instance_name(), stats.files_sent, stats.bytes_sent);
          }
        } catch (const Error& e) {
          spdlog::debug("{}: session aborted: {}", instance_name(), e.what());
          retry = mode_.load() != LinkMode::Disconnected;
        }
      }
    }
    const auto now = clock->now_ms();
    lock.lock();
    due = retry ? now + retry_ms_ : first_due(spec, now + 1, clock->epoch_ms());
  }
}

bool DataSyncModule::closed(const fs::path& relative, std::int64_t now_ms) const {
  if (const auto minute = minute_of_file(relative.filename().string())) {
    return *minute + kMsPerMinute + grace_ms_ <= now_ms;
  }
  return true;
}

SyncStats DataSyncModule::run_session(bool full) {
  std::lock_guard session(session_mutex_);
  const auto clock = runtime().clock();
  SyncStats stats;
  stats.started_ms = clock->now_ms();
  {
    std::lock_guard lock(mutex_);
    ++totals_.sessions;
    totals_.last_session_start_ms = stats.started_ms;
  }
  try {
    if (!link_up()) throw Error(ErrorCode::PeerDisconnected, "no receiver reachable");
    for (int round = 0; round < 4; ++round) {
      const auto now = clock->now_ms();
      Manifest candidates;
      for (auto& e : build_manifest(root_, &cache_)) {
        if (!closed(e.relative_path, now)) continue;
        if (!full || round > 0) {
          const auto it = confirmed_.find(e.relative_path);
          if (it != confirmed_.end() && it->second == std::pair(e.size_bytes, e.checksum)) continue;
        }
        candidates.push_back(std::move(e));
      }
      if (candidates.empty()) break;
      const auto theirs = request_manifest(candidates);
      const auto differ = diff_manifests(candidates, theirs);
      const std::set<std::string> differ_set(differ.begin(), differ.end());
      for (const auto& c : candidates) {
        if (differ_set.contains(c.relative_path)) continue;
        confirmed_[c.relative_path] = {c.size_bytes, c.checksum};
        ++stats.files_confirmed;
      }
      if (differ.empty()) break;
      // Files in flight are acknowledged by a manifest round trip every
      // window_bytes_, so a large backlog never sits in memory all at once.
      Manifest window;
      std::uint64_t window_bytes = 0;
      auto settle = [&] {
        if (window.empty()) return;
        const auto stored = request_manifest(window);
        const auto missing = diff_manifests(window, stored);
        const std::set<std::string> missing_set(missing.begin(), missing.end());
        for (const auto& w : window) {
          if (missing_set.contains(w.relative_path)) continue;
          confirmed_[w.relative_path] = {w.size_bytes, w.checksum};
          ++stats.files_confirmed;
        }
        window.clear();
        window_bytes = 0;
      };
      for (const auto& path : differ) {
        const auto it = std::lower_bound(candidates.begin(), candidates.end(), path,
                                         [](const ManifestEntry& e, const std::string& p) { return e.relative_path < p; });
        send_file(*it, stats);
        window.push_back(*it);
        window_bytes += it->size_bytes;
        if (window_bytes >= window_bytes_) settle();
      }
      settle();
    }
  } catch (const Error&) {
    std::lock_guard lock(mutex_);
    ++totals_.aborted;
    throw;
  }
  stats.finished_ms = clock->now_ms();
  return stats;
}

Manifest DataSyncModule::request_manifest(const Manifest& entries) {
  std::int64_t id = 0;
  {
    std::lock_guard lock(mutex_);
    id = next_request_id_++;
    pending_ = {id, std::nullopt};
  }
  request_pub_.post(sync_message("SyncRequest", user_, id, entries));
  const auto deadline = std::chrono::steady_clock::now() +
                        std::max<std::chrono::nanoseconds>(runtime().clock()->real_duration(timeout_ms_), kMinRealTimeout);
  std::unique_lock lock(mutex_);
  while (!pending_.reply) {
    if (stopping_) throw Error(ErrorCode::PeerDisconnected, "stopping");
    if (std::chrono::steady_clock::now() >= deadline) throw Error(ErrorCode::Timeout, "no SyncManifest reply");
    cv_.wait_for(lock, kPollSlice);
    if (pending_.reply) break;
    lock.unlock();
    const bool up = link_up();
    lock.lock();
    if (!up) throw Error(ErrorCode::PeerDisconnected, "link dropped while waiting for SyncManifest");
  }
  auto reply = std::move(*pending_.reply);
  pending_ = {};
  return reply;
}

void DataSyncModule::send_file(const ManifestEntry& entry, SyncStats& stats) {
  wire::Bytes data;
  try {
    data = read_file(root_ / entry.relative_path);
  } catch (const Error& e) {
    spdlog::warn("{}: skipping {}: {}", instance_name(), entry.relative_path, e.what());
    return;
  }
  const auto checksum = fnv1a64(data);
  const auto size = data.size();

  // The file counts as transferred once the bandwidth of the current mode
  // would have carried it.
  const double bps = mode_.load() == LinkMode::Cellular ? cellular_bps_ : wifi_bps_;
  const auto start = std::max(runtime().now_ms(), next_free_ms_);
  const auto done = start + static_cast<std::int64_t>(std::ceil(static_cast<double>(size) * 1000.0 / bps));
  wait_virtual(done);
  next_free_ms_ = done;

  wire::Struct s;
  s.type_name = "SyncFile";
  s.add("user", user_);
  s.add("path", entry.relative_path);
  s.add("size", static_cast<std::int64_t>(size));
  s.add("checksum", static_cast<std::int64_t>(checksum));
  s.add("data", std::move(data));
  file_pub_.post(std::move(s));
  ++stats.files_sent;
  stats.bytes_sent += size;
  std::lock_guard lock(mutex_);
  ++totals_.files_sent;
  totals_.bytes_sent += size;
}

void DataSyncModule::wait_virtual(std::int64_t until_ms) {
  const auto clock = runtime().clock();
  std::unique_lock lock(mutex_);
  while (true) {
    if (stopping_) throw Error(ErrorCode::PeerDisconnected, "stopping");
    lock.unlock();
    const bool up = link_up();
    lock.lock();
    if (!up) throw Error(ErrorCode::PeerDisconnected, "link dropped during transfer");
    if (clock->now_ms() >= until_ms) return;
    cv_.wait_until(lock, std::min(clock->real_time_of(until_ms), std::chrono::steady_clock::now() + kPollSlice));
  }
}

// ---- DataReceiverModule ----------------------------------------------------

void DataReceiverModule::configure(const Properties& p) { root_ = p.string("StoragePath"); }

void DataReceiverModule::initialize() {
  reply_pub_ = publish(kSyncManifestChannel, "SyncManifest");
  subscribe(kSyncRequestChannel, "SyncRequest", [this](const Envelope& e) { on_request(e); });
  subscribe(kSyncFileChannel, "SyncFile", [this](const Envelope& e) { on_file(e); });
}

void DataReceiverModule::terminate() {
  std::lock_guard lock(mutex_);
  for (auto& [_, u] : users_) u.arrivals.close();
}

DataReceiverModule::UserState& DataReceiverModule::user_state(const std::string& user) {
  auto it = users_.find(user);
  if (it != users_.end()) return it->second;
  UserState state;
  for (auto& e : build_manifest(user_dir(user))) state.files.emplace(e.relative_path, std::move(e));
  std::error_code ec;
  fs::create_directories(root_, ec);
  const auto log = arrivals_path(user);
  const bool fresh = !fs::exists(log) || fs::file_size(log) == 0;
  state.arrivals.open(log, std::ios::app);
  if (!state.arrivals) throw Error(ErrorCode::IoError, "cannot open " + log.string());
  if (fresh) state.arrivals << "path,arrival_ms,record_count\n" << std::flush;
  return users_.emplace(user, std::move(state)).first->second;
}

void DataReceiverModule::on_request(const Envelope& envelope) {
  try {
    const auto& s = envelope.payload.as<wire::Struct>();
    const auto user = s.at("user").as<std::string>();
    if (!safe_component(user)) throw Error(ErrorCode::InvalidProperty, "bad user id");
    const auto wanted = manifest_from_wire(s.at("entries"));
    Manifest have;
    {
      std::lock_guard lock(mutex_);
      ++stats_.requests;
      auto& state = user_state(user);
      for (const auto& w : wanted) {
        if (auto it = state.files.find(w.relative_path); it != state.files.end()) have.push_back(it->second);
      }
    }
    reply_pub_.post(sync_message("SyncManifest", user, s.at("request_id").as<std::int64_t>(), have));
  } catch (const std::exception& ex) {
    spdlog::warn("{}: bad SyncRequest: {}", instance_name(), ex.what());
  }
}

void DataReceiverModule::on_file(const Envelope& envelope) {
  try {
    const auto& s = envelope.payload.as<wire::Struct>();
    const auto user = s.at("user").as<std::string>();
    const auto path = s.at("path").as<std::string>();
    const auto size = static_cast<std::uint64_t>(s.at("size").as<std::int64_t>());
    const auto checksum = static_cast<std::uint64_t>(s.at("checksum").as<std::int64_t>());
    const auto& data = s.at("data").as<wire::Bytes>();
    if (!safe_component(user) || !safe_relative(path) || size != data.size() || fnv1a64(data) != checksum) {
      spdlog::warn("{}: rejected upload {}/{}", instance_name(), user, path);
      std::lock_guard lock(mutex_);
      ++stats_.files_rejected;
      return;
    }
    std::size_t records = 0;
    try {
      records = count_framed(data);
    } catch (const Error&) {
    }
    std::lock_guard lock(mutex_);
    auto& state = user_state(user);
    if (auto it = state.files.find(path); it != state.files.end() && it->second.size_bytes == size &&
                                           it->second.checksum == checksum) {
      ++stats_.files_unchanged;
      return;
    }
    write_file_atomic(user_dir(user) / path, data);
    state.files[path] = {path, size, checksum};
    state.arrivals << path << ',' << runtime().now_ms() << ',' << records << '\n' << std::flush;
    ++stats_.files_stored;
  } catch (const std::exception& ex) {
    spdlog::warn("{}: bad SyncFile: {}", instance_name(), ex.what());
    std::lock_guard lock(mutex_);
    ++stats_.files_rejected;
  }
}

DataReceiverModule::Stats DataReceiverModule::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

Manifest DataReceiverModule::manifest(const std::string& user) const {
  std::lock_guard lock(mutex_);
  Manifest out;
  if (auto it = users_.find(user); it != users_.end()) {
    for (const auto& [_, e] : it->second.files) out.push_back(e);
  }
  return out;
}

void register_sync_modules(ModuleFactory& factory) {
  factory.add("DataSyncModule", [] { return std::make_unique<DataSyncModule>(); });
  factory.add("DataReceiverModule", [] { return std::make_unique<DataReceiverModule>(); });
}

}  // namespace chanrt::sensing
