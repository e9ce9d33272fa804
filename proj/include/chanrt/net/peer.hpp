#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "chanrt/core/channel.hpp"
#include "chanrt/net/connection.hpp"

namespace chanrt {
class Runtime;
}

namespace chanrt::net {

enum class PeerStatus { Connected, Disconnected };

std::string_view to_string(PeerStatus status) noexcept;

struct PeerState {
  std::string peer_instance_id;
  ChannelTable remote_table;
  PeerStatus status = PeerStatus::Disconnected;
  std::uint64_t dropped_count = 0;
  std::uint64_t data_sent = 0;
  std::uint64_t data_received = 0;
  std::uint64_t sessions = 0;
};

[[nodiscard]] bool has_remote_subscriber(const PeerState& peer, const std::string& channel);

struct RouteDecision {
  std::vector<std::size_t> send;  // peer indices that get one DATA frame
  std::vector<std::size_t> drop;  // disconnected peers that would have wanted it
  friend bool operator==(const RouteDecision&, const RouteDecision&) = default;
};

/// Remote half of routing: local subscribers are served by the runtime.
RouteDecision route(const std::string& channel, const std::vector<PeerState>& peers);

/// Runtime-side endpoint of one peer. Survives reconnects: each new TCP
/// stream is handed over with begin(), and the dropped counter and last known
/// remote table carry across sessions.
class PeerLink final : public RemoteLink, public ConnectionHandler, public std::enable_shared_from_this<PeerLink> {
 public:
  struct Hooks {
    std::function<void(PeerLink&, const std::string& peer_id)> identified;
    std::function<void(PeerLink&)> down;
  };

  PeerLink(Runtime& runtime, std::string label, Hooks hooks = {});
  ~PeerLink() override;

  /// Queues HELLO + a consistent TABLE snapshot and starts the stream.
  void begin(Socket socket);
  void disconnect(const std::string& reason, bool reset = true);
  /// Sends PING, or drops the session after too many unanswered ones.
  void ping_tick();
  /// Closes and joins every stream. Must not run on a stream thread.
  void shutdown();

  [[nodiscard]] PeerState state() const;
  [[nodiscard]] bool connected() const;
  [[nodiscard]] bool session_active() const;
  bool wait_connected(std::chrono::milliseconds timeout) const;
  bool wait_disconnected(std::chrono::milliseconds timeout) const;
  [[nodiscard]] const std::string& label() const noexcept { return label_; }

  void forward(const std::shared_ptr<const Envelope>& envelope) override;
  void local_table_changed(const ChannelTable& table) override;
  [[nodiscard]] bool reaches(const std::string& channel) const override;

  void on_frame(Connection& connection, Frame frame) override;
  void on_closed(Connection& connection, const std::string& reason) override;

  static constexpr int kMaxMissedPongs = 3;

 private:
  bool current(const Connection& c) const { return conn_ && conn_.get() == &c; }

  Runtime& runtime_;
  std::string label_;
  Hooks hooks_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  PeerState state_;
  bool hello_received_ = false;
  int outstanding_pings_ = 0;
  std::shared_ptr<Connection> conn_;
  std::vector<std::shared_ptr<Connection>> retired_;
};

}  // namespace chanrt::net
