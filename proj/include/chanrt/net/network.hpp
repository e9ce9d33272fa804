#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "chanrt/core/runtime.hpp"
#include "chanrt/net/peer.hpp"

namespace chanrt::net {

inline constexpr std::int64_t kPingPeriodMs = 10'000;
inline constexpr std::chrono::milliseconds kDefaultRetryInterval{5000};

/// Calls `fn` every `interval` on a private thread until stopped.
class Ticker {
 public:
  Ticker() = default;
  ~Ticker() { stop(); }
  void start(std::chrono::nanoseconds interval, std::function<void()> fn);
  void stop();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::thread thread_;
};

/// Real-time ping interval for a virtual period, never shorter than 50 ms so
/// very high time scales do not starve the link.
std::chrono::nanoseconds ping_interval(const VirtualClock& clock, std::int64_t virtual_period_ms);

/// Accepts any number of peers on one port.
class NetworkServer {
 public:
  /// Binds immediately. Throws Error(PortInUse).
  NetworkServer(Runtime& runtime, std::uint16_t port, std::string bind_address = "0.0.0.0");
  ~NetworkServer();

  void start(std::int64_t ping_period_ms = kPingPeriodMs);
  void stop();

  [[nodiscard]] std::uint16_t port() const noexcept { return port_; }
  [[nodiscard]] std::vector<PeerState> peers() const;
  [[nodiscard]] std::vector<std::shared_ptr<PeerLink>> links() const;
  bool wait_for_peers(std::size_t connected, std::chrono::milliseconds timeout) const;

 private:
  void accept_loop();
  void on_identified(PeerLink& link, const std::string& peer_id);

  Runtime& runtime_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::string label_;
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<PeerLink>> links_;
  std::vector<std::shared_ptr<PeerLink>> replaced_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  Ticker pinger_;
};

/// One outgoing connection, retried forever while enabled.
class NetworkClient {
 public:
  NetworkClient(Runtime& runtime, std::string host, std::uint16_t port,
                std::chrono::milliseconds retry_interval = kDefaultRetryInterval);
  ~NetworkClient();

  void start(std::int64_t ping_period_ms = kPingPeriodMs);
  void stop();

  /// Disabling tears the current stream down with a reset and stops retrying
  /// until re-enabled; enabling wakes the retry loop at once.
  void set_enabled(bool enabled);
  [[nodiscard]] bool enabled() const;

  [[nodiscard]] PeerState peer() const { return link_->state(); }
  [[nodiscard]] const std::shared_ptr<PeerLink>& link() const noexcept { return link_; }
  bool wait_connected(std::chrono::milliseconds timeout) const { return link_->wait_connected(timeout); }
  [[nodiscard]] std::uint64_t connect_attempts() const noexcept { return attempts_; }

 private:
  void run();

  Runtime& runtime_;
  std::string host_;
  std::uint16_t port_;
  std::chrono::milliseconds retry_interval_;
  std::shared_ptr<PeerLink> link_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool enabled_ = true;
  bool stopping_ = false;
  bool started_ = false;
  std::atomic<std::uint64_t> attempts_{0};
  std::thread thread_;
  Ticker pinger_;
};

std::unique_ptr<NetworkServer> start_server(Runtime& runtime, std::uint16_t port);
std::unique_ptr<NetworkClient> connect_client(Runtime& runtime, const std::string& host, std::uint16_t port,
                                              std::chrono::milliseconds retry_interval = kDefaultRetryInterval);

/// Properties: Port (default 4000), BindAddress, PingInterval.
class NetworkServerModule : public Module {
 public:
  void configure(const Properties& properties) override;
  void initialize() override;
  void terminate() override;
  [[nodiscard]] NetworkServer* server() const noexcept { return server_.get(); }

 private:
  std::uint16_t port_ = 4000;
  std::string bind_address_ = "0.0.0.0";
  std::int64_t ping_period_ms_ = kPingPeriodMs;
  std::unique_ptr<NetworkServer> server_;
};

/// Properties: ConnectTo "host:port" (required), RetryInterval (real time,
/// default 5000ms), PingInterval, LinkChannel (optional String channel; the
/// value "Disconnected" takes the link down, anything else brings it up).
class NetworkClientModule : public Module {
 public:
  void configure(const Properties& properties) override;
  void initialize() override;
  void terminate() override;
  [[nodiscard]] NetworkClient* client() const noexcept { return client_.get(); }

 private:
  std::string host_;
  std::uint16_t port_ = 0;
  std::chrono::milliseconds retry_interval_ = kDefaultRetryInterval;
  std::int64_t ping_period_ms_ = kPingPeriodMs;
  std::string link_channel_;
  std::unique_ptr<NetworkClient> client_;
};

}  // namespace chanrt::net
