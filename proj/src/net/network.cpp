#include "chanrt/net/network.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "chanrt/error.hpp"

namespace chanrt::net {

void Ticker::start(std::chrono::nanoseconds interval, std::function<void()> fn) {
  stop();
  stopping_ = false;
  thread_ = std::thread([this, interval, fn = std::move(fn)] {
    std::unique_lock lock(mutex_);
    auto next = std::chrono::steady_clock::now() + interval;
    while (!cv_.wait_until(lock, next, [&] { return stopping_; })) {
      lock.unlock();
      fn();
      lock.lock();
      next += interval;
    }
  });
}

void Ticker::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

std::chrono::nanoseconds ping_interval(const VirtualClock& clock, std::int64_t virtual_period_ms) {
  return std::max<std::chrono::nanoseconds>(clock.real_duration(virtual_period_ms), std::chrono::milliseconds(50));
}

// ---- server ----------------------------------------------------------------

NetworkServer::NetworkServer(Runtime& runtime, std::uint16_t port, std::string bind_address)
    : runtime_(runtime), listener_(listen_tcp(port, bind_address)), port_(local_port(listener_)) {
  label_ = fmt::format("{}:server:{}", runtime_.instance_id(), port_);
}

NetworkServer::~NetworkServer() { stop(); }

void NetworkServer::start(std::int64_t ping_period_ms) {
  acceptor_ = std::thread([this] { accept_loop(); });
  pinger_.start(ping_interval(*runtime_.clock(), ping_period_ms), [this] {
    for (auto& l : links()) l->ping_tick();
  });
}

void NetworkServer::stop() {
  if (stopping_.exchange(true)) return;
  pinger_.stop();
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  std::vector<std::shared_ptr<PeerLink>> all;
  {
    std::lock_guard lock(mutex_);
    all = links_;
    all.insert(all.end(), replaced_.begin(), replaced_.end());
  }
  for (auto& l : all) {
    runtime_.detach_link(l.get());
    l->shutdown();
  }
}

void NetworkServer::accept_loop() {
  while (!stopping_) {
    Socket s = accept_tcp(listener_, std::chrono::milliseconds(50));
    if (!s.valid()) continue;
    PeerLink::Hooks hooks;
    hooks.identified = [this](PeerLink& link, const std::string& id) { on_identified(link, id); };
    auto link = std::make_shared<PeerLink>(runtime_, label_, std::move(hooks));
    {
      std::lock_guard lock(mutex_);
      links_.push_back(link);
    }
    runtime_.attach_link(link);
    link->begin(std::move(s));
  }
}

// A reconnecting client shows up as a fresh stream; retire links that still
// stand for the same peer so they stop counting drops.
void NetworkServer::on_identified(PeerLink& link, const std::string& peer_id) {
  std::vector<std::shared_ptr<PeerLink>> stale;
  {
    std::lock_guard lock(mutex_);
    for (auto it = links_.begin(); it != links_.end();) {
      if (it->get() != &link && (*it)->state().peer_instance_id == peer_id) {
        stale.push_back(*it);
        it = links_.erase(it);
      } else {
        ++it;
      }
    }
    replaced_.insert(replaced_.end(), stale.begin(), stale.end());
  }
  for (auto& l : stale) {
    runtime_.detach_link(l.get());
    l->disconnect("superseded by a new session");
  }
}

std::vector<PeerState> NetworkServer::peers() const {
  std::vector<PeerState> out;
  for (auto& l : links()) out.push_back(l->state());
  return out;
}

std::vector<std::shared_ptr<PeerLink>> NetworkServer::links() const {
  std::lock_guard lock(mutex_);
  return links_;
}

bool NetworkServer::wait_for_peers(std::size_t connected, std::chrono::milliseconds timeout) const {
  const auto until = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto ps = peers();
    const auto n = std::count_if(ps.begin(), ps.end(), [](const PeerState& p) { return p.status == PeerStatus::Connected; });
    if (static_cast<std::size_t>(n) >= connected) return true;
    if (std::chrono::steady_clock::now() >= until) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

// ---- client ----------------------------------------------------------------

NetworkClient::NetworkClient(Runtime& runtime, std::string host, std::uint16_t port,
                             std::chrono::milliseconds retry_interval)
    : runtime_(runtime), host_(std::move(host)), port_(port), retry_interval_(retry_interval) {
  PeerLink::Hooks hooks;
  hooks.down = [this](PeerLink&) {
    { std::lock_guard lock(mutex_); }
    cv_.notify_all();
  };
  link_ = std::make_shared<PeerLink>(runtime_, fmt::format("{}:client:{}:{}", runtime_.instance_id(), host_, port_),
                                     std::move(hooks));
}

NetworkClient::~NetworkClient() { stop(); }

void NetworkClient::start(std::int64_t ping_period_ms) {
  {
    std::lock_guard lock(mutex_);
    if (started_) return;
    started_ = true;
  }
  runtime_.attach_link(link_);
  thread_ = std::thread([this] { run(); });
  pinger_.start(ping_interval(*runtime_.clock(), ping_period_ms), [this] { link_->ping_tick(); });
}

void NetworkClient::stop() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_ || !started_) {
      stopping_ = true;
      return;
    }
    stopping_ = true;
  }
  cv_.notify_all();
  pinger_.stop();
  if (thread_.joinable()) thread_.join();
  runtime_.detach_link(link_.get());
  link_->shutdown();
}

void NetworkClient::set_enabled(bool enabled) {
  {
    std::lock_guard lock(mutex_);
    if (enabled_ == enabled) return;
    enabled_ = enabled;
  }
  if (!enabled) link_->disconnect("link disabled", true);
  cv_.notify_all();
}

bool NetworkClient::enabled() const {
  std::lock_guard lock(mutex_);
  return enabled_;
}

void NetworkClient::run() {
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    if (!enabled_) {
      cv_.wait(lock, [&] { return stopping_ || enabled_; });
      continue;
    }
    if (link_->session_active()) {
      cv_.wait(lock, [&] { return stopping_ || !enabled_ || !link_->session_active(); });
      continue;
    }
    lock.unlock();
    bool ok = false;
    ++attempts_;
    try {
      Socket s = connect_tcp(host_, port_, std::min(retry_interval_, std::chrono::milliseconds(2000)));
      if (enabled()) {
        link_->begin(std::move(s));
        ok = true;
      }
    } catch (const Error& e) {
      spdlog::debug("[{}] connect failed: {}", link_->label(), e.what());
    }
    lock.lock();
    if (!ok) {
      // Re-enabling after an outage retries at once rather than after the interval.
      const bool was_enabled = enabled_;
      cv_.wait_for(lock, retry_interval_, [&] { return stopping_ || enabled_ != was_enabled; });
    }
  }
}

std::unique_ptr<NetworkServer> start_server(Runtime& runtime, std::uint16_t port) {
  auto server = std::make_unique<NetworkServer>(runtime, port);
  server->start();
  return server;
}

std::unique_ptr<NetworkClient> connect_client(Runtime& runtime, const std::string& host, std::uint16_t port,
                                              std::chrono::milliseconds retry_interval) {
  auto client = std::make_unique<NetworkClient>(runtime, host, port, retry_interval);
  client->start();
  return client;
}

// ---- modules ---------------------------------------------------------------

void NetworkServerModule::configure(const Properties& properties) {
  const auto port = properties.integer_or("Port", 4000);
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidProperty, fmt::format("Port: {} out of range", port));
  port_ = static_cast<std::uint16_t>(port);
  bind_address_ = properties.string_or("BindAddress", bind_address_);
  ping_period_ms_ = properties.duration_ms_or("PingInterval", kPingPeriodMs);
  if (ping_period_ms_ <= 0) throw Error(ErrorCode::InvalidProperty, "PingInterval must be positive");
}

void NetworkServerModule::initialize() {
  server_ = std::make_unique<NetworkServer>(runtime(), port_, bind_address_);
  server_->start(ping_period_ms_);
  spdlog::info("[{}] listening on port {}", instance_name(), server_->port());
}

void NetworkServerModule::terminate() {
  if (server_) server_->stop();
}

void NetworkClientModule::configure(const Properties& properties) {
  std::tie(host_, port_) = parse_endpoint(properties.string("ConnectTo"));
  retry_interval_ = std::chrono::milliseconds(properties.duration_ms_or("RetryInterval", kDefaultRetryInterval.count()));
  if (retry_interval_.count() <= 0) throw Error(ErrorCode::InvalidProperty, "RetryInterval must be positive");
  ping_period_ms_ = properties.duration_ms_or("PingInterval", kPingPeriodMs);
  if (ping_period_ms_ <= 0) throw Error(ErrorCode::InvalidProperty, "PingInterval must be positive");
  link_channel_ = properties.string_or("LinkChannel", "");
}

void NetworkClientModule::initialize() {
  client_ = std::make_unique<NetworkClient>(runtime(), host_, port_, retry_interval_);
  if (!link_channel_.empty()) {
    subscribe(link_channel_, "String", [this](const Envelope& e) {
      client_->set_enabled(e.payload.as<std::string>() != "Disconnected");
    });
  }
  client_->start(ping_period_ms_);
}

void NetworkClientModule::terminate() {
  if (client_) client_->stop();
}

}  // namespace chanrt::net
