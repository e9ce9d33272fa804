#include "chanrt/net/peer.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "chanrt/core/runtime.hpp"
#include "chanrt/error.hpp"

namespace chanrt::net {

std::string_view to_string(PeerStatus status) noexcept {
  return status == PeerStatus::Connected ? "Connected" : "Disconnected";
}

bool has_remote_subscriber(const PeerState& peer, const std::string& channel) {
  return std::any_of(peer.remote_table.begin(), peer.remote_table.end(),
                     [&](const ChannelTableEntry& e) { return e.channel == channel && e.has_subscriber; });
}

RouteDecision route(const std::string& channel, const std::vector<PeerState>& peers) {
  RouteDecision d;
  for (std::size_t i = 0; i < peers.size(); ++i) {
    if (!has_remote_subscriber(peers[i], channel)) continue;
    (peers[i].status == PeerStatus::Connected ? d.send : d.drop).push_back(i);
  }
  return d;
}

PeerLink::PeerLink(Runtime& runtime, std::string label, Hooks hooks)
    : runtime_(runtime), label_(std::move(label)), hooks_(std::move(hooks)) {}

PeerLink::~PeerLink() { shutdown(); }

void PeerLink::begin(Socket socket) {
  std::vector<std::shared_ptr<Connection>> finished;
  {
    std::lock_guard lock(mutex_);
    finished.swap(retired_);
  }
  for (auto& c : finished) c->join();
  std::shared_ptr<Connection> conn;
  // The snapshot and the queueing happen under the runtime's channel lock, so
  // no table change or post can slip between HELLO/TABLE and later frames.
  runtime_.with_table([&](const ChannelTable& table) {
    std::lock_guard lock(mutex_);
    if (conn_) {
      conn_->close("replaced", true);
      retired_.push_back(std::move(conn_));
    }
    conn = std::make_shared<Connection>(std::move(socket), *this, label_);
    conn->send(encode_frame(FrameType::Hello, encode_hello({kProtocolVersion, runtime_.instance_id()})));
    conn->send(encode_frame(FrameType::Table, encode_table(table)));
    conn_ = conn;
    hello_received_ = false;
    outstanding_pings_ = 0;
  });
  conn->start();
}

void PeerLink::disconnect(const std::string& reason, bool reset) {
  std::shared_ptr<Connection> conn;
  {
    std::lock_guard lock(mutex_);
    conn = conn_;
  }
  if (conn) conn->close(reason, reset);
}

void PeerLink::ping_tick() {
  std::shared_ptr<Connection> conn;
  bool give_up = false;
  {
    std::lock_guard lock(mutex_);
    if (!conn_ || state_.status != PeerStatus::Connected) return;
    conn = conn_;
    if (outstanding_pings_ >= kMaxMissedPongs) {
      give_up = true;
    } else {
      ++outstanding_pings_;
    }
  }
  if (give_up) {
    spdlog::warn("[{}] {} pings unanswered, dropping peer", label_, kMaxMissedPongs);
    conn->close("ping timeout", true);
  } else {
    conn->send_control(encode_frame(FrameType::Ping, {}));
  }
}

void PeerLink::shutdown() {
  std::vector<std::shared_ptr<Connection>> all;
  {
    std::lock_guard lock(mutex_);
    all = std::move(retired_);
    retired_.clear();
    if (conn_) all.push_back(conn_);
  }
  for (auto& c : all) c->close("shutdown");
  for (auto& c : all) c->join();
  std::lock_guard lock(mutex_);
  conn_.reset();
  state_.status = PeerStatus::Disconnected;
  cv_.notify_all();
}

PeerState PeerLink::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

bool PeerLink::connected() const {
  std::lock_guard lock(mutex_);
  return state_.status == PeerStatus::Connected;
}

bool PeerLink::session_active() const {
  std::lock_guard lock(mutex_);
  return conn_ != nullptr;
}

bool PeerLink::wait_connected(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return state_.status == PeerStatus::Connected; });
}

bool PeerLink::wait_disconnected(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return conn_ == nullptr; });
}

void PeerLink::forward(const std::shared_ptr<const Envelope>& envelope) {
  std::lock_guard lock(mutex_);
  if (!has_remote_subscriber(state_, envelope->channel)) return;
  if (state_.status != PeerStatus::Connected || !conn_ || !conn_->send(encode_frame(FrameType::Data, encode_data(*envelope)))) {
    ++state_.dropped_count;
    return;
  }
  ++state_.data_sent;
}

void PeerLink::local_table_changed(const ChannelTable& table) {
  std::lock_guard lock(mutex_);
  if (conn_) conn_->send(encode_frame(FrameType::Table, encode_table(table)));
}

bool PeerLink::reaches(const std::string& channel) const {
  std::lock_guard lock(mutex_);
  return state_.status == PeerStatus::Connected && has_remote_subscriber(state_, channel);
}

void PeerLink::on_frame(Connection& connection, Frame frame) {
  switch (frame.type) {
    case FrameType::Hello: {
      const auto hello = decode_hello(frame.payload);
      if (hello.version != kProtocolVersion) {
        spdlog::error("[{}] peer '{}' speaks protocol version {}, expected {}", label_, hello.instance_id, hello.version,
                      kProtocolVersion);
        throw Error(ErrorCode::HandshakeVersionMismatch, fmt::format("version {}", hello.version));
      }
      {
        std::lock_guard lock(mutex_);
        if (!current(connection)) return;
        hello_received_ = true;
        state_.peer_instance_id = hello.instance_id;
      }
      if (hooks_.identified) hooks_.identified(*this, hello.instance_id);
      return;
    }
    case FrameType::Table: {
      auto table = decode_table(frame.payload);
      std::lock_guard lock(mutex_);
      if (!current(connection)) return;
      if (!hello_received_) throw Error(ErrorCode::MalformedFrame, "TABLE before HELLO");
      state_.remote_table = std::move(table);
      if (state_.status != PeerStatus::Connected) {
        state_.status = PeerStatus::Connected;
        ++state_.sessions;
        spdlog::info("[{}] connected to '{}'", label_, state_.peer_instance_id);
      }
      cv_.notify_all();
      return;
    }
    case FrameType::Data: {
      auto env = std::make_shared<Envelope>(decode_data(frame.payload));
      {
        std::lock_guard lock(mutex_);
        if (!current(connection)) return;
        if (state_.status != PeerStatus::Connected) throw Error(ErrorCode::MalformedFrame, "DATA before handshake");
        env->origin_instance = state_.peer_instance_id;
        ++state_.data_received;
      }
      if (!runtime_.inject(std::move(env))) {
        spdlog::debug("[{}] dropped DATA frame for an unknown or mistyped channel", label_);
      }
      return;
    }
    case FrameType::Ping:
      connection.send_control(encode_frame(FrameType::Pong, {}));
      return;
    case FrameType::Pong: {
      std::lock_guard lock(mutex_);
      outstanding_pings_ = 0;
      return;
    }
  }
}

void PeerLink::on_closed(Connection& connection, const std::string& reason) {
  {
    std::lock_guard lock(mutex_);
    if (!current(connection)) return;
    if (state_.status == PeerStatus::Connected) {
      spdlog::info("[{}] disconnected from '{}': {}", label_, state_.peer_instance_id, reason);
    }
    state_.status = PeerStatus::Disconnected;
    retired_.push_back(std::move(conn_));
    conn_.reset();
    hello_received_ = false;
    cv_.notify_all();
  }
  if (hooks_.down) hooks_.down(*this);
}

}  // namespace chanrt::net
