#include "chanrt/net/connection.hpp"

#include <spdlog/spdlog.h>

#include "chanrt/error.hpp"

namespace chanrt::net {

Connection::Connection(Socket socket, ConnectionHandler& handler, std::string label)
    : socket_(std::move(socket)), handler_(handler), label_(std::move(label)) {}

Connection::~Connection() {
  close("destroyed");
  join();
}

void Connection::start() {
  reader_ = std::thread([this] { read_loop(); });
  writer_ = std::thread([this] { write_loop(); });
}

bool Connection::enqueue(wire::Bytes bytes, bool control) {
  {
    std::lock_guard lock(mutex_);
    if (closing_) return false;
    queued_bytes_ += bytes.size();
    (control ? control_ : data_).push_back(std::move(bytes));
  }
  cv_.notify_one();
  return true;
}

bool Connection::send(wire::Bytes frame_bytes) { return enqueue(std::move(frame_bytes), false); }

bool Connection::send_control(wire::Bytes frame_bytes) { return enqueue(std::move(frame_bytes), true); }

std::size_t Connection::queued_bytes() const {
  std::lock_guard lock(mutex_);
  return queued_bytes_;
}

void Connection::close(const std::string& reason, bool reset) {
  {
    std::lock_guard lock(mutex_);
    if (closing_.exchange(true)) return;
    close_reason_ = reason;
    data_.clear();
    control_.clear();
    queued_bytes_ = 0;
  }
  if (reset) socket_.set_abortive_close();
  socket_.shutdown_both();
  cv_.notify_all();
}

void Connection::join() {
  const auto self = std::this_thread::get_id();
  if (reader_.joinable() && reader_.get_id() != self) reader_.join();
  if (writer_.joinable() && writer_.get_id() != self) writer_.join();
}

void Connection::read_loop() {
  FrameParser parser;
  std::vector<std::uint8_t> buffer(64 * 1024);
  std::string reason = "peer closed";
  try {
    for (;;) {
      const long n = socket_.recv_some(buffer);
      if (n <= 0) {
        if (n < 0) reason = "read error";
        break;
      }
      parser.feed(std::span(buffer.data(), static_cast<std::size_t>(n)));
      while (auto frame = parser.next()) handler_.on_frame(*this, std::move(*frame));
      if (closing_) break;
    }
  } catch (const std::exception& e) {
    reason = e.what();
    spdlog::warn("[{}] resetting connection: {}", label_, reason);
    close(reason, true);
  }
  {
    std::lock_guard lock(mutex_);
    if (!close_reason_.empty()) reason = close_reason_;
  }
  close(reason);
  handler_.on_closed(*this, reason);
}

void Connection::write_loop() {
  for (;;) {
    wire::Bytes next;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return closing_ || !control_.empty() || !data_.empty(); });
      if (closing_) return;
      auto& q = control_.empty() ? data_ : control_;
      next = std::move(q.front());
      q.pop_front();
    }
    const bool ok = socket_.send_all(next);
    {
      std::lock_guard lock(mutex_);
      queued_bytes_ -= std::min(queued_bytes_, next.size());
    }
    if (!ok) {
      close("write error");
      return;
    }
  }
}

}  // namespace chanrt::net
