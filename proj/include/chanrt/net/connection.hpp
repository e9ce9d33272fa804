#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "chanrt/net/frame.hpp"
#include "chanrt/net/socket.hpp"

namespace chanrt::net {

class Connection;

class ConnectionHandler {
 public:
  virtual ~ConnectionHandler() = default;
  /// Reader thread. Throwing closes the connection with a reset.
  virtual void on_frame(Connection& connection, Frame frame) = 0;
  /// Reader thread, exactly once, after the socket stopped reading.
  virtual void on_closed(Connection& connection, const std::string& reason) = 0;
};

/// One TCP stream with an independent reader and writer thread. Frames
/// queued with send() go out in order; control frames jump the data queue.
class Connection {
 public:
  Connection(Socket socket, ConnectionHandler& handler, std::string label);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void start();
  /// False once the connection is closing.
  bool send(wire::Bytes frame_bytes);
  bool send_control(wire::Bytes frame_bytes);
  /// Idempotent. `reset` aborts the stream with RST.
  void close(const std::string& reason, bool reset = false);
  /// Joins both threads unless called from one of them.
  void join();

  [[nodiscard]] bool open() const noexcept { return !closing_; }
  [[nodiscard]] const std::string& label() const noexcept { return label_; }
  [[nodiscard]] std::size_t queued_bytes() const;

 private:
  bool enqueue(wire::Bytes bytes, bool control);
  void read_loop();
  void write_loop();

  Socket socket_;
  ConnectionHandler& handler_;
  std::string label_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<wire::Bytes> data_;
  std::deque<wire::Bytes> control_;
  std::size_t queued_bytes_ = 0;
  std::string close_reason_;
  std::atomic<bool> closing_{false};
  std::thread reader_;
  std::thread writer_;
};

}  // namespace chanrt::net
