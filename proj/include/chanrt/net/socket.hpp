#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>

namespace chanrt::net {

/// Owning TCP socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  [[nodiscard]] int fd() const noexcept { return fd_; }
  [[nodiscard]] bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept;
  void close() noexcept;

  /// Blocks until every byte is written; false on any error.
  bool send_all(std::span<const std::uint8_t> bytes) const;
  /// Bytes read, 0 on orderly EOF, -1 on error.
  long recv_some(std::span<std::uint8_t> buffer) const;
  /// Unblocks readers and writers on other threads.
  void shutdown_both() const noexcept;
  /// Makes the eventual close send RST instead of FIN.
  void set_abortive_close() const noexcept;
  void set_nodelay() const noexcept;

 private:
  int fd_ = -1;
};

/// Listening socket on `port` (0 picks an ephemeral one). Throws
/// Error(PortInUse) when the address is taken, Error(IoError) otherwise.
Socket listen_tcp(std::uint16_t port, const std::string& bind_address = "0.0.0.0");
std::uint16_t local_port(const Socket& socket);

/// Waits up to `timeout` for a connection; invalid Socket on timeout.
Socket accept_tcp(const Socket& listener, std::chrono::milliseconds timeout);

/// Throws Error(ConnectionRefused) when the peer cannot be reached in time.
Socket connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Splits "host:port". Throws Error(InvalidProperty).
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace chanrt::net
