#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>

#include "chanrt/core/channel.hpp"
#include "chanrt/wire/value.hpp"

namespace chanrt::net {

inline constexpr std::uint8_t kMagic[4] = {0x43, 0x4C, 0x44, 0x31};  // "CLD1"
inline constexpr std::size_t kHeaderSize = 9;
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxPayload = 64u * 1024u * 1024u;

enum class FrameType : std::uint8_t { Hello = 0x01, Table = 0x02, Data = 0x03, Ping = 0x04, Pong = 0x05 };

std::string_view to_string(FrameType type) noexcept;

struct Frame {
  FrameType type = FrameType::Ping;
  wire::Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

wire::Bytes encode_frame(const Frame& frame);
wire::Bytes encode_frame(FrameType type, std::span<const std::uint8_t> payload);

/// Incremental frame splitter for a TCP byte stream. Throws
/// Error(MalformedFrame) on a bad magic, unknown type or oversized payload.
class FrameParser {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Frame> next();
  [[nodiscard]] std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

 private:
  wire::Bytes buffer_;
  std::size_t offset_ = 0;
};

struct Hello {
  std::uint16_t version = kProtocolVersion;
  std::string instance_id;
};

wire::Bytes encode_hello(const Hello& hello);
Hello decode_hello(std::span<const std::uint8_t> payload);

wire::Bytes encode_table(const ChannelTable& table);
ChannelTable decode_table(std::span<const std::uint8_t> payload);

wire::Bytes encode_data(const Envelope& envelope);
/// type_name comes from the payload; origin_instance is left empty.
Envelope decode_data(std::span<const std::uint8_t> payload);

}  // namespace chanrt::net
