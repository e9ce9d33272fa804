#include "chanrt/net/frame.hpp"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>

#include "chanrt/error.hpp"
#include "chanrt/wire/codec.hpp"

namespace chanrt::net {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedFrame, what); }

bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x05; }

// Payload decoders report every inner failure as a malformed frame.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedFrame) throw;
    malformed(fmt::format("{} payload: {}", what, e.what()));
  }
}

}  // namespace

std::string_view to_string(FrameType type) noexcept {
  switch (type) {
    case FrameType::Hello: return "HELLO";
    case FrameType::Table: return "TABLE";
    case FrameType::Data: return "DATA";
    case FrameType::Ping: return "PING";
    case FrameType::Pong: return "PONG";
  }
  return "?";
}

wire::Bytes encode_frame(FrameType type, std::span<const std::uint8_t> payload) {
  wire::Bytes out;
  out.reserve(kHeaderSize + payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  wire::ByteWriter w(out);
  w.u8(static_cast<std::uint8_t>(type));
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.raw(payload);
  return out;
}

wire::Bytes encode_frame(const Frame& frame) { return encode_frame(frame.type, frame.payload); }

void FrameParser::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ >= buffer_.size() / 2) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameParser::next() {
  const std::size_t avail = buffer_.size() - offset_;
  const std::uint8_t* p = buffer_.data() + offset_;
  // Validate the header as soon as its bytes arrive so garbage fails early.
  const std::size_t magic_seen = std::min<std::size_t>(avail, 4);
  if (std::memcmp(p, kMagic, magic_seen) != 0) malformed("bad magic");
  if (avail >= 5 && !known_type(p[4])) malformed(fmt::format("unknown frame type {:#04x}", p[4]));
  if (avail < kHeaderSize) return std::nullopt;
  const std::uint32_t len = (std::uint32_t{p[5]} << 24) | (std::uint32_t{p[6]} << 16) | (std::uint32_t{p[7]} << 8) | p[8];
  if (len > kMaxPayload) malformed(fmt::format("payload length {} exceeds limit", len));
  if (avail < kHeaderSize + len) return std::nullopt;
  Frame f;
  f.type = static_cast<FrameType>(p[4]);
  f.payload.assign(p + kHeaderSize, p + kHeaderSize + len);
  offset_ += kHeaderSize + len;
  if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  return f;
}

wire::Bytes encode_hello(const Hello& hello) {
  wire::Bytes out;
  wire::ByteWriter w(out);
  w.u16(hello.version);
  w.str(hello.instance_id);
  return out;
}

Hello decode_hello(std::span<const std::uint8_t> payload) {
  return guarded("HELLO", [&] {
    wire::ByteReader r(payload);
    Hello h;
    h.version = r.u16();
    h.instance_id = r.str();
    if (!r.done()) malformed("trailing bytes in HELLO");
    return h;
  });
}

wire::Bytes encode_table(const ChannelTable& table) {
  wire::Bytes out;
  wire::ByteWriter w(out);
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& e : table) {
    w.str(e.channel);
    w.u8(static_cast<std::uint8_t>((e.has_publisher ? 1 : 0) | (e.has_subscriber ? 2 : 0)));
    w.str(e.type_name);
  }
  return out;
}

ChannelTable decode_table(std::span<const std::uint8_t> payload) {
  return guarded("TABLE", [&] {
    wire::ByteReader r(payload);
    const auto count = r.u32();
    ChannelTable table;
    for (std::uint32_t i = 0; i < count; ++i) {
      ChannelTableEntry e;
      e.channel = r.str();
      const auto flags = r.u8();
      if ((flags & ~0x03u) != 0 || flags == 0) malformed(fmt::format("bad table flags {:#04x}", flags));
      e.has_publisher = (flags & 1) != 0;
      e.has_subscriber = (flags & 2) != 0;
      e.type_name = r.str();
      table.push_back(std::move(e));
    }
    if (!r.done()) malformed("trailing bytes in TABLE");
    return table;
  });
}

wire::Bytes encode_data(const Envelope& envelope) {
  wire::Bytes out;
  wire::ByteWriter w(out);
  w.str(envelope.channel);
  w.u64(envelope.sequence);
  w.i64(envelope.timestamp_ms);
  wire::encode_into(envelope.payload, w);
  return out;
}

Envelope decode_data(std::span<const std::uint8_t> payload) {
  return guarded("DATA", [&] {
    wire::ByteReader r(payload);
    Envelope e;
    e.channel = r.str();
    e.sequence = r.u64();
    e.timestamp_ms = r.i64();
    auto rest = payload.subspan(r.offset());
    auto decoded = wire::decode(rest);
    if (decoded.consumed != rest.size()) malformed("trailing bytes in DATA");
    e.payload = std::move(decoded.value);
    e.type_name = e.payload.type_name();
    return e;
  });
}

}  // namespace chanrt::net
