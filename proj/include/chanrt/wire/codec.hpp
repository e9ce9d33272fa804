#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "chanrt/wire/value.hpp"

namespace chanrt::wire {

// Deterministic big-endian encoding. Tag table:
//   0x00 Null | 0x01 Bool u8 | 0x02 Int i64 | 0x03 Float f64 bits
//   0x04 String u32 len + utf8 | 0x05 Bytes u32 len + raw
//   0x06 List u32 count + values | 0x07 Map u32 count + (key, value) sorted
//   0x08 Struct type_name + u32 count + (name, value) in declaration order
// Map keys and struct strings are encoded without a leading tag.

inline constexpr std::size_t kMaxNestingDepth = 64;

class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes);
  // u32 length prefix followed by the bytes.
  void str(std::string_view s);

 private:
  Bytes& out_;
};

/// Bounds-checked cursor. Every read throws Error(TruncatedInput) when the
/// input is too short.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  // u32 length-prefixed UTF-8 string; validates the encoding.
  std::string str();

  [[nodiscard]] std::size_t offset() const noexcept { return pos_; }
  [[nodiscard]] std::size_t remaining() const noexcept { return in_.size() - pos_; }
  [[nodiscard]] bool done() const noexcept { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

bool is_valid_utf8(std::string_view s) noexcept;

void encode_into(const WireValue& value, ByteWriter& writer);
Bytes encode(const WireValue& value);

/// Reads exactly one value from the reader, leaving trailing bytes.
WireValue decode_from(ByteReader& reader);

struct Decoded {
  WireValue value;
  std::size_t consumed = 0;
};

/// Decodes one value from the front of `bytes`. Trailing bytes are not an
/// error; `consumed` tells where the value ended.
Decoded decode(std::span<const std::uint8_t> bytes);

}  // namespace chanrt::wire
