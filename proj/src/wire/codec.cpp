#include "chanrt/wire/codec.hpp"

#include <bit>
#include <limits>
#include <unordered_set>

#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace chanrt::wire {

void ByteWriter::u16(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
  out_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  if (n > remaining()) {
    throw Error(ErrorCode::TruncatedInput,
                "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) + ", have " +
                    std::to_string(remaining()));
  }
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return raw(1)[0]; }

std::uint16_t ByteReader::u16() {
  auto b = raw(2);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t ByteReader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (auto byte : b) v = (v << 8) | byte;
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (auto byte : b) v = (v << 8) | byte;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const auto n = u32();
  auto b = raw(n);
  std::string s(b.begin(), b.end());
  if (!is_valid_utf8(s)) throw Error(ErrorCode::InvalidUtf8, "at offset " + std::to_string(pos_ - n));
  return s;
}

bool is_valid_utf8(std::string_view s) noexcept {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp >= 0xD800 && cp <= 0xDFFF) return false;
    if (cp > 0x10FFFF) return false;
    i += len;
  }
  return true;
}

namespace {

std::uint32_t checked_count(std::size_t n) {
  if (n > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("value exceeds u32 length field");
  return static_cast<std::uint32_t>(n);
}

void encode_value(const WireValue& value, ByteWriter& w) {
  w.u8(static_cast<std::uint8_t>(value.tag()));
  switch (value.tag()) {
    case Tag::Null: break;
    case Tag::Bool: w.u8(value.as<bool>() ? 1 : 0); break;
    case Tag::Int: w.i64(value.as<std::int64_t>()); break;
    case Tag::Float: w.f64(value.as<double>()); break;
    case Tag::String: w.str(value.as<std::string>()); break;
    case Tag::Bytes: {
      const auto& b = value.as<Bytes>();
      w.u32(checked_count(b.size()));
      w.raw(b);
      break;
    }
    case Tag::List: {
      const auto& l = value.as<List>();
      w.u32(checked_count(l.size()));
      for (const auto& item : l) encode_value(item, w);
      break;
    }
    case Tag::Map: {
      const auto& m = value.as<Map>();
      w.u32(checked_count(m.size()));
      for (const auto& [key, item] : m) {
        w.str(key);
        encode_value(item, w);
      }
      break;
    }
    case Tag::Struct: {
      const auto& s = value.as<Struct>();
      w.str(s.type_name);
      w.u32(checked_count(s.fields.size()));
      for (const auto& [name, item] : s.fields) {
        w.str(name);
        encode_value(item, w);
      }
      break;
    }
  }
}

WireValue decode_value(ByteReader& r, std::size_t depth) {
  if (depth > kMaxNestingDepth) throw Error(ErrorCode::NestingTooDeep, "at offset " + std::to_string(r.offset()));
  const auto tag_offset = r.offset();
  const auto tag = r.u8();
  switch (tag) {
    case 0x00: return Null{};
    case 0x01: {
      const auto b = r.u8();
      if (b > 1) throw Error(ErrorCode::UnknownTag, "bool byte " + std::to_string(b));
      return b == 1;
    }
    case 0x02: return r.i64();
    case 0x03: return r.f64();
    case 0x04: return r.str();
    case 0x05: {
      const auto n = r.u32();
      auto b = r.raw(n);
      return Bytes(b.begin(), b.end());
    }
    case 0x06: {
      const auto n = r.u32();
      List l;
      // Each element takes at least one byte; refuse counts the input cannot hold.
      if (n > r.remaining()) throw Error(ErrorCode::TruncatedInput, "list count " + std::to_string(n));
      l.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) l.push_back(decode_value(r, depth + 1));
      return l;
    }
    case 0x07: {
      const auto n = r.u32();
      Map m;
      for (std::uint32_t i = 0; i < n; ++i) {
        auto key = r.str();
        auto item = decode_value(r, depth + 1);
        m.insert_or_assign(std::move(key), std::move(item));
      }
      return m;
    }
    case 0x08: {
      Struct s;
      s.type_name = r.str();
      const auto n = r.u32();
      std::unordered_set<std::string> seen;
      for (std::uint32_t i = 0; i < n; ++i) {
        auto name = r.str();
        if (!seen.insert(name).second) throw Error(ErrorCode::InvalidStruct, "duplicate field " + name);
        auto item = decode_value(r, depth + 1);
        s.fields.emplace_back(std::move(name), std::move(item));
      }
      return s;
    }
    default:
      throw Error(ErrorCode::UnknownTag, fmt::format("tag {:#04x} at offset {}", tag, tag_offset));
  }
}

}  // namespace

void encode_into(const WireValue& value, ByteWriter& writer) { encode_value(value, writer); }

Bytes encode(const WireValue& value) {
  Bytes out;
  ByteWriter w(out);
  encode_value(value, w);
  return out;
}

WireValue decode_from(ByteReader& reader) { return decode_value(reader, 0); }

Decoded decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto v = decode_value(r, 0);
  return {std::move(v), r.offset()};
}

}  // namespace chanrt::wire
