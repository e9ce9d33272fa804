#include <doctest.h>

#include <bit>
#include <cmath>

#include "chanrt/error.hpp"
#include "chanrt/wire/codec.hpp"
#include "wire_gen.hpp"

using namespace chanrt;
using namespace chanrt::wire;

namespace {

// Independent IEEE-754 binary64 oracle for normal numbers: sign | biased
// exponent | 52-bit fraction, assembled from frexp rather than a bit cast.
std::uint64_t ieee754_bits(double x) {
  const std::uint64_t sign = std::signbit(x) ? 1 : 0;
  int exp = 0;
  const double frac = std::frexp(std::fabs(x), &exp);  // x = frac * 2^exp, frac in [0.5, 1)
  const auto biased = static_cast<std::uint64_t>(exp - 1 + 1023);
  const auto mantissa = static_cast<std::uint64_t>(std::ldexp(frac * 2.0 - 1.0, 52));
  return (sign << 63) | (biased << 52) | mantissa;
}

ErrorCode decode_error(const Bytes& bytes) {
  try {
    (void)decode(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode unexpectedly succeeded");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("bool encodes as tag and one byte") {
  CHECK(encode(WireValue(true)) == Bytes{0x01, 0x01});
  CHECK(encode(WireValue(false)) == Bytes{0x01, 0x00});
}

TEST_CASE("float 1.0 matches the IEEE-754 bit pattern") {
  const auto bits = ieee754_bits(1.0);
  CHECK(bits == 0x3FF0000000000000ULL);
  Bytes expected{0x03};
  for (int shift = 56; shift >= 0; shift -= 8) expected.push_back(static_cast<std::uint8_t>(bits >> shift));
  CHECK(encode(WireValue(1.0)) == expected);
  CHECK(expected == Bytes{0x03, 0x3F, 0xF0, 0, 0, 0, 0, 0, 0});
  for (double x : {-2.5, 1e-300, 123456.789}) {
    const auto b = encode(WireValue(x));
    std::uint64_t got = 0;
    for (int i = 1; i <= 8; ++i) got = (got << 8) | b[static_cast<std::size_t>(i)];
    CHECK(got == ieee754_bits(x));
  }
}

TEST_CASE("string encodes length then utf-8 bytes") {
  const std::string hi = "hi";
  Bytes expected{0x04, 0x00, 0x00, 0x00, static_cast<std::uint8_t>(hi.size())};
  for (unsigned char c : hi) expected.push_back(c);
  CHECK(encode(WireValue("hi")) == expected);
  CHECK(expected == Bytes{0x04, 0, 0, 0, 2, 0x68, 0x69});
}

TEST_CASE("integers are big-endian two's complement") {
  CHECK(encode(WireValue(std::int64_t{-2})) == Bytes{0x02, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFE});
  CHECK(encode(WireValue(Null{})) == Bytes{0x00});
}

TEST_CASE("map keys are written in byte order regardless of insertion order") {
  Map m;
  m.emplace("b", 1);
  m.emplace("a", 2);
  m.emplace("\xC3\xA9", 3);  // 0xC3 sorts after ASCII
  const auto bytes = encode(m);
  // 0x07, u32 count, u32 key length, then first key "a"
  CHECK(bytes[0] == 0x07);
  CHECK(bytes[9] == 'a');
  const auto back = decode(bytes).value.as<Map>();
  std::vector<std::string> keys;
  for (const auto& [k, _] : back) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"a", "b", "\xC3\xA9"});
}

TEST_CASE("struct round trip keeps type name and field order") {
  Struct s;
  s.type_name = "AudioChunk";
  s.add("rate", 16000);
  const WireValue v(s);
  const auto d = decode(encode(v));
  CHECK(d.value == v);
  CHECK(d.value.type_name() == "AudioChunk");
  CHECK(describe(d.value) == TypeDescriptor{"AudioChunk", {{"rate", Tag::Int}}});
}

TEST_CASE("decode errors") {
  CHECK(decode_error({0xFF, 0x00}) == ErrorCode::UnknownTag);
  CHECK(decode_error({0x04, 0x00, 0x00, 0x00, 0x05, 'h', 'i'}) == ErrorCode::TruncatedInput);
  CHECK(decode_error({}) == ErrorCode::TruncatedInput);
  CHECK(decode_error({0x04, 0, 0, 0, 2, 0xC0, 0x80}) == ErrorCode::InvalidUtf8);  // overlong NUL
  CHECK(decode_error({0x04, 0, 0, 0, 3, 0xED, 0xA0, 0x80}) == ErrorCode::InvalidUtf8);  // surrogate
  CHECK(decode_error({0x02, 0x00, 0x01}) == ErrorCode::TruncatedInput);
  // struct with a repeated field name
  Bytes dup{0x08, 0, 0, 0, 1, 'S', 0, 0, 0, 2, 0, 0, 0, 1, 'x', 0x00, 0, 0, 0, 1, 'x', 0x00};
  CHECK(decode_error(dup) == ErrorCode::InvalidStruct);
  // pathological nesting
  Bytes deep;
  for (int i = 0; i < 100; ++i) {
    deep.insert(deep.end(), {0x06, 0, 0, 0, 1});
  }
  deep.push_back(0x00);
  CHECK(decode_error(deep) == ErrorCode::NestingTooDeep);
}

TEST_CASE("nan payload survives and compares equal bitwise") {
  const double nan = std::bit_cast<double>(0x7FF800000000BEEFULL);
  const WireValue v(nan);
  const auto back = decode(encode(v)).value;
  CHECK(back == v);
  CHECK(std::bit_cast<std::uint64_t>(back.as<double>()) == 0x7FF800000000BEEFULL);
  CHECK(WireValue(0.0) != WireValue(-0.0));
}

TEST_CASE("property: round trip, determinism, prefix-freeness") {
  chanrt::testing::WireGen gen(0xC0FFEE);
  for (int i = 0; i < 2000; ++i) {
    const auto v = gen.value();
    const auto bytes = encode(v);
    CHECK(encode(v) == bytes);
    auto padded = bytes;
    const auto junk = gen.bytes();
    padded.insert(padded.end(), junk.begin(), junk.end());
    const auto d = decode(padded);
    REQUIRE(d.value == v);
    REQUIRE(d.consumed == bytes.size());
    CHECK(std::equal(junk.begin(), junk.end(), padded.begin() + static_cast<std::ptrdiff_t>(d.consumed)));
  }
}

TEST_CASE("property: every strict prefix of an encoding is rejected as truncated") {
  chanrt::testing::WireGen gen(7);
  for (int i = 0; i < 300; ++i) {
    const auto bytes = encode(gen.value());
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
      Bytes prefix(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
      REQUIRE(decode_error(prefix) == ErrorCode::TruncatedInput);
    }
  }
}
