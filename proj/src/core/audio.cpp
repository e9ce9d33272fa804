#include "chanrt/core/audio.hpp"

#include <bit>
#include <stdexcept>
#include <variant>

#include "chanrt/error.hpp"

namespace chanrt {

wire::WireValue make_audio(std::int64_t sampling_rate, std::int64_t start_ms, std::int64_t duration_ms,
                           const std::vector<float>& samples) {
  wire::Bytes bytes;
  bytes.reserve(samples.size() * 4);
  for (float f : samples) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    bytes.push_back(static_cast<std::uint8_t>(u >> 24));
    bytes.push_back(static_cast<std::uint8_t>(u >> 16));
    bytes.push_back(static_cast<std::uint8_t>(u >> 8));
    bytes.push_back(static_cast<std::uint8_t>(u));
  }
  wire::Struct s;
  s.type_name = "AudioData";
  s.add("sampling_rate", sampling_rate);
  s.add("start_ms", start_ms);
  s.add("duration_ms", duration_ms);
  s.add("samples", std::move(bytes));
  return s;
}

AudioView read_audio(const wire::WireValue& value) {
  if (!value.is<wire::Struct>() || value.as<wire::Struct>().type_name != "AudioData") {
    throw Error(ErrorCode::InvalidStruct, "expected AudioData, got " + value.type_name());
  }
  const auto& s = value.as<wire::Struct>();
  try {
    AudioView a;
    a.sampling_rate = s.at("sampling_rate").as<std::int64_t>();
    a.start_ms = s.at("start_ms").as<std::int64_t>();
    a.duration_ms = s.at("duration_ms").as<std::int64_t>();
    const auto& bytes = s.at("samples").as<wire::Bytes>();
    if (bytes.size() % 4 != 0) throw Error(ErrorCode::InvalidStruct, "AudioData samples not a multiple of 4 bytes");
    a.samples.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      const std::uint32_t u = (std::uint32_t{bytes[4 * i]} << 24) | (std::uint32_t{bytes[4 * i + 1]} << 16) |
                              (std::uint32_t{bytes[4 * i + 2]} << 8) | bytes[4 * i + 3];
      a.samples[i] = std::bit_cast<float>(u);
    }
    return a;
  } catch (const std::bad_variant_access&) {
    throw Error(ErrorCode::InvalidStruct, "AudioData field has the wrong type");
  } catch (const std::out_of_range&) {
    throw Error(ErrorCode::InvalidStruct, "AudioData is missing a field");
  }
}

}  // namespace chanrt
