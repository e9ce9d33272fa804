#pragma once

#include <cstdint>
#include <vector>

#include "chanrt/wire/value.hpp"

namespace chanrt {

/// "AudioData" struct: sampling_rate, start_ms, duration_ms, samples
/// (float32 big-endian bytes).
wire::WireValue make_audio(std::int64_t sampling_rate, std::int64_t start_ms, std::int64_t duration_ms,
                           const std::vector<float>& samples);

struct AudioView {
  std::int64_t sampling_rate = 0;
  std::int64_t start_ms = 0;
  std::int64_t duration_ms = 0;
  std::vector<float> samples;
};

/// Throws Error(InvalidStruct) on a malformed AudioData value.
AudioView read_audio(const wire::WireValue& value);

}  // namespace chanrt
