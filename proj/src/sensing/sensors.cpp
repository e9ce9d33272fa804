#include "chanrt/sensing/sensors.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "chanrt/error.hpp"
#include "chanrt/sensing/manifest.hpp"
#include "chanrt/wire/codec.hpp"

namespace chanrt::sensing {

namespace {

bool parse_int(std::string_view s, std::int64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

double unit(std::uint64_t& state) { return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

PayloadKind parse_kind(const std::string& s) {
  if (s == "Scalar") return PayloadKind::Scalar;
  if (s == "Vector3") return PayloadKind::Vector3;
  throw Error(ErrorCode::InvalidProperty, fmt::format("Kind: expected Scalar or Vector3, got '{}'", s));
}

}  // namespace

std::int64_t Rate::period_ms() const {
  if ((1000 * den) % num != 0) {
    throw Error(ErrorCode::InvalidProperty, fmt::format("rate {}/{} Hz has no whole-millisecond period", num, den));
  }
  return 1000 * den / num;
}

Rate parse_rate(std::string_view text) {
  const auto t = trim(text);
  Rate r;
  const auto slash = t.find('/');
  bool ok = false;
  if (slash != std::string_view::npos) {
    ok = parse_int(trim(t.substr(0, slash)), r.num) && parse_int(trim(t.substr(slash + 1)), r.den);
  } else if (const auto dot = t.find('.'); dot != std::string_view::npos) {
    // decimal: scale to an integer fraction
    std::int64_t whole = 0, frac = 0;
    const auto fdigits = t.substr(dot + 1);
    ok = (dot == 0 || parse_int(t.substr(0, dot), whole)) && !fdigits.empty() && fdigits.size() <= 9 &&
         parse_int(fdigits, frac);
    if (ok) {
      r.den = 1;
      for (std::size_t i = 0; i < fdigits.size(); ++i) r.den *= 10;
      r.num = whole * r.den + frac;
    }
  } else {
    ok = parse_int(t, r.num);
  }
  if (!ok || r.num <= 0 || r.den <= 0) throw Error(ErrorCode::InvalidProperty, fmt::format("bad rate '{}'", text));
  const auto g = std::gcd(r.num, r.den);
  r.num /= g;
  r.den /= g;
  return r;
}

std::string sensor_channel(const std::string& sensor_id) { return sensor_id + "Data"; }

std::uint64_t seed_for(const std::string& sensor_id) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(sensor_id.data()), sensor_id.size()));
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

wire::WireValue sensor_payload(const SensorSpec& spec, std::uint64_t tick_index, std::int64_t tick_ms) {
  std::uint64_t state = spec.seed ^ (tick_index * 0xd1342543de82ef95ULL);
  switch (spec.kind) {
    case PayloadKind::Scalar: {
      // slow drift plus noise, e.g. a battery level or a temperature
      const double phase = static_cast<double>(tick_index) / 5000.0;
      return 50.0 + 40.0 * std::sin(phase) + unit(state);
    }
    case PayloadKind::Vector3: {
      wire::Struct v;
      v.type_name = "Vector3";
      v.add("x", unit(state) * 2.0 - 1.0);
      v.add("y", unit(state) * 2.0 - 1.0);
      v.add("z", 9.81 + unit(state) * 0.2 - 0.1);
      return v;
    }
    case PayloadKind::AudioChunk: {
      const auto n = static_cast<std::size_t>(spec.sample_rate_hz * spec.chunk_ms / 1000);
      std::vector<float> samples(n);
      for (auto& s : samples) s = static_cast<float>(unit(state) * 0.02 - 0.01);
      return make_audio(spec.sample_rate_hz, tick_ms, spec.chunk_ms, samples);
    }
  }
  return {};
}

// ---- SimulatedSensorModule -------------------------------------------------

SimulatedSensorModule::SimulatedSensorModule(std::string sensor_id, std::string rate, PayloadKind kind)
    : default_rate_(std::move(rate)) {
  spec_.sensor_id = std::move(sensor_id);
  spec_.kind = kind;
}

void SimulatedSensorModule::configure(const Properties& p) {
  spec_.sensor_id = p.string_or("SensorId", spec_.sensor_id);
  if (spec_.sensor_id.empty()) throw Error(ErrorCode::InvalidProperty, "SensorId is required");
  if (p.has("Kind")) spec_.kind = parse_kind(p.string("Kind"));
  const auto rate_text = p.string_or("Rate", default_rate_);
  if (rate_text.empty()) throw Error(ErrorCode::InvalidProperty, "Rate is required");
  spec_.rate = parse_rate(rate_text);
  (void)spec_.rate.period_ms();
  spec_.seed = p.has("Seed") ? static_cast<std::uint64_t>(p.integer("Seed")) : seed_for(spec_.sensor_id);
  output_ = p.string_or("Output", sensor_channel(spec_.sensor_id));
}

void SimulatedSensorModule::initialize() {
  const auto type = spec_.kind == PayloadKind::Vector3 ? "Vector3" : "Float";
  publisher_ = publish(output_, type);
  epoch_ms_ = runtime().clock()->epoch_ms();
  const auto period = spec_.rate.period_ms();
  register_periodic(period, [this, period](std::int64_t at) {
    const auto tick = static_cast<std::uint64_t>((at - epoch_ms_) / period);
    publisher_.post(sensor_payload(spec_, tick, at), at);
    ++posted_;
  });
}

// ---- MicrophoneCollector ---------------------------------------------------

void MicrophoneCollector::configure(const Properties& p) {
  spec_.sensor_id = p.string_or("SensorId", "Microphone");
  spec_.kind = PayloadKind::AudioChunk;
  spec_.sample_rate_hz = p.integer_or("SamplingRate", 16000);
  if (spec_.sample_rate_hz <= 0) throw Error(ErrorCode::InvalidProperty, "SamplingRate must be positive");
  spec_.chunk_ms = p.duration_ms_or("ContinuousChunks", 6000);
  if (spec_.chunk_ms <= 0) throw Error(ErrorCode::InvalidProperty, "ContinuousChunks must be positive");
  spec_.rate = Rate{1000, spec_.chunk_ms};
  const auto g = std::gcd(spec_.rate.num, spec_.rate.den);
  spec_.rate.num /= g;
  spec_.rate.den /= g;
  const auto start = p.string_or("StartRecording", "Immediately");
  if (start != "Immediately") {
    throw Error(ErrorCode::InvalidProperty, fmt::format("StartRecording: only 'Immediately' is supported, got '{}'", start));
  }
  spec_.seed = p.has("Seed") ? static_cast<std::uint64_t>(p.integer("Seed")) : seed_for(spec_.sensor_id);
  output_ = p.string_or("Output", "AudioData");
}

void MicrophoneCollector::initialize() {
  publisher_ = publish(output_, "AudioData");
  epoch_ms_ = runtime().clock()->epoch_ms();
  register_periodic(spec_.chunk_ms, [this](std::int64_t at) {
    const auto tick = static_cast<std::uint64_t>((at - epoch_ms_) / spec_.chunk_ms);
    publisher_.post(sensor_payload(spec_, tick, at), at);
  });
}

void register_sensor_modules(ModuleFactory& factory) {
  factory.add("SimulatedSensor", [] { return std::make_unique<SimulatedSensorModule>(); });
  factory.add("MicrophoneCollector", [] { return std::make_unique<MicrophoneCollector>(); });
  struct Preset {
    const char* cls;
    const char* id;
    const char* rate;
    PayloadKind kind;
  };
  static constexpr Preset presets[] = {
      {"AccelerometerCollector", "Accelerometer", "20", PayloadKind::Vector3},
      {"BatteryCollector", "Battery", "1/60", PayloadKind::Scalar},
      {"LocationCollector", "Location", "1/20", PayloadKind::Vector3},
      {"HeartRateCollector", "HeartRate", "1/10", PayloadKind::Scalar},
      {"CoreTemperatureCollector", "CoreTemperature", "1", PayloadKind::Scalar},
      {"PolarAccelerometerCollector", "PolarAccelerometer", "20", PayloadKind::Vector3},
      {"PolarBatteryCollector", "PolarBattery", "1/60", PayloadKind::Scalar},
  };
  for (const auto& p : presets) {
    factory.add(p.cls, [p] { return std::make_unique<SimulatedSensorModule>(p.id, p.rate, p.kind); });
  }
}

}  // namespace chanrt::sensing
