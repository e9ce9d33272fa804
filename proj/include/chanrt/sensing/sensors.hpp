#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chanrt/core/audio.hpp"
#include "chanrt/core/runtime.hpp"

namespace chanrt::sensing {

/// Positive rational rate in Hz.
struct Rate {
  std::int64_t num = 1;
  std::int64_t den = 1;

  [[nodiscard]] double hz() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  /// Throws Error(InvalidProperty) unless 1000·den/num is a whole number of ms.
  [[nodiscard]] std::int64_t period_ms() const;
  friend bool operator==(const Rate&, const Rate&) = default;
};

/// "20", "1/60", "0.5". Throws Error(InvalidProperty).
Rate parse_rate(std::string_view text);

enum class PayloadKind { Scalar, Vector3, AudioChunk };

struct SensorSpec {
  std::string sensor_id;
  Rate rate;
  PayloadKind kind = PayloadKind::Scalar;
  std::int64_t sample_rate_hz = 0;  // AudioChunk only
  std::int64_t chunk_ms = 0;        // AudioChunk only
  std::uint64_t seed = 0;
};

std::string sensor_channel(const std::string& sensor_id);
std::uint64_t seed_for(const std::string& sensor_id);

/// SplitMix64 step; the generator behind every simulated payload.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic in (spec.seed, tick_index).
wire::WireValue sensor_payload(const SensorSpec& spec, std::uint64_t tick_index, std::int64_t tick_ms);

/// Periodic simulated sensor. Properties: SensorId, Rate, Kind
/// (Scalar|Vector3), Seed, Output (default "<SensorId>Data").
class SimulatedSensorModule : public Module {
 public:
  SimulatedSensorModule() = default;
  SimulatedSensorModule(std::string sensor_id, std::string rate, PayloadKind kind);

  void configure(const Properties& properties) override;
  void initialize() override;

  [[nodiscard]] const SensorSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] std::uint64_t posted() const noexcept { return posted_; }

 private:
  SensorSpec spec_;
  std::string default_rate_;
  std::string output_;
  std::int64_t epoch_ms_ = 0;
  Publisher publisher_;
  std::uint64_t posted_ = 0;
};

/// Simulated microphone posting back-to-back chunks. Properties:
/// SamplingRate (Hz, default 16000), ContinuousChunks (default 6s), Output
/// (default AudioData), StartRecording (only "Immediately"), Seed. Encoding,
/// EncodingBitrate, Channels and FileFormat are accepted and ignored.
class MicrophoneCollector : public Module {
 public:
  void configure(const Properties& properties) override;
  void initialize() override;
  [[nodiscard]] const SensorSpec& spec() const noexcept { return spec_; }

 private:
  SensorSpec spec_;
  std::string output_;
  std::int64_t epoch_ms_ = 0;
  Publisher publisher_;
};

/// Registers SimulatedSensor, MicrophoneCollector and the named presets
/// (AccelerometerCollector, BatteryCollector, LocationCollector,
/// HeartRateCollector, CoreTemperatureCollector, PolarAccelerometerCollector,
/// PolarBatteryCollector).
void register_sensor_modules(ModuleFactory& factory);

}  // namespace chanrt::sensing
