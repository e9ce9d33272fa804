#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chanrt/sensing/sensors.hpp"

namespace chanrt::sensing {

namespace fs = std::filesystem;

/// One row of a rates file: which directory holds a sensor's records and how
/// often it samples.
struct RateEntry {
  std::string sensor_id;
  Rate rate;
  std::string channel;
  friend bool operator==(const RateEntry&, const RateEntry&) = default;
};

/// accel 20 Hz, battery 1/60 Hz, connectivity 1 Hz, location 1/20 Hz,
/// microphone chunks 1/10 Hz.
std::vector<RateEntry> phone_sensor_rates();
/// Chest strap accel 20 Hz, battery 1/60 Hz, heart rate 1/10 Hz, and core
/// temperature 1 Hz.
std::vector<RateEntry> wearable_sensor_rates();

/// CSV with header "sensor_id,rate_hz,channel"; rate_hz may be a fraction.
/// Throws Error(IoError) or Error(InvalidProperty).
std::vector<RateEntry> read_rates_csv(const fs::path& path);
std::string rates_csv(const std::vector<RateEntry>& rates);

/// Ticks of an epoch-aligned timer at `rate` falling inside hour `hour`.
std::uint64_t expected_samples(const Rate& rate, std::int64_t hour);

struct CoverageRow {
  std::string sensor_id;
  std::int64_t hour = 0;
  std::uint64_t expected = 0;
  std::uint64_t received = 0;
  double coverage_pct = 0;
};
using CoverageReport = std::vector<CoverageRow>;

using TimestampsBySensor = std::map<std::string, std::vector<std::int64_t>>;

/// Rows ordered by rate-table order, then hour. Samples outside
/// [epoch, epoch + hours) are ignored. Throws Error(UnknownSensorId) when a
/// sensor in `timestamps` has no rate entry.
CoverageReport coverage_report(const TimestampsBySensor& timestamps, const std::vector<RateEntry>& rates,
                               std::int64_t epoch_ms, std::int64_t hours);

/// Reads record timestamps from `<data_dir>/<channel>/` for every rate entry
/// (both minute files and chunk files).
TimestampsBySensor scan_timestamps(const fs::path& data_dir, const std::vector<RateEntry>& rates);

/// "sensor_id,hour,expected,received,coverage_pct".
std::string coverage_csv(const CoverageReport& report);

struct Arrival {
  std::string path;
  std::int64_t arrival_ms = 0;
  std::uint64_t record_count = 0;
};
/// Reads a receiver's arrivals log. Throws Error(IoError).
std::vector<Arrival> read_arrivals(const fs::path& path);

struct ArrivalPoint {
  std::string sensor_id;
  std::int64_t minute = 0;  // since epoch
  double cumulative_pct = 0;
};

/// Per sensor, the share of the run's expected samples that had arrived by
/// the end of each virtual minute, one point per minute from 0 through the
/// last arrival. A path counts toward the sensor whose channel is its first
/// component; a later arrival of the same path adds only records beyond the
/// largest count seen so far.
std::vector<ArrivalPoint> arrival_curve(const std::vector<Arrival>& arrivals, const std::vector<RateEntry>& rates,
                                        std::int64_t epoch_ms, std::int64_t hours);
/// "sensor_id,minute,cumulative_pct".
std::string arrival_csv(const std::vector<ArrivalPoint>& curve);

}  // namespace chanrt::sensing
