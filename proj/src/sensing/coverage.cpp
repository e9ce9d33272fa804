#include "chanrt/sensing/coverage.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "chanrt/core/clock.hpp"
#include "chanrt/error.hpp"
#include "chanrt/sensing/records.hpp"

namespace chanrt::sensing {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string rate_text(const Rate& r) { return r.den == 1 ? fmt::format("{}", r.num) : fmt::format("{}/{}", r.num, r.den); }

const RateEntry& entry_for(const std::vector<RateEntry>& rates, const std::string& sensor_id) {
  for (const auto& r : rates) {
    if (r.sensor_id == sensor_id) return r;
  }
  throw Error(ErrorCode::UnknownSensorId, sensor_id);
}

}  // namespace

std::vector<RateEntry> phone_sensor_rates() {
  return {{"Accelerometer", {20, 1}, "AccelerometerData"},
          {"Battery", {1, 60}, "BatteryData"},
          {"Connectivity", {1, 1}, "ConnectivityData"},
          {"Location", {1, 20}, "LocationData"},
          {"Microphone", {1, 10}, "AudioData"}};
}

std::vector<RateEntry> wearable_sensor_rates() {
  return {{"PolarAccelerometer", {20, 1}, "PolarAccelerometerData"},
          {"PolarBattery", {1, 60}, "PolarBatteryData"},
          {"HeartRate", {1, 10}, "HeartRateData"},
          {"CoreTemperature", {1, 1}, "CoreTemperatureData"}};
}

std::vector<RateEntry> read_rates_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<RateEntry> out;
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (header) {
      header = false;
      if (!cells.empty() && cells[0] == "sensor_id") continue;
    }
    if (cells.size() != 3 || cells[0].empty() || cells[2].empty()) {
      throw Error(ErrorCode::InvalidProperty, fmt::format("{}:{}: expected sensor_id,rate_hz,channel", path.string(), line_no));
    }
    out.push_back({cells[0], parse_rate(cells[1]), cells[2]});
  }
  return out;
}

std::string rates_csv(const std::vector<RateEntry>& rates) {
  std::string out = "sensor_id,rate_hz,channel\n";
  for (const auto& r : rates) out += fmt::format("{},{},{}\n", r.sensor_id, rate_text(r.rate), r.channel);
  return out;
}

std::uint64_t expected_samples(const Rate& rate, std::int64_t hour) {
  // ticks k >= 0 with k * period in [hour * 1h, (hour + 1) * 1h)
  const auto period = rate.period_ms();
  const auto before = [period](std::int64_t t) { return t <= 0 ? 0 : (t + period - 1) / period; };
  return static_cast<std::uint64_t>(before((hour + 1) * kMsPerHour) - before(hour * kMsPerHour));
}

CoverageReport coverage_report(const TimestampsBySensor& timestamps, const std::vector<RateEntry>& rates,
                               std::int64_t epoch_ms, std::int64_t hours) {
  for (const auto& [sensor, _] : timestamps) (void)entry_for(rates, sensor);
  CoverageReport out;
  for (const auto& r : rates) {
    std::vector<std::uint64_t> received(static_cast<std::size_t>(std::max<std::int64_t>(hours, 0)), 0);
    if (auto it = timestamps.find(r.sensor_id); it != timestamps.end()) {
      for (const auto ts : it->second) {
        if (ts < epoch_ms) continue;
        const auto h = (ts - epoch_ms) / kMsPerHour;
        if (h < hours) ++received[static_cast<std::size_t>(h)];
      }
    }
    for (std::int64_t h = 0; h < hours; ++h) {
      CoverageRow row{r.sensor_id, h, expected_samples(r.rate, h), received[static_cast<std::size_t>(h)], 0.0};
      row.coverage_pct = row.expected == 0 ? 0.0 : 100.0 * static_cast<double>(row.received) / static_cast<double>(row.expected);
      out.push_back(std::move(row));
    }
  }
  return out;
}

TimestampsBySensor scan_timestamps(const fs::path& data_dir, const std::vector<RateEntry>& rates) {
  TimestampsBySensor out;
  for (const auto& r : rates) {
    auto& ts = out[r.sensor_id];
    const auto dir = data_dir / r.channel;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && (minute_of_file(name) || chunk_time(name))) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto more = record_timestamps(f);
      ts.insert(ts.end(), more.begin(), more.end());
    }
  }
  return out;
}

std::string coverage_csv(const CoverageReport& report) {
  std::string out = "sensor_id,hour,expected,received,coverage_pct\n";
  for (const auto& r : report) {
    out += fmt::format("{},{},{},{},{:.1f}\n", r.sensor_id, r.hour, r.expected, r.received, r.coverage_pct);
  }
  return out;
}

std::vector<Arrival> read_arrivals(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Arrival> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("path,", 0) == 0) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw Error(ErrorCode::IoError, fmt::format("{}: bad line '{}'", path.string(), line));
    out.push_back({cells[0], std::stoll(cells[1]), std::stoull(cells[2])});
  }
  return out;
}

std::vector<ArrivalPoint> arrival_curve(const std::vector<Arrival>& arrivals, const std::vector<RateEntry>& rates,
                                        std::int64_t epoch_ms, std::int64_t hours) {
  std::vector<ArrivalPoint> out;
  for (const auto& r : rates) {
    std::uint64_t total = 0;
    for (std::int64_t h = 0; h < hours; ++h) total += expected_samples(r.rate, h);
    const auto prefix = r.channel + "/";
    std::map<std::string, std::uint64_t> seen;
    std::map<std::int64_t, std::uint64_t> per_minute;
    for (const auto& a : arrivals) {
      if (a.path.rfind(prefix, 0) != 0) continue;
      auto& best = seen[a.path];
      if (a.record_count <= best) continue;
      per_minute[(a.arrival_ms - epoch_ms) / kMsPerMinute] += a.record_count - best;
      best = a.record_count;
    }
    if (per_minute.empty() || total == 0) continue;
    std::uint64_t cumulative = 0;
    auto it = per_minute.begin();
    for (std::int64_t m = std::min<std::int64_t>(0, it->first); m <= per_minute.rbegin()->first; ++m) {
      if (it != per_minute.end() && it->first == m) cumulative += (it++)->second;
      out.push_back({r.sensor_id, m, 100.0 * static_cast<double>(cumulative) / static_cast<double>(total)});
    }
  }
  return out;
}

std::string arrival_csv(const std::vector<ArrivalPoint>& curve) {
  std::string out = "sensor_id,minute,cumulative_pct\n";
  for (const auto& p : curve) out += fmt::format("{},{},{:.4f}\n", p.sensor_id, p.minute, p.cumulative_pct);
  return out;
}

}  // namespace chanrt::sensing
