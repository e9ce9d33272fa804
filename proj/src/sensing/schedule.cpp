#include "chanrt/sensing/schedule.hpp"

#include <charconv>

#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace chanrt::sensing {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_hour(std::string_view s) {
  s = trim(s);
  int h = -1;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), h);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidProperty, fmt::format("Schedule: bad hour '{}'", s));
  }
  return h;
}

}  // namespace

std::string_view to_string(LinkMode mode) noexcept {
  switch (mode) {
    case LinkMode::Cellular: return "Cellular";
    case LinkMode::WiFi: return "WiFi";
    case LinkMode::Disconnected: return "Disconnected";
  }
  return "?";
}

LinkMode parse_link_mode(std::string_view text) {
  text = trim(text);
  if (text == "Cellular") return LinkMode::Cellular;
  if (text == "WiFi" || text == "Wi-Fi") return LinkMode::WiFi;
  if (text == "Disconnected") return LinkMode::Disconnected;
  throw Error(ErrorCode::InvalidProperty, fmt::format("unknown link mode '{}'", text));
}

ConnectivitySchedule::ConnectivitySchedule(std::vector<ScheduleSegment> segments) : segments_(std::move(segments)) {
  int expect = 0;
  for (const auto& s : segments_) {
    if (s.start_hour != expect || s.end_hour <= s.start_hour) {
      throw Error(ErrorCode::InvalidProperty,
                  fmt::format("Schedule: segment {}-{} does not continue from hour {}", s.start_hour, s.end_hour, expect));
    }
    expect = s.end_hour;
  }
  if (expect != 24) throw Error(ErrorCode::InvalidProperty, "Schedule: segments must cover hours 0 to 24");
}

ConnectivitySchedule ConnectivitySchedule::field_protocol() {
  return ConnectivitySchedule({{0, 2, LinkMode::Cellular},
                               {2, 10, LinkMode::WiFi},
                               {10, 12, LinkMode::Disconnected},
                               {12, 18, LinkMode::Cellular},
                               {18, 20, LinkMode::Disconnected},
                               {20, 22, LinkMode::WiFi},
                               {22, 24, LinkMode::Cellular}});
}

ConnectivitySchedule ConnectivitySchedule::parse(std::string_view text) {
  std::vector<ScheduleSegment> out;
  while (!trim(text).empty()) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    const auto dash = item.find('-');
    const auto space = item.find(' ');
    if (dash == std::string_view::npos || space == std::string_view::npos || space < dash) {
      throw Error(ErrorCode::InvalidProperty, fmt::format("Schedule: expected 'start-end Mode', got '{}'", item));
    }
    out.push_back({parse_hour(item.substr(0, dash)), parse_hour(item.substr(dash + 1, space - dash - 1)),
                   parse_link_mode(item.substr(space + 1))});
  }
  return ConnectivitySchedule(std::move(out));
}

LinkMode ConnectivitySchedule::mode_at(std::int64_t virtual_ms, std::int64_t epoch_ms) const {
  auto in_day = (virtual_ms - epoch_ms) % kMsPerDay;
  if (in_day < 0) in_day += kMsPerDay;
  const auto hour = static_cast<int>(in_day / kMsPerHour);
  for (const auto& s : segments_) {
    if (hour < s.end_hour) return s.mode;
  }
  return segments_.back().mode;
}

std::vector<std::pair<std::int64_t, std::int64_t>> ConnectivitySchedule::outages(std::int64_t epoch_ms, int days) const {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (int d = 0; d < days; ++d) {
    const auto day = epoch_ms + d * kMsPerDay;
    for (const auto& s : segments_) {
      if (s.mode != LinkMode::Disconnected) continue;
      const auto start = day + s.start_hour * kMsPerHour;
      const auto end = day + s.end_hour * kMsPerHour;
      if (!out.empty() && out.back().second == start) {
        out.back().second = end;
      } else {
        out.emplace_back(start, end);
      }
    }
  }
  return out;
}

void ConnectivityScheduleModule::configure(const Properties& p) {
  if (p.has("Schedule")) schedule_ = ConnectivitySchedule::parse(p.string("Schedule"));
  output_ = p.string_or("Output", "ConnectivityData");
  mode_channel_ = p.string_or("ModeChannel", "LinkMode");
}

void ConnectivityScheduleModule::initialize() {
  sample_ = publish(output_, "String");
  mode_ = publish(mode_channel_, "String");
  epoch_ms_ = runtime().clock()->epoch_ms();
  register_periodic(kMsPerSecond, [this](std::int64_t at) {
    const auto mode = schedule_.mode_at(at, epoch_ms_);
    if (mode != last_) {
      last_ = mode;
      mode_.post(std::string(to_string(mode)), at);
    }
    sample_.post(std::string(to_string(mode)), at);
  });
}

void register_schedule_module(ModuleFactory& factory) {
  factory.add("ConnectivityScheduleModule", [] { return std::make_unique<ConnectivityScheduleModule>(); });
}

}  // namespace chanrt::sensing
