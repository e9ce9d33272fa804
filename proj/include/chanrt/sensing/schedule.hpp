#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chanrt/core/runtime.hpp"

namespace chanrt::sensing {

enum class LinkMode { Cellular, WiFi, Disconnected };

std::string_view to_string(LinkMode mode) noexcept;
/// Throws Error(InvalidProperty).
LinkMode parse_link_mode(std::string_view text);

struct ScheduleSegment {
  int start_hour = 0;
  int end_hour = 0;
  LinkMode mode = LinkMode::WiFi;
  friend bool operator==(const ScheduleSegment&, const ScheduleSegment&) = default;
};

/// Contiguous segments covering hours [0, 24) of each virtual day.
class ConnectivitySchedule {
 public:
  /// Throws Error(InvalidProperty) unless the segments are contiguous and
  /// cover [0, 24).
  explicit ConnectivitySchedule(std::vector<ScheduleSegment> segments);

  /// 00-02 Cellular, 02-10 WiFi, 10-12 Disconnected, 12-18 Cellular,
  /// 18-20 Disconnected, 20-22 WiFi, 22-24 Cellular.
  static ConnectivitySchedule field_protocol();
  /// "0-2 Cellular, 2-10 WiFi, ...".
  static ConnectivitySchedule parse(std::string_view text);

  [[nodiscard]] LinkMode mode_at(std::int64_t virtual_ms, std::int64_t epoch_ms) const;
  [[nodiscard]] const std::vector<ScheduleSegment>& segments() const noexcept { return segments_; }
  /// Virtual instants within [epoch, epoch + days) where the link goes down
  /// (first) or comes back (second).
  [[nodiscard]] std::vector<std::pair<std::int64_t, std::int64_t>> outages(std::int64_t epoch_ms, int days = 1) const;

 private:
  std::vector<ScheduleSegment> segments_;
};

/// Ticks at 1 Hz. Each tick posts the current mode as a String on Output
/// (default "ConnectivityData"), and posts it on ModeChannel (default
/// "LinkMode") on the first tick and whenever it changes. Properties:
/// Schedule (default field protocol), Output, ModeChannel.
class ConnectivityScheduleModule : public Module {
 public:
  void configure(const Properties& properties) override;
  void initialize() override;

  [[nodiscard]] const ConnectivitySchedule& schedule() const noexcept { return schedule_; }

 private:
  ConnectivitySchedule schedule_ = ConnectivitySchedule::field_protocol();
  std::string output_;
  std::string mode_channel_;
  Publisher sample_;
  Publisher mode_;
  std::optional<LinkMode> last_;
  std::int64_t epoch_ms_ = 0;
};

void register_schedule_module(ModuleFactory& factory);

}  // namespace chanrt::sensing
