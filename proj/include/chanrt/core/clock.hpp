#pragma once

#include <chrono>
#include <cstdint>

namespace chanrt {

/// Scaled simulation clock. Virtual time is epoch milliseconds; it advances
/// `time_scale` virtual ms per real ms from a steady-clock origin.
///
/// A positive start delay places the origin in the future, so virtual time
/// reads slightly before the epoch until then; timers aligned to the epoch
/// then fire their first tick at exactly the epoch.
class VirtualClock {
 public:
  using SteadyClock = std::chrono::steady_clock;

  // 2023-01-01T00:00:00Z
  static constexpr std::int64_t kDefaultEpochMs = 1'672'531'200'000;

  explicit VirtualClock(double time_scale = 1.0, std::int64_t epoch_ms = kDefaultEpochMs,
                        std::chrono::milliseconds start_delay = std::chrono::milliseconds(0));

  [[nodiscard]] std::int64_t now_ms() const;
  [[nodiscard]] std::int64_t elapsed_ms() const { return now_ms() - epoch_ms_; }

  /// Real instant at which the clock reads `virtual_ms`.
  [[nodiscard]] SteadyClock::time_point real_time_of(std::int64_t virtual_ms) const;
  /// Real duration spanning `virtual_ms` of virtual time.
  [[nodiscard]] std::chrono::nanoseconds real_duration(std::int64_t virtual_ms) const;
  /// Virtual milliseconds elapsed over a real duration.
  [[nodiscard]] std::int64_t virtual_duration(std::chrono::nanoseconds real) const;

  [[nodiscard]] double time_scale() const noexcept { return time_scale_; }
  [[nodiscard]] std::int64_t epoch_ms() const noexcept { return epoch_ms_; }

 private:
  double time_scale_;
  std::int64_t epoch_ms_;
  SteadyClock::time_point origin_;
};

inline constexpr std::int64_t kMsPerSecond = 1000;
inline constexpr std::int64_t kMsPerMinute = 60 * kMsPerSecond;
inline constexpr std::int64_t kMsPerHour = 60 * kMsPerMinute;
inline constexpr std::int64_t kMsPerDay = 24 * kMsPerHour;

}  // namespace chanrt
