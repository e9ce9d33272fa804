#include "chanrt/core/clock.hpp"

#include <cmath>
#include <stdexcept>

namespace chanrt {

VirtualClock::VirtualClock(double time_scale, std::int64_t epoch_ms, std::chrono::milliseconds start_delay)
    : time_scale_(time_scale), epoch_ms_(epoch_ms), origin_(SteadyClock::now() + start_delay) {
  if (!(time_scale > 0.0) || !std::isfinite(time_scale)) throw std::invalid_argument("time_scale must be positive");
}

std::int64_t VirtualClock::now_ms() const { return epoch_ms_ + virtual_duration(SteadyClock::now() - origin_); }

std::int64_t VirtualClock::virtual_duration(std::chrono::nanoseconds real) const {
  const double ms = static_cast<double>(real.count()) * 1e-6 * time_scale_;
  return static_cast<std::int64_t>(std::floor(ms));
}

std::chrono::nanoseconds VirtualClock::real_duration(std::int64_t virtual_ms) const {
  return std::chrono::nanoseconds(static_cast<std::int64_t>(std::ceil(static_cast<double>(virtual_ms) * 1e6 / time_scale_)));
}

VirtualClock::SteadyClock::time_point VirtualClock::real_time_of(std::int64_t virtual_ms) const {
  return origin_ + real_duration(virtual_ms - epoch_ms_);
}

}  // namespace chanrt
