#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <variant>

#include "chanrt/core/clock.hpp"
#include "chanrt/core/executor.hpp"

namespace chanrt {

struct PeriodicSpec {
  std::int64_t period_ms = 0;
};

struct DailyTime {
  int hour = 0;
  int minute = 0;
  int second = 0;
};

using TimerSpec = std::variant<PeriodicSpec, DailyTime>;

/// Throws Error(InvalidTimerSpec) for period < 1 or an out-of-range time of day.
void validate(const TimerSpec& spec);

/// First due instant at or after `now_ms`. Periodic timers are phase-aligned
/// to the clock epoch (due at epoch + k*period, k >= 0); daily timers fire at
/// the given UTC time of day.
std::int64_t first_due(const TimerSpec& spec, std::int64_t now_ms, std::int64_t epoch_ms);
std::int64_t next_due(const TimerSpec& spec, std::int64_t due_ms);

using TimerId = std::uint64_t;
/// Receives the scheduled virtual time of the tick, not the dispatch time.
using TimerCallback = std::function<void(std::int64_t scheduled_ms)>;

/// Dispatches timer ticks onto executors at virtual-clock deadlines.
///
/// Ticks are never skipped: when dispatch falls behind, every overdue tick is
/// posted in order. A horizon bounds the run; ticks due at or after it are held.
class TimerService {
 public:
  explicit TimerService(std::shared_ptr<const VirtualClock> clock);
  ~TimerService();

  TimerId add(const TimerSpec& spec, std::weak_ptr<SerialExecutor> executor, TimerCallback callback);
  void cancel(TimerId id);

  void start();
  void stop();

  void set_horizon(std::int64_t virtual_ms);
  /// Blocks until every tick due before the horizon has been posted.
  void wait_horizon();

  [[nodiscard]] std::size_t active() const;

 private:
  struct Entry {
    TimerSpec spec;
    std::weak_ptr<SerialExecutor> executor;
    TimerCallback callback;
    std::int64_t due = 0;
  };

  void loop();

  std::shared_ptr<const VirtualClock> clock_;
  mutable std::mutex mutex_;
  std::condition_variable changed_;
  std::condition_variable reached_;
  std::unordered_map<TimerId, Entry> entries_;
  std::set<std::pair<std::int64_t, TimerId>> schedule_;
  TimerId next_id_ = 1;
  std::int64_t horizon_ = std::numeric_limits<std::int64_t>::max();
  bool started_ = false;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace chanrt
