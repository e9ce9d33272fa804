#include "chanrt/core/timer.hpp"

#include "chanrt/error.hpp"

namespace chanrt {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  auto q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t time_of_day_ms(const DailyTime& t) {
  return t.hour * kMsPerHour + t.minute * kMsPerMinute + t.second * kMsPerSecond;
}

}  // namespace

void validate(const TimerSpec& spec) {
  if (const auto* p = std::get_if<PeriodicSpec>(&spec)) {
    if (p->period_ms < 1) throw Error(ErrorCode::InvalidTimerSpec, "period must be >= 1 ms");
    return;
  }
  const auto& d = std::get<DailyTime>(spec);
  if (d.hour < 0 || d.hour >= 24 || d.minute < 0 || d.minute >= 60 || d.second < 0 || d.second >= 60) {
    throw Error(ErrorCode::InvalidTimerSpec, "time of day out of range");
  }
}

std::int64_t first_due(const TimerSpec& spec, std::int64_t now_ms, std::int64_t epoch_ms) {
  if (const auto* p = std::get_if<PeriodicSpec>(&spec)) {
    if (now_ms <= epoch_ms) return epoch_ms;
    const auto k = floor_div(now_ms - epoch_ms + p->period_ms - 1, p->period_ms);
    return epoch_ms + k * p->period_ms;
  }
  const auto day_start = floor_div(now_ms, kMsPerDay) * kMsPerDay;
  auto due = day_start + time_of_day_ms(std::get<DailyTime>(spec));
  if (due < now_ms) due += kMsPerDay;
  return due;
}

std::int64_t next_due(const TimerSpec& spec, std::int64_t due_ms) {
  if (const auto* p = std::get_if<PeriodicSpec>(&spec)) return due_ms + p->period_ms;
  return due_ms + kMsPerDay;
}

TimerService::TimerService(std::shared_ptr<const VirtualClock> clock) : clock_(std::move(clock)) {}

TimerService::~TimerService() { stop(); }

TimerId TimerService::add(const TimerSpec& spec, std::weak_ptr<SerialExecutor> executor, TimerCallback callback) {
  validate(spec);
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  const auto due = first_due(spec, clock_->now_ms(), clock_->epoch_ms());
  entries_.emplace(id, Entry{spec, std::move(executor), std::move(callback), due});
  schedule_.emplace(due, id);
  changed_.notify_all();
  return id;
}

void TimerService::cancel(TimerId id) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return;
  schedule_.erase({it->second.due, id});
  entries_.erase(it);
  changed_.notify_all();
}

void TimerService::start() {
  std::lock_guard lock(mutex_);
  if (started_) return;
  started_ = true;
  thread_ = std::thread([this] { loop(); });
}

void TimerService::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  changed_.notify_all();
  reached_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void TimerService::set_horizon(std::int64_t virtual_ms) {
  std::lock_guard lock(mutex_);
  horizon_ = virtual_ms;
  changed_.notify_all();
}

void TimerService::wait_horizon() {
  std::unique_lock lock(mutex_);
  reached_.wait(lock, [this] {
    if (stopping_) return true;
    const bool pending = !schedule_.empty() && schedule_.begin()->first < horizon_;
    return !pending && clock_->now_ms() >= horizon_;
  });
}

std::size_t TimerService::active() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void TimerService::loop() {
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    const bool has_work = !schedule_.empty() && schedule_.begin()->first < horizon_;
    if (!has_work) {
      // Wake at the horizon so waiters see the clock pass it.
      reached_.notify_all();
      if (horizon_ != std::numeric_limits<std::int64_t>::max() && clock_->now_ms() < horizon_) {
        changed_.wait_until(lock, clock_->real_time_of(horizon_));
      } else {
        changed_.wait(lock);
      }
      continue;
    }
    const auto [due, id] = *schedule_.begin();
    const auto when = clock_->real_time_of(due);
    if (VirtualClock::SteadyClock::now() < when) {
      changed_.wait_until(lock, when);
      continue;
    }
    schedule_.erase(schedule_.begin());
    auto& entry = entries_.at(id);
    auto executor = entry.executor.lock();
    if (!executor) {
      entries_.erase(id);
      continue;
    }
    entry.due = next_due(entry.spec, due);
    schedule_.emplace(entry.due, id);
    // Posting never blocks on the executor, so holding the lock is fine.
    executor->post([cb = entry.callback, due] { cb(due); });
  }
}

}  // namespace chanrt
