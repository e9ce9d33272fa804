#include "chanrt/core/executor.hpp"

#include <exception>
#include <future>

#include <spdlog/spdlog.h>

namespace chanrt {

SerialExecutor::SerialExecutor(std::string name) : name_(std::move(name)) {
  thread_ = std::thread([this] { loop(); });
}

SerialExecutor::~SerialExecutor() { shutdown(); }

bool SerialExecutor::post(Task task) {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) return false;
    queue_.push_back(std::move(task));
  }
  wake_.notify_one();
  return true;
}

void SerialExecutor::run_sync(const Task& task) {
  if (in_executor_thread()) {
    task();
    return;
  }
  std::promise<void> done;
  auto result = done.get_future();
  const bool queued = post([&] {
    try {
      task();
      done.set_value();
    } catch (...) {
      done.set_exception(std::current_exception());
    }
  });
  if (!queued) throw std::runtime_error("executor " + name_ + " is shut down");
  result.get();
}

void SerialExecutor::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

void SerialExecutor::shutdown() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && !thread_.joinable()) return;
    stopping_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable() && std::this_thread::get_id() != thread_.get_id()) thread_.join();
}

std::size_t SerialExecutor::pending() const {
  std::lock_guard lock(mutex_);
  return queue_.size() + (busy_ ? 1 : 0);
}

bool SerialExecutor::in_executor_thread() const noexcept { return std::this_thread::get_id() == thread_.get_id(); }

void SerialExecutor::loop() {
  for (;;) {
    Task task;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) {
        idle_.notify_all();
        return;
      }
      task = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    try {
      task();
    } catch (const std::exception& e) {
      spdlog::error("[{}] callback threw: {}", name_, e.what());
    } catch (...) {
      spdlog::error("[{}] callback threw a non-standard exception", name_);
    }
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
      if (queue_.empty()) idle_.notify_all();
    }
  }
}

}  // namespace chanrt
