#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

namespace chanrt {

/// Runs posted tasks one at a time, in post order, on a dedicated thread.
/// Every module owns one, which is what serializes its callbacks.
class SerialExecutor {
 public:
  using Task = std::function<void()>;

  explicit SerialExecutor(std::string name);
  ~SerialExecutor();

  SerialExecutor(const SerialExecutor&) = delete;
  SerialExecutor& operator=(const SerialExecutor&) = delete;

  /// Returns false once shut down; the task is dropped in that case.
  bool post(Task task);

  /// Runs `task` on the executor and waits for it. Runs inline when called
  /// from the executor thread itself. Exceptions propagate to the caller.
  void run_sync(const Task& task);

  /// Blocks until the queue is empty and no task is running.
  void wait_idle();

  /// Finishes queued tasks, then joins.
  void shutdown();

  [[nodiscard]] std::size_t pending() const;
  [[nodiscard]] bool in_executor_thread() const noexcept;
  [[nodiscard]] const std::string& name() const noexcept { return name_; }

 private:
  void loop();

  std::string name_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<Task> queue_;
  bool stopping_ = false;
  bool busy_ = false;
  std::thread thread_;
};

}  // namespace chanrt
