#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "chanrt/core/channel.hpp"
#include "chanrt/core/properties.hpp"
#include "chanrt/core/timer.hpp"

namespace chanrt {

class Runtime;
struct ModuleSlot;
struct PublisherState;

enum class ModuleState { Created, Initialized, Running, Stopped };

std::string_view to_string(ModuleState state) noexcept;

/// Posting end of a channel registration. Cheap to copy; all copies share
/// one sequence counter.
class Publisher {
 public:
  Publisher() = default;

  std::shared_ptr<const Envelope> post(wire::WireValue value);
  /// Explicit timestamp; must not go backwards for this publisher.
  std::shared_ptr<const Envelope> post(wire::WireValue value, std::int64_t timestamp_ms);

  [[nodiscard]] bool valid() const noexcept { return state_ != nullptr; }
  [[nodiscard]] const std::string& channel() const;
  [[nodiscard]] std::uint64_t next_sequence() const;

 private:
  friend class Runtime;
  Publisher(Runtime* runtime, std::shared_ptr<PublisherState> state) : runtime_(runtime), state_(std::move(state)) {}

  Runtime* runtime_ = nullptr;
  std::shared_ptr<PublisherState> state_;
};

class Subscription {
 public:
  Subscription() = default;
  [[nodiscard]] bool valid() const noexcept { return id_ != 0; }
  [[nodiscard]] const std::string& channel() const noexcept { return channel_; }

 private:
  friend class Runtime;
  Subscription(std::string channel, std::uint64_t id) : channel_(std::move(channel)), id_(id) {}

  std::string channel_;
  std::uint64_t id_ = 0;
};

/// Base class of every processing unit. A module talks to the rest of the
/// system only through channels and timers; all of its callbacks run on its
/// own serial executor.
class Module {
 public:
  virtual ~Module() = default;

  /// Called at load time, before the runtime starts. Parse and validate
  /// properties here; throw Error(InvalidProperty) to reject them.
  virtual void configure(const Properties& properties) { (void)properties; }
  /// Called exactly once, on the module's executor, before any callback.
  virtual void initialize() = 0;
  virtual void terminate() {}

  /// Empty until the runtime has registered the module (so also inside configure()).
  [[nodiscard]] const std::string& instance_name() const;

 protected:
  Publisher publish(const std::string& channel, const std::string& type_name);
  Subscription subscribe(const std::string& channel, const std::string& type_name, EnvelopeCallback callback);
  TimerId register_periodic(std::int64_t period_ms, TimerCallback callback);
  TimerId register_scheduled(DailyTime time_of_day, TimerCallback callback);
  void cancel_timer(TimerId id);
  /// Queue work on this module's executor.
  void defer(std::function<void()> task);

  [[nodiscard]] Runtime& runtime() const;
  [[nodiscard]] std::int64_t now_ms() const;

 private:
  friend class Runtime;
  Runtime* runtime_ = nullptr;
  ModuleSlot* slot_ = nullptr;
};

}  // namespace chanrt
