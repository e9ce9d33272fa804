#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chanrt/core/channel.hpp"
#include "chanrt/core/clock.hpp"
#include "chanrt/core/executor.hpp"
#include "chanrt/core/module.hpp"
#include "chanrt/core/properties.hpp"
#include "chanrt/core/timer.hpp"

namespace chanrt {

/// Maps module class names to constructors.
class ModuleFactory {
 public:
  using Creator = std::function<std::unique_ptr<Module>()>;

  void add(std::string class_name, Creator creator);
  [[nodiscard]] bool contains(std::string_view class_name) const;
  /// Throws Error(UnknownModuleClass).
  [[nodiscard]] std::unique_ptr<Module> create(std::string_view class_name) const;
  [[nodiscard]] std::vector<std::string> class_names() const;

 private:
  std::map<std::string, Creator, std::less<>> creators_;
};

struct ModuleHandle {
  std::string instance_name;
  std::string class_name;
  ModuleState state = ModuleState::Created;
  Properties properties;
};

struct RuntimeOptions {
  std::string instance_id;
  double time_scale = 1.0;
  /// Shared clock; when null the runtime makes its own from `time_scale`.
  std::shared_ptr<VirtualClock> clock;
  std::shared_ptr<const ModuleFactory> factory;
};

struct ModuleSlot {
  std::string instance_name;
  std::string class_name;
  Properties properties;
  std::unique_ptr<Module> module;
  std::shared_ptr<SerialExecutor> executor;
  std::atomic<ModuleState> state{ModuleState::Created};
  std::vector<TimerId> timers;
};

struct PublisherState {
  std::string channel;
  std::string type_name;
  ModuleSlot* owner = nullptr;
  std::uint64_t next_sequence = 0;
  std::int64_t last_timestamp = std::numeric_limits<std::int64_t>::min();
};

/// One middleware instance: a module set, its channel registry, a timer
/// service, and any attached remote links.
///
/// Thread-safe. `post` may be called from any thread; delivery to each
/// subscriber is asynchronous through the subscriber module's executor.
class Runtime {
 public:
  explicit Runtime(RuntimeOptions options);
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Factory registration + construction + configure(). Initialization runs
  /// at start(), or immediately when the runtime is already running.
  ModuleHandle register_module(const std::string& class_name, const std::string& instance_name,
                               const Properties& properties = {});
  /// Adds an already constructed module (no factory lookup).
  ModuleHandle add_module(const std::string& instance_name, std::unique_ptr<Module> module,
                          const std::string& class_name = "Custom", const Properties& properties = {});

  /// Initializes every module on its executor, then starts timers.
  void start();
  /// Cancels timers, terminates modules in reverse order, drains executors.
  void stop();

  /// Sets the timer horizon, waits until every tick due before it has run,
  /// then waits for module executors to go idle.
  void run_until(std::int64_t virtual_ms);
  /// Waits until all module executors are idle at the same time.
  void wait_idle();

  [[nodiscard]] const std::string& instance_id() const noexcept { return instance_id_; }
  [[nodiscard]] const std::shared_ptr<VirtualClock>& clock() const noexcept { return clock_; }
  [[nodiscard]] std::int64_t now_ms() const { return clock_->now_ms(); }
  [[nodiscard]] bool started() const noexcept { return started_; }

  [[nodiscard]] std::size_t channel_count() const;
  [[nodiscard]] std::optional<std::string> channel_type(const std::string& channel) const;
  [[nodiscard]] ChannelTable channel_table() const;
  /// Local subscribers plus connected peers with a subscriber.
  [[nodiscard]] std::size_t reach(const std::string& channel) const;

  [[nodiscard]] ModuleHandle module_handle(const std::string& instance_name) const;
  [[nodiscard]] std::vector<ModuleHandle> modules() const;
  template <typename T>
  [[nodiscard]] T* find_module(const std::string& instance_name) const {
    return dynamic_cast<T*>(find_slot(instance_name).module.get());
  }

  // Channel surface used by Module and Publisher.
  Publisher publish(ModuleSlot& owner, const std::string& channel, const std::string& type_name);
  Subscription subscribe(ModuleSlot& owner, const std::string& channel, const std::string& type_name,
                         EnvelopeCallback callback);
  std::shared_ptr<const Envelope> post(PublisherState& publisher, wire::WireValue value,
                                       std::optional<std::int64_t> timestamp_ms);
  TimerId add_timer(ModuleSlot& owner, const TimerSpec& spec, TimerCallback callback);
  void cancel_timer(TimerId id);

  /// Delivers a remotely received envelope to local subscribers only.
  /// Returns false (and drops it) when the channel is unknown locally or the
  /// payload type disagrees with the local channel type.
  bool inject(std::shared_ptr<const Envelope> envelope);

  /// Links receive every local post and every local table change.
  void attach_link(const std::shared_ptr<RemoteLink>& link);
  void detach_link(const RemoteLink* link);
  /// Calls `fn(table)` with the channel lock held; links use this to send a
  /// consistent handshake snapshot.
  void with_table(const std::function<void(const ChannelTable&)>& fn) const;

 private:
  struct Subscriber {
    std::uint64_t id = 0;
    ModuleSlot* owner = nullptr;
    std::shared_ptr<EnvelopeCallback> callback;
  };
  struct ChannelState {
    std::string type_name;
    std::vector<std::shared_ptr<PublisherState>> publishers;
    std::vector<Subscriber> subscribers;
  };

  ModuleSlot& find_slot(const std::string& instance_name) const;
  ModuleSlot& insert_slot(const std::string& instance_name, const std::string& class_name,
                          std::unique_ptr<Module> module, const Properties& properties);
  void initialize_slot(ModuleSlot& slot);
  ChannelState& channel_for(const std::string& channel, const std::string& type_name);
  ChannelTable table_locked() const;
  void notify_table_locked();
  void deliver_locked(const ChannelState& state, const std::shared_ptr<const Envelope>& envelope);

  std::string instance_id_;
  std::shared_ptr<VirtualClock> clock_;
  std::shared_ptr<const ModuleFactory> factory_;
  TimerService timers_;

  mutable std::mutex modules_mutex_;
  std::vector<std::unique_ptr<ModuleSlot>> modules_;

  mutable std::mutex channels_mutex_;
  std::map<std::string, ChannelState> channels_;
  std::vector<std::shared_ptr<RemoteLink>> links_;
  std::uint64_t next_subscriber_id_ = 1;

  std::atomic<bool> started_{false};
  std::atomic<bool> stopped_{false};
};

/// Convenience mirroring create_runtime(instance_id, time_scale).
/// Throws Error(EmptyInstanceId).
std::unique_ptr<Runtime> create_runtime(const std::string& instance_id, double time_scale = 1.0,
                                        std::shared_ptr<const ModuleFactory> factory = nullptr);

}  // namespace chanrt
