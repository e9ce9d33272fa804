#include "chanrt/core/runtime.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "chanrt/error.hpp"

namespace chanrt {

std::string_view to_string(ModuleState state) noexcept {
  switch (state) {
    case ModuleState::Created: return "Created";
    case ModuleState::Initialized: return "Initialized";
    case ModuleState::Running: return "Running";
    case ModuleState::Stopped: return "Stopped";
  }
  return "?";
}

// ---- ModuleFactory ---------------------------------------------------------

void ModuleFactory::add(std::string class_name, Creator creator) {
  creators_.insert_or_assign(std::move(class_name), std::move(creator));
}

bool ModuleFactory::contains(std::string_view class_name) const { return creators_.find(class_name) != creators_.end(); }

std::unique_ptr<Module> ModuleFactory::create(std::string_view class_name) const {
  auto it = creators_.find(class_name);
  if (it == creators_.end()) throw Error(ErrorCode::UnknownModuleClass, std::string(class_name));
  return it->second();
}

std::vector<std::string> ModuleFactory::class_names() const {
  std::vector<std::string> names;
  for (const auto& [name, _] : creators_) names.push_back(name);
  return names;
}

// ---- Publisher / Module ----------------------------------------------------

std::shared_ptr<const Envelope> Publisher::post(wire::WireValue value) {
  return runtime_->post(*state_, std::move(value), std::nullopt);
}

std::shared_ptr<const Envelope> Publisher::post(wire::WireValue value, std::int64_t timestamp_ms) {
  return runtime_->post(*state_, std::move(value), timestamp_ms);
}

const std::string& Publisher::channel() const { return state_->channel; }

std::uint64_t Publisher::next_sequence() const { return state_->next_sequence; }

const std::string& Module::instance_name() const {
  static const std::string unregistered;
  return slot_ ? slot_->instance_name : unregistered;
}

Publisher Module::publish(const std::string& channel, const std::string& type_name) {
  return runtime_->publish(*slot_, channel, type_name);
}

Subscription Module::subscribe(const std::string& channel, const std::string& type_name, EnvelopeCallback callback) {
  return runtime_->subscribe(*slot_, channel, type_name, std::move(callback));
}

TimerId Module::register_periodic(std::int64_t period_ms, TimerCallback callback) {
  return runtime_->add_timer(*slot_, PeriodicSpec{period_ms}, std::move(callback));
}

TimerId Module::register_scheduled(DailyTime time_of_day, TimerCallback callback) {
  return runtime_->add_timer(*slot_, time_of_day, std::move(callback));
}

void Module::cancel_timer(TimerId id) { runtime_->cancel_timer(id); }

void Module::defer(std::function<void()> task) { slot_->executor->post(std::move(task)); }

Runtime& Module::runtime() const { return *runtime_; }

std::int64_t Module::now_ms() const { return runtime_->now_ms(); }

// ---- Runtime ---------------------------------------------------------------

namespace {

std::shared_ptr<VirtualClock> make_clock(const RuntimeOptions& options) {
  if (options.clock) return options.clock;
  return std::make_shared<VirtualClock>(options.time_scale);
}

}  // namespace

Runtime::Runtime(RuntimeOptions options)
    : instance_id_(std::move(options.instance_id)),
      clock_(make_clock(options)),
      factory_(options.factory ? std::move(options.factory) : std::make_shared<ModuleFactory>()),
      timers_(clock_) {
  if (instance_id_.empty()) throw Error(ErrorCode::EmptyInstanceId);
}

Runtime::~Runtime() { stop(); }

std::unique_ptr<Runtime> create_runtime(const std::string& instance_id, double time_scale,
                                        std::shared_ptr<const ModuleFactory> factory) {
  RuntimeOptions options;
  options.instance_id = instance_id;
  options.time_scale = time_scale;
  options.factory = std::move(factory);
  return std::make_unique<Runtime>(std::move(options));
}

ModuleSlot& Runtime::find_slot(const std::string& instance_name) const {
  std::lock_guard lock(modules_mutex_);
  for (const auto& slot : modules_) {
    if (slot->instance_name == instance_name) return *slot;
  }
  throw Error(ErrorCode::UnknownModule, instance_name);
}

ModuleSlot& Runtime::insert_slot(const std::string& instance_name, const std::string& class_name,
                                 std::unique_ptr<Module> module, const Properties& properties) {
  std::lock_guard lock(modules_mutex_);
  for (const auto& slot : modules_) {
    if (slot->instance_name == instance_name) throw Error(ErrorCode::DuplicateInstanceName, instance_name);
  }
  auto slot = std::make_unique<ModuleSlot>();
  slot->instance_name = instance_name;
  slot->class_name = class_name;
  slot->properties = properties;
  slot->module = std::move(module);
  slot->module->runtime_ = this;
  slot->module->slot_ = slot.get();
  slot->executor = std::make_shared<SerialExecutor>(instance_id_ + "/" + instance_name);
  modules_.push_back(std::move(slot));
  return *modules_.back();
}

ModuleHandle Runtime::register_module(const std::string& class_name, const std::string& instance_name,
                                      const Properties& properties) {
  auto module = factory_->create(class_name);
  return add_module(instance_name, std::move(module), class_name, properties);
}

ModuleHandle Runtime::add_module(const std::string& instance_name, std::unique_ptr<Module> module,
                                 const std::string& class_name, const Properties& properties) {
  if (stopped_) throw std::logic_error("runtime stopped");
  // configure() runs before the slot exists so a rejected module leaves no trace.
  module->configure(properties);
  auto& slot = insert_slot(instance_name, class_name, std::move(module), properties);
  if (started_) {
    initialize_slot(slot);
    slot.state = ModuleState::Running;
  }
  return module_handle(instance_name);
}

void Runtime::initialize_slot(ModuleSlot& slot) {
  slot.executor->run_sync([&slot] { slot.module->initialize(); });
  slot.state = ModuleState::Initialized;
}

void Runtime::start() {
  if (started_.exchange(true)) return;
  std::vector<ModuleSlot*> slots;
  {
    std::lock_guard lock(modules_mutex_);
    for (auto& s : modules_) slots.push_back(s.get());
  }
  for (auto* slot : slots) initialize_slot(*slot);
  for (auto* slot : slots) slot->state = ModuleState::Running;
  timers_.start();
}

void Runtime::stop() {
  if (stopped_.exchange(true)) return;
  timers_.stop();
  std::vector<ModuleSlot*> slots;
  {
    std::lock_guard lock(modules_mutex_);
    for (auto& s : modules_) slots.push_back(s.get());
  }
  std::reverse(slots.begin(), slots.end());
  for (auto* slot : slots) {
    if (slot->state != ModuleState::Created) {
      try {
        slot->executor->run_sync([slot] { slot->module->terminate(); });
      } catch (const std::exception& e) {
        spdlog::error("[{}] terminate of {} failed: {}", instance_id_, slot->instance_name, e.what());
      }
    }
  }
  for (auto* slot : slots) {
    slot->executor->shutdown();
    slot->state = ModuleState::Stopped;
  }
  // Links may join their own threads on destruction; never do that under the lock.
  std::vector<std::shared_ptr<RemoteLink>> links;
  {
    std::lock_guard lock(channels_mutex_);
    links.swap(links_);
  }
}

void Runtime::run_until(std::int64_t virtual_ms) {
  timers_.set_horizon(virtual_ms);
  timers_.wait_horizon();
  wait_idle();
}

void Runtime::wait_idle() {
  std::vector<std::shared_ptr<SerialExecutor>> executors;
  {
    std::lock_guard lock(modules_mutex_);
    for (auto& s : modules_) executors.push_back(s->executor);
  }
  // Module callbacks feed each other; repeat until one pass sees nothing pending.
  for (;;) {
    for (auto& e : executors) {
      if (!e->in_executor_thread()) e->wait_idle();
    }
    bool quiet = true;
    for (auto& e : executors) {
      if (!e->in_executor_thread() && e->pending() != 0) quiet = false;
    }
    if (quiet) return;
  }
}

std::size_t Runtime::channel_count() const {
  std::lock_guard lock(channels_mutex_);
  return channels_.size();
}

std::optional<std::string> Runtime::channel_type(const std::string& channel) const {
  std::lock_guard lock(channels_mutex_);
  auto it = channels_.find(channel);
  if (it == channels_.end()) return std::nullopt;
  return it->second.type_name;
}

ChannelTable Runtime::table_locked() const {
  ChannelTable table;
  for (const auto& [name, state] : channels_) {
    if (state.publishers.empty() && state.subscribers.empty()) continue;
    table.push_back({name, !state.publishers.empty(), !state.subscribers.empty(), state.type_name});
  }
  return table;
}

ChannelTable Runtime::channel_table() const {
  std::lock_guard lock(channels_mutex_);
  return table_locked();
}

void Runtime::with_table(const std::function<void(const ChannelTable&)>& fn) const {
  std::lock_guard lock(channels_mutex_);
  fn(table_locked());
}

std::size_t Runtime::reach(const std::string& channel) const {
  std::lock_guard lock(channels_mutex_);
  std::size_t n = 0;
  if (auto it = channels_.find(channel); it != channels_.end()) n += it->second.subscribers.size();
  for (const auto& link : links_) {
    if (link->reaches(channel)) ++n;
  }
  return n;
}

ModuleHandle Runtime::module_handle(const std::string& instance_name) const {
  const auto& slot = find_slot(instance_name);
  return {slot.instance_name, slot.class_name, slot.state.load(), slot.properties};
}

std::vector<ModuleHandle> Runtime::modules() const {
  std::lock_guard lock(modules_mutex_);
  std::vector<ModuleHandle> out;
  for (const auto& slot : modules_) out.push_back({slot->instance_name, slot->class_name, slot->state.load(), slot->properties});
  return out;
}

Runtime::ChannelState& Runtime::channel_for(const std::string& channel, const std::string& type_name) {
  if (channel.empty()) throw std::invalid_argument("channel name must be non-empty");
  auto [it, inserted] = channels_.try_emplace(channel);
  if (type_name == kAnyType) return it->second;
  if (it->second.type_name.empty()) {
    it->second.type_name = type_name;
  } else if (it->second.type_name != type_name) {
    throw Error(ErrorCode::TypeConflict,
                "channel " + channel + " carries " + it->second.type_name + ", not " + type_name);
  }
  return it->second;
}

void Runtime::notify_table_locked() {
  if (links_.empty()) return;
  const auto table = table_locked();
  for (const auto& link : links_) link->local_table_changed(table);
}

Publisher Runtime::publish(ModuleSlot& owner, const std::string& channel, const std::string& type_name) {
  std::lock_guard lock(channels_mutex_);
  auto& state = channel_for(channel, type_name);
  auto pub = std::make_shared<PublisherState>();
  pub->channel = channel;
  pub->type_name = type_name;
  pub->owner = &owner;
  const bool first = state.publishers.empty();
  state.publishers.push_back(pub);
  if (first) notify_table_locked();
  return Publisher(this, std::move(pub));
}

Subscription Runtime::subscribe(ModuleSlot& owner, const std::string& channel, const std::string& type_name,
                                EnvelopeCallback callback) {
  std::lock_guard lock(channels_mutex_);
  auto& state = channel_for(channel, type_name);
  const auto id = next_subscriber_id_++;
  const bool first = state.subscribers.empty();
  state.subscribers.push_back({id, &owner, std::make_shared<EnvelopeCallback>(std::move(callback))});
  if (first) notify_table_locked();
  return Subscription(channel, id);
}

void Runtime::deliver_locked(const ChannelState& state, const std::shared_ptr<const Envelope>& envelope) {
  for (const auto& sub : state.subscribers) {
    sub.owner->executor->post([cb = sub.callback, envelope] { (*cb)(*envelope); });
  }
}

std::shared_ptr<const Envelope> Runtime::post(PublisherState& publisher, wire::WireValue value,
                                              std::optional<std::int64_t> timestamp_ms) {
  if (value.type_name() != publisher.type_name) {
    throw Error(ErrorCode::PayloadTypeMismatch,
                "channel " + publisher.channel + " expects " + publisher.type_name + ", got " + value.type_name());
  }
  std::lock_guard lock(channels_mutex_);
  const auto ts = timestamp_ms.value_or(clock_->now_ms());
  if (ts < publisher.last_timestamp) {
    if (timestamp_ms) throw Error(ErrorCode::NonMonotonicTimestamp, publisher.channel);
  }
  publisher.last_timestamp = std::max(publisher.last_timestamp, ts);
  auto envelope = std::make_shared<Envelope>();
  envelope->channel = publisher.channel;
  envelope->payload = std::move(value);
  envelope->type_name = publisher.type_name;
  envelope->sequence = publisher.next_sequence++;
  envelope->timestamp_ms = publisher.last_timestamp;
  envelope->origin_instance = instance_id_;
  std::shared_ptr<const Envelope> shared = std::move(envelope);
  deliver_locked(channels_.at(publisher.channel), shared);
  for (const auto& link : links_) link->forward(shared);
  return shared;
}

bool Runtime::inject(std::shared_ptr<const Envelope> envelope) {
  std::lock_guard lock(channels_mutex_);
  auto it = channels_.find(envelope->channel);
  if (it == channels_.end()) {
    spdlog::warn("[{}] dropping remote data for unknown channel {}", instance_id_, envelope->channel);
    return false;
  }
  if (!it->second.type_name.empty() && it->second.type_name != envelope->payload.type_name()) {
    spdlog::warn("[{}] dropping remote data on {}: type {} does not match {}", instance_id_, envelope->channel,
                 envelope->payload.type_name(), it->second.type_name);
    return false;
  }
  deliver_locked(it->second, envelope);
  return true;
}

TimerId Runtime::add_timer(ModuleSlot& owner, const TimerSpec& spec, TimerCallback callback) {
  const auto id = timers_.add(spec, owner.executor, std::move(callback));
  owner.timers.push_back(id);
  return id;
}

void Runtime::cancel_timer(TimerId id) { timers_.cancel(id); }

void Runtime::attach_link(const std::shared_ptr<RemoteLink>& link) {
  std::lock_guard lock(channels_mutex_);
  links_.push_back(link);
}

void Runtime::detach_link(const RemoteLink* link) {
  std::shared_ptr<RemoteLink> removed;
  std::lock_guard lock(channels_mutex_);
  for (auto it = links_.begin(); it != links_.end(); ++it) {
    if (it->get() == link) {
      removed = std::move(*it);
      links_.erase(it);
      break;
    }
  }
}

}  // namespace chanrt
