#include <doctest.h>

#include <atomic>
#include <map>
#include <random>
#include <thread>

#include "chanrt/error.hpp"
#include "chanrt/core/runtime.hpp"
#include "test_modules.hpp"

using namespace chanrt;
using chanrt::testing::lambda_module;
using chanrt::testing::LambdaModule;

namespace {

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

// Spin until `pred` holds or a generous deadline passes.
template <typename P>
bool eventually(P pred, std::chrono::milliseconds limit = std::chrono::milliseconds(5000)) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return pred();
}

class CountingModule : public Module {
 public:
  void initialize() override { ++initialized; }
  std::atomic<int> initialized{0};
};

std::shared_ptr<ModuleFactory> factory_with_counting() {
  auto f = std::make_shared<ModuleFactory>();
  f->add("MicrophoneCollector", [] { return std::make_unique<CountingModule>(); });
  return f;
}

}  // namespace

TEST_CASE("create_runtime") {
  auto rt = create_runtime("edge", 1.0);
  CHECK(rt->instance_id() == "edge");
  CHECK(rt->channel_count() == 0);
  CHECK(error_of([] { (void)create_runtime("", 1.0); }) == ErrorCode::EmptyInstanceId);
}

TEST_CASE("time scale 60 advances the virtual clock 60 ms per real ms") {
  VirtualClock clock(60.0);
  const auto v0 = clock.now_ms();
  const auto r0 = std::chrono::steady_clock::now();
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  const auto v1 = clock.now_ms();
  const auto real_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - r0).count();
  CHECK(static_cast<double>(v1 - v0) == doctest::Approx(60.0 * real_ms).epsilon(0.05));
  CHECK(clock.real_duration(6000) == std::chrono::milliseconds(100));
}

TEST_CASE("register_module") {
  auto rt = create_runtime("edge", 1.0, factory_with_counting());
  PropertyMap props{{"SamplingRate", "16000"}};
  auto handle = rt->register_module("MicrophoneCollector", "mic1", Properties(props));
  CHECK(handle.class_name == "MicrophoneCollector");
  CHECK(handle.state == ModuleState::Created);
  CHECK(handle.properties.string("SamplingRate") == "16000");

  CHECK(error_of([&] { rt->register_module("NoSuchModule", "x"); }) == ErrorCode::UnknownModuleClass);
  CHECK(error_of([&] { rt->register_module("MicrophoneCollector", "mic1"); }) == ErrorCode::DuplicateInstanceName);

  rt->start();
  auto* mic = rt->find_module<CountingModule>("mic1");
  REQUIRE(mic != nullptr);
  CHECK(mic->initialized == 1);
  CHECK(rt->module_handle("mic1").state == ModuleState::Running);
  rt->stop();
  CHECK(mic->initialized == 1);
  CHECK(rt->module_handle("mic1").state == ModuleState::Stopped);
}

TEST_CASE("publish / subscribe / post") {
  auto rt = create_runtime("edge");
  std::vector<std::string> received_a, received_b;
  std::mutex m;
  Publisher pub;
  rt->add_module("sender", lambda_module([&](LambdaModule& self) { pub = self.publish("DataChannel", "String"); }));
  rt->add_module("a", lambda_module([&](LambdaModule& self) {
    self.subscribe("DataChannel", "String", [&](const Envelope& e) {
      std::lock_guard l(m);
      received_a.push_back(e.payload.as<std::string>());
    });
  }));
  rt->add_module("b", lambda_module([&](LambdaModule& self) {
    self.subscribe("DataChannel", "String", [&](const Envelope& e) {
      std::lock_guard l(m);
      received_b.push_back(e.payload.as<std::string>());
    });
  }));
  rt->start();

  CHECK(pub.next_sequence() == 0);
  auto e0 = pub.post("Hello World");
  auto e1 = pub.post("second");
  auto e2 = pub.post("third");
  CHECK(e0->sequence == 0);
  CHECK(e1->sequence == 1);
  CHECK(e2->sequence == 2);
  CHECK(e0->origin_instance == "edge");
  rt->wait_idle();
  CHECK(received_a == std::vector<std::string>{"Hello World", "second", "third"});
  CHECK(received_b == received_a);

  CHECK(error_of([&] { pub.post(1.5); }) == ErrorCode::PayloadTypeMismatch);
  CHECK(error_of([&] { pub.post("late", e2->timestamp_ms - 1); }) == ErrorCode::NonMonotonicTimestamp);
  CHECK(rt->channel_count() == 1);
  CHECK(rt->channel_table() == ChannelTable{{"DataChannel", true, true, "String"}});
}

TEST_CASE("channel typing and multi-publisher channels") {
  auto rt = create_runtime("edge");
  rt->start();
  int deliveries = 0;
  Publisher p1, p2;
  rt->add_module("lonely", lambda_module([&](LambdaModule& self) {
    self.subscribe("Nobody", "Int", [&](const Envelope&) { ++deliveries; });
  }));
  rt->add_module("m1", lambda_module([&](LambdaModule& self) { p1 = self.publish("C", "String"); }));
  rt->add_module("m2", lambda_module([&](LambdaModule& self) {
    p2 = self.publish("C", "String");
    CHECK(error_of([&] { self.publish("C", "Float"); }) == ErrorCode::TypeConflict);
    CHECK(error_of([&] { self.subscribe("C", "Float", [](const Envelope&) {}); }) == ErrorCode::TypeConflict);
  }));
  CHECK(p1.post("x")->sequence == 0);
  CHECK(p1.post("y")->sequence == 1);
  CHECK(p2.post("z")->sequence == 0);
  rt->wait_idle();
  CHECK(deliveries == 0);
}

TEST_CASE("untyped subscribers accept any type without fixing the channel") {
  auto rt = create_runtime("edge");
  rt->start();
  std::vector<std::string> seen;
  rt->add_module("any", lambda_module([&](LambdaModule& self) {
    self.subscribe("Mixed", kAnyType, [&](const Envelope& e) { seen.push_back(e.type_name); });
  }));
  CHECK(rt->channel_type("Mixed") == std::string{});
  Publisher pub;
  rt->add_module("p", lambda_module([&](LambdaModule& self) { pub = self.publish("Mixed", "Float"); }));
  CHECK(rt->channel_type("Mixed") == "Float");
  pub.post(1.5);
  CHECK(error_of([&] { pub.post(1); }) == ErrorCode::PayloadTypeMismatch);
  rt->wait_idle();
  CHECK(seen == std::vector<std::string>{"Float"});
}

TEST_CASE("late subscribers see no replay") {
  auto rt = create_runtime("edge");
  rt->start();
  Publisher pub;
  rt->add_module("p", lambda_module([&](LambdaModule& self) { pub = self.publish("X", "Int"); }));
  pub.post(1);
  std::vector<std::int64_t> got;
  rt->add_module("s", lambda_module([&](LambdaModule& self) {
    self.subscribe("X", "Int", [&](const Envelope& e) { got.push_back(e.payload.as<std::int64_t>()); });
  }));
  pub.post(2);
  rt->wait_idle();
  CHECK(got == std::vector<std::int64_t>{2});
}

TEST_CASE("periodic timer fires every 500 ms") {
  auto clock = std::make_shared<VirtualClock>(100.0, VirtualClock::kDefaultEpochMs, std::chrono::milliseconds(20));
  RuntimeOptions opts;
  opts.instance_id = "edge";
  opts.clock = clock;
  Runtime rt(opts);
  std::vector<std::int64_t> ticks;
  rt.add_module("t", lambda_module([&](LambdaModule& self) {
    self.register_periodic(500, [&](std::int64_t at) { ticks.push_back(at); });
  }));
  rt.start();
  rt.run_until(clock->epoch_ms() + 5000);
  CHECK(ticks.size() >= 9);
  CHECK(ticks.size() <= 11);
  CHECK(ticks.size() == 10);  // epoch-aligned start gives exactly 10
  for (std::size_t i = 0; i < ticks.size(); ++i) CHECK(ticks[i] == clock->epoch_ms() + static_cast<std::int64_t>(i) * 500);
}

TEST_CASE("scheduled timer fires once when crossing 13:37:00") {
  const std::int64_t day = VirtualClock::kDefaultEpochMs;
  const std::int64_t start = day + 13 * kMsPerHour + 36 * kMsPerMinute + 50 * kMsPerSecond;
  auto clock = std::make_shared<VirtualClock>(1000.0, start);
  RuntimeOptions opts;
  opts.instance_id = "edge";
  opts.clock = clock;
  Runtime rt(opts);
  std::vector<std::int64_t> fired;
  rt.add_module("t", lambda_module([&](LambdaModule& self) {
    self.register_scheduled({13, 37, 0}, [&](std::int64_t at) { fired.push_back(at); });
  }));
  rt.start();
  rt.run_until(start + 40 * kMsPerSecond);
  REQUIRE(fired.size() == 1);
  CHECK(fired[0] == day + 13 * kMsPerHour + 37 * kMsPerMinute);
}

TEST_CASE("invalid timer specs") {
  CHECK(error_of([] { validate(PeriodicSpec{0}); }) == ErrorCode::InvalidTimerSpec);
  CHECK(error_of([] { validate(DailyTime{24, 0, 0}); }) == ErrorCode::InvalidTimerSpec);
  CHECK(error_of([] { validate(DailyTime{0, 60, 0}); }) == ErrorCode::InvalidTimerSpec);
  CHECK(error_of([] { validate(DailyTime{0, 0, -1}); }) == ErrorCode::InvalidTimerSpec);
  auto rt = create_runtime("edge");
  rt->start();
  bool threw = false;
  rt->add_module("t", lambda_module([&](LambdaModule& self) {
    threw = error_of([&] { self.register_periodic(0, [](std::int64_t) {}); }) == ErrorCode::InvalidTimerSpec;
  }));
  CHECK(threw);
}

TEST_CASE("first_due alignment") {
  const std::int64_t epoch = 1'000'000;
  CHECK(first_due(PeriodicSpec{50}, epoch - 10, epoch) == epoch);
  CHECK(first_due(PeriodicSpec{50}, epoch, epoch) == epoch);
  CHECK(first_due(PeriodicSpec{50}, epoch + 1, epoch) == epoch + 50);
  CHECK(first_due(PeriodicSpec{50}, epoch + 50, epoch) == epoch + 50);
  CHECK(first_due(DailyTime{0, 0, 0}, 0, 0) == 0);
  CHECK(first_due(DailyTime{0, 0, 0}, 1, 0) == kMsPerDay);
}

TEST_CASE("property: timer count is floor(D/p) within one") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const std::int64_t period = std::uniform_int_distribution<std::int64_t>(7, 400)(rng);
    const std::int64_t duration = std::uniform_int_distribution<std::int64_t>(500, 4000)(rng);
    auto clock = std::make_shared<VirtualClock>(50.0, VirtualClock::kDefaultEpochMs, std::chrono::milliseconds(10));
    RuntimeOptions opts;
    opts.instance_id = "t";
    opts.clock = clock;
    Runtime rt(opts);
    std::atomic<std::int64_t> count{0};
    rt.add_module("t", lambda_module([&](LambdaModule& self) { self.register_periodic(period, [&](std::int64_t) { ++count; }); }));
    rt.start();
    rt.run_until(clock->epoch_ms() + duration);
    const auto expected = duration / period;
    CHECK(std::llabs(count.load() - expected) <= 1);
  }
}

TEST_CASE("property: per-publisher FIFO and fan-out under concurrent posting") {
  auto rt = create_runtime("edge");
  constexpr int kPublishers = 4;
  constexpr int kPosts = 500;
  std::vector<Publisher> pubs(kPublishers);
  std::mutex m;
  std::map<std::string, std::map<std::int64_t, std::vector<std::int64_t>>> seen;  // subscriber -> publisher -> values
  for (int i = 0; i < kPublishers; ++i) {
    rt->add_module("p" + std::to_string(i), lambda_module([&, i](LambdaModule& self) { pubs[static_cast<std::size_t>(i)] = self.publish("Shared", "List"); }));
  }
  for (const char* name : {"s1", "s2", "s3"}) {
    rt->add_module(name, lambda_module([&, name](LambdaModule& self) {
      self.subscribe("Shared", "List", [&, name](const Envelope& e) {
        const auto& l = e.payload.as<wire::List>();
        std::lock_guard lock(m);
        seen[name][l[0].as<std::int64_t>()].push_back(l[1].as<std::int64_t>());
      });
    }));
  }
  rt->start();
  std::vector<std::thread> threads;
  for (int i = 0; i < kPublishers; ++i) {
    threads.emplace_back([&, i] {
      for (int k = 0; k < kPosts; ++k) {
        auto e = pubs[static_cast<std::size_t>(i)].post(wire::List{std::int64_t{i}, std::int64_t{k}});
        CHECK(e->sequence == static_cast<std::uint64_t>(k));
      }
    });
  }
  for (auto& t : threads) t.join();
  rt->wait_idle();
  REQUIRE(seen.size() == 3);
  for (const auto& [sub, per_pub] : seen) {
    REQUIRE(per_pub.size() == kPublishers);
    for (const auto& [pub, values] : per_pub) {
      REQUIRE(values.size() == kPosts);
      for (int k = 0; k < kPosts; ++k) CHECK(values[static_cast<std::size_t>(k)] == k);
    }
  }
}

TEST_CASE("callbacks of one module never overlap") {
  auto clock = std::make_shared<VirtualClock>(1.0);
  RuntimeOptions opts;
  opts.instance_id = "edge";
  opts.clock = clock;
  Runtime rt(opts);
  std::atomic<int> inside{0};
  std::atomic<int> overlaps{0};
  std::atomic<int> calls{0};
  auto guard = [&] {
    if (inside.fetch_add(1) != 0) ++overlaps;
    std::this_thread::sleep_for(std::chrono::microseconds(50));
    inside.fetch_sub(1);
    ++calls;
  };
  Publisher a, b;
  rt.add_module("src", lambda_module([&](LambdaModule& self) {
    a = self.publish("A", "Int");
    b = self.publish("B", "Int");
  }));
  rt.add_module("target", lambda_module([&](LambdaModule& self) {
    self.subscribe("A", "Int", [&](const Envelope&) { guard(); });
    self.subscribe("B", "Int", [&](const Envelope&) { guard(); });
    self.register_periodic(10, [&](std::int64_t) { guard(); });
  }));
  rt.start();
  std::thread t1([&] { for (int i = 0; i < 300; ++i) a.post(i); });
  std::thread t2([&] { for (int i = 0; i < 300; ++i) b.post(i); });
  t1.join();
  t2.join();
  rt.wait_idle();
  CHECK(calls >= 600);
  CHECK(overlaps == 0);
}

TEST_CASE("properties and durations") {
  CHECK(parse_duration_ms("6s") == 6000);
  CHECK(parse_duration_ms("250ms") == 250);
  CHECK(parse_duration_ms("2m") == 120000);
  CHECK(parse_duration_ms("1h") == 3600000);
  CHECK(parse_duration_ms("15") == 15);
  CHECK(error_of([] { parse_duration_ms("6 parsecs"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([] { parse_duration_ms("s"); }) == ErrorCode::InvalidProperty);
  Properties p(PropertyMap{{"Rate", "1/60"}, {"N", " 42 "}, {"Bad", "4x"}, {"Chunk", "10s"}});
  CHECK(p.number("Rate") == doctest::Approx(1.0 / 60.0));
  CHECK(p.integer("N") == 42);
  CHECK(p.duration_ms("Chunk") == 10000);
  CHECK(error_of([&] { (void)p.integer("Bad"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([&] { (void)p.string("Missing"); }) == ErrorCode::InvalidProperty);
  CHECK(p.list("N").size() == 1);
  CHECK(p.list("Missing").empty());
}
