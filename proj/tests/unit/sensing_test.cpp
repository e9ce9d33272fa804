#include <doctest.h>
#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <future>
#include <numeric>
#include <set>

#include "chanrt/error.hpp"
#include "chanrt/net/frame.hpp"
#include "chanrt/net/network.hpp"
#include "chanrt/net/socket.hpp"
#include "chanrt/sensing/coverage.hpp"
#include "chanrt/sensing/manifest.hpp"
#include "chanrt/sensing/modules.hpp"
#include "chanrt/sensing/records.hpp"
#include "chanrt/sensing/saver.hpp"
#include "chanrt/sensing/schedule.hpp"
#include "chanrt/sensing/sensors.hpp"
#include "chanrt/sensing/sync.hpp"
#include "test_modules.hpp"
#include "test_util.hpp"

using namespace chanrt;
using namespace chanrt::sensing;
using namespace std::chrono_literals;
using chanrt::testing::error_of;
using chanrt::testing::eventually;
using chanrt::testing::lambda_module;
using chanrt::testing::LambdaModule;
using chanrt::testing::TempDir;

namespace {

constexpr std::int64_t kEpoch = VirtualClock::kDefaultEpochMs;

std::shared_ptr<const ModuleFactory> sensing_factory() {
  auto f = std::make_shared<ModuleFactory>();
  register_sensing_modules(*f);
  return f;
}

// Runtime on a clock whose first epoch-aligned tick lands exactly at the epoch.
std::unique_ptr<Runtime> sim_runtime(const std::string& id, double scale) {
  RuntimeOptions opts;
  opts.instance_id = id;
  opts.clock = std::make_shared<VirtualClock>(scale, kEpoch, 20ms);
  opts.factory = sensing_factory();
  return std::make_unique<Runtime>(opts);
}

PropertyMap save_block(const std::string& what, const fs::path& storage, const std::string& format = "rec") {
  return {{"What", what}, {"StoragePath", storage.string()}, {"FileFormat", format}};
}

Properties saver_props(std::initializer_list<PropertyMap> blocks) {
  PropertyList list(blocks.begin(), blocks.end());
  return Properties(PropertyMap{{"save", list}});
}

std::vector<fs::path> files_in(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_bytes(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("minute file naming") {
  const auto ts = kEpoch + 30 * kMsPerSecond;  // 2023-01-01 00:00:30
  CHECK(record_path("/data", "Accel", ts) == fs::path("/data/Accel/20230101_0000.rec"));
  CHECK(minute_file_name(kEpoch + 23 * kMsPerHour + 59 * kMsPerMinute + 59'999) == "20230101_2359.rec");
  CHECK(minute_file_name(kEpoch + kMsPerDay) == "20230102_0000.rec");
  CHECK(minute_of_file("20230101_0000.rec") == kEpoch);
  CHECK(minute_of_file("20230101_1337.rec") == kEpoch + 13 * kMsPerHour + 37 * kMsPerMinute);
  CHECK_FALSE(minute_of_file("20231301_0000.rec"));
  CHECK_FALSE(minute_of_file("audio_file_1.chunk"));
  for (std::int64_t t = kEpoch; t < kEpoch + 3 * kMsPerDay; t += 7 * kMsPerMinute + 13) {
    REQUIRE(minute_of_file(minute_file_name(t)) == t - t % kMsPerMinute);
  }

  CHECK(chunk_path("/sdcard/AudioData/audio_file_", kEpoch) == fs::path("/sdcard/AudioData/audio_file_1672531200000.chunk"));
  CHECK(chunk_path("/x/mic", 5) == fs::path("/x/mic_5.chunk"));
  CHECK(chunk_time("audio_file_1672531200000.chunk") == kEpoch);
  CHECK_FALSE(chunk_time("audio_file_.chunk"));
  CHECK_FALSE(chunk_time("20230101_0000.rec"));
}

TEST_CASE("record files round trip and detect torn tails") {
  TempDir dir;
  const auto path = dir / "r.rec";
  std::vector<StoredRecord> records;
  wire::Bytes image;
  for (int i = 0; i < 50; ++i) {
    wire::Struct v;
    v.type_name = "Vector3";
    v.add("x", i * 0.5);
    records.push_back({"AccelData", static_cast<std::uint64_t>(i), kEpoch + i * 50, v});
    const auto framed = frame_record(records.back());
    image.insert(image.end(), framed.begin(), framed.end());
  }
  write_file_atomic(path, image);
  CHECK_FALSE(fs::exists(dir / "r.rec.tmp"));
  CHECK(read_record_file(path) == records);
  CHECK(count_records(path) == 50);
  CHECK(count_framed(image) == 50);
  const auto ts = record_timestamps(path);
  REQUIRE(ts.size() == 50);
  for (int i = 0; i < 50; ++i) CHECK(ts[static_cast<std::size_t>(i)] == kEpoch + i * 50);

  image.resize(image.size() - 3);
  write_file_atomic(path, image);
  CHECK(error_of([&] { (void)count_records(path); }) == ErrorCode::TruncatedInput);
  CHECK(error_of([&] { (void)read_record_file(path); }) == ErrorCode::TruncatedInput);
  CHECK(error_of([&] { (void)read_file(dir / "missing"); }) == ErrorCode::IoError);
}

TEST_CASE("rates") {
  CHECK(parse_rate("20") == Rate{20, 1});
  CHECK(parse_rate("1/60") == Rate{1, 60});
  CHECK(parse_rate(" 2/120 ") == Rate{1, 60});
  CHECK(parse_rate("0.5") == Rate{1, 2});
  CHECK(parse_rate("1/60").period_ms() == 60'000);
  CHECK(parse_rate("20").period_ms() == 50);
  CHECK(error_of([] { (void)parse_rate("0"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([] { (void)parse_rate("x"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([] { (void)parse_rate("1/0"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([] { (void)parse_rate("3").period_ms(); }) == ErrorCode::InvalidProperty);
}

TEST_CASE("expected samples per hour match a brute-force tick count") {
  for (const auto& r : {Rate{20, 1}, Rate{1, 60}, Rate{1, 1}, Rate{1, 20}, Rate{1, 10}, Rate{1, 7}, Rate{8, 1}}) {
    const auto period = r.period_ms();
    std::vector<std::uint64_t> brute(24, 0);
    for (std::int64_t t = 0; t < 24 * kMsPerHour; t += period) ++brute[static_cast<std::size_t>(t / kMsPerHour)];
    for (std::int64_t h = 0; h < 24; ++h) CHECK(expected_samples(r, h) == brute[static_cast<std::size_t>(h)]);
  }
  CHECK(expected_samples({20, 1}, 0) == 72000);
  CHECK(expected_samples({1, 60}, 5) == 60);
  CHECK(expected_samples({1, 10}, 23) == 360);
}

TEST_CASE("payloads are deterministic per seed and tick") {
  SensorSpec accel{"Accelerometer", {20, 1}, PayloadKind::Vector3, 0, 0, seed_for("Accelerometer")};
  CHECK(sensor_payload(accel, 7, kEpoch) == sensor_payload(accel, 7, kEpoch));
  CHECK(sensor_payload(accel, 7, kEpoch) != sensor_payload(accel, 8, kEpoch));
  CHECK(sensor_payload(accel, 7, kEpoch).type_name() == "Vector3");
  auto other = accel;
  other.seed ^= 1;
  CHECK(sensor_payload(accel, 7, kEpoch) != sensor_payload(other, 7, kEpoch));

  SensorSpec mic{"Microphone", {1, 10}, PayloadKind::AudioChunk, 100, 10'000, 3};
  const auto audio = read_audio(sensor_payload(mic, 2, kEpoch + 20'000));
  CHECK(audio.sampling_rate == 100);
  CHECK(audio.start_ms == kEpoch + 20'000);
  CHECK(audio.duration_ms == 10'000);
  CHECK(audio.samples.size() == 1000);
  CHECK(error_of([] { (void)read_audio(wire::WireValue(1.0)); }) == ErrorCode::InvalidStruct);

  const std::vector<float> samples{0.0f, -1.5f, 3.25f};
  CHECK(read_audio(make_audio(16000, 1, 2, samples)).samples == samples);
}

TEST_CASE("saver writes one file per virtual minute") {
  TempDir dir;
  auto rt = sim_runtime("edge", 600.0);
  rt->register_module("SimulatedSensor", "tick", Properties(PropertyMap{{"SensorId", "Tick"}, {"Rate", "1"}}));
  rt->register_module("DataSaverModule", "saver", saver_props({save_block("TickData", dir.path())}));
  rt->start();
  rt->run_until(kEpoch + 2 * kMsPerMinute);
  rt->stop();

  const auto files = files_in(dir.path());
  REQUIRE(files.size() == 2);
  CHECK(files[0] == dir / "TickData/20230101_0000.rec");
  CHECK(files[1] == dir / "TickData/20230101_0001.rec");
  CHECK(count_records(files[0]) == 60);
  CHECK(count_records(files[1]) == 60);
  const auto records = read_record_file(files[1]);
  CHECK(records.front().sequence == 60);
  CHECK(records.front().timestamp_ms == kEpoch + kMsPerMinute);
  CHECK(records.front().channel == "TickData");
}

TEST_CASE("one virtual hour of accelerometer and battery is saved losslessly") {
  TempDir dir;
  auto rt = sim_runtime("edge", 7200.0);
  rt->register_module("AccelerometerCollector", "accel");
  rt->register_module("BatteryCollector", "battery");
  rt->register_module("DataSaverModule", "saver",
                      saver_props({save_block("AccelerometerData", dir.path()), save_block("BatteryData", dir.path())}));
  rt->start();
  rt->run_until(kEpoch + kMsPerHour);

  const auto* accel = rt->find_module<SimulatedSensorModule>("accel");
  const auto* battery = rt->find_module<SimulatedSensorModule>("battery");
  const auto* saver = rt->find_module<DataSaverModule>("saver");
  CHECK(accel->posted() == 72000);
  CHECK(battery->posted() == 60);
  const auto stats = saver->stats();
  CHECK(stats.records_written == 72060);
  CHECK(stats.records_lost == 0);
  CHECK(stats.files_created == 120);
  rt->stop();

  std::size_t accel_records = 0;
  for (const auto& f : files_in(dir / "AccelerometerData")) accel_records += count_records(f);
  CHECK(accel_records == 72000);
  CHECK(files_in(dir / "BatteryData").size() == 60);

  const std::vector<RateEntry> rates{{"Accelerometer", {20, 1}, "AccelerometerData"}, {"Battery", {1, 60}, "BatteryData"}};
  const auto report = coverage_report(scan_timestamps(dir.path(), rates), rates, kEpoch, 1);
  REQUIRE(report.size() == 2);
  CHECK(report[0].expected == 72000);
  CHECK(report[0].received == 72000);
  CHECK(report[0].coverage_pct == 100.0);
  CHECK(report[1].expected == 60);
  CHECK(report[1].coverage_pct == 100.0);
}

TEST_CASE("microphone chunks tile virtual time without gaps") {
  TempDir dir;
  auto rt = sim_runtime("edge", 6000.0);
  rt->register_module("MicrophoneCollector", "mic",
                      Properties(PropertyMap{{"SamplingRate", "100"}, {"ContinuousChunks", "10s"}, {"Output", "AudioData"}}));
  rt->register_module("DataSaverModule", "saver",
                      saver_props({save_block("AudioData", dir / "AudioData/audio_file_", "WAV")}));
  rt->start();
  rt->run_until(kEpoch + 10 * kMsPerMinute);
  rt->stop();

  const auto files = files_in(dir / "AudioData");
  REQUIRE(files.size() == 60);
  std::int64_t expect = kEpoch;
  for (const auto& f : files) {
    const auto records = read_record_file(f);
    REQUIRE(records.size() == 1);
    const auto audio = read_audio(records[0].payload);
    CHECK(chunk_time(f.filename().string()) == audio.start_ms);
    CHECK(audio.start_ms == expect);
    CHECK(audio.samples.size() == 1000);
    expect = audio.start_ms + audio.duration_ms;
  }
  CHECK(expect == kEpoch + 10 * kMsPerMinute);
}

TEST_CASE("saver configuration errors") {
  auto rt = sim_runtime("edge", 1.0);
  CHECK(error_of([&] { rt->register_module("DataSaverModule", "a"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([&] {
          rt->register_module("DataSaverModule", "b", Properties(PropertyMap{{"save", PropertyMap{{"What", "X"}}}}));
        }) == ErrorCode::InvalidProperty);
  CHECK(error_of([&] { rt->register_module("SimulatedSensor", "c", Properties(PropertyMap{{"SensorId", "X"}})); }) ==
        ErrorCode::InvalidProperty);
  CHECK(error_of([&] {
          rt->register_module("MicrophoneCollector", "d", Properties(PropertyMap{{"StartRecording", "Later"}}));
        }) == ErrorCode::InvalidProperty);
}

TEST_CASE("connectivity schedule") {
  const auto s = ConnectivitySchedule::field_protocol();
  const auto at = [&](std::int64_t h, std::int64_t m = 0) { return s.mode_at(kEpoch + h * kMsPerHour + m * kMsPerMinute, kEpoch); };
  CHECK(at(0) == LinkMode::Cellular);
  CHECK(at(1, 59) == LinkMode::Cellular);
  CHECK(at(2) == LinkMode::WiFi);
  CHECK(at(9, 59) == LinkMode::WiFi);
  CHECK(at(10) == LinkMode::Disconnected);
  CHECK(at(12) == LinkMode::Cellular);
  CHECK(at(18) == LinkMode::Disconnected);
  CHECK(at(20) == LinkMode::WiFi);
  CHECK(at(22) == LinkMode::Cellular);
  CHECK(at(24) == LinkMode::Cellular);
  using P = std::pair<std::int64_t, std::int64_t>;
  CHECK(s.outages(kEpoch) ==
        std::vector<P>{{kEpoch + 10 * kMsPerHour, kEpoch + 12 * kMsPerHour}, {kEpoch + 18 * kMsPerHour, kEpoch + 20 * kMsPerHour}});

  const auto parsed = ConnectivitySchedule::parse(
      "0-2 Cellular, 2-10 WiFi, 10-12 Disconnected, 12-18 Cellular, 18-20 Disconnected, 20-22 Wi-Fi, 22-24 Cellular");
  CHECK(parsed.segments() == s.segments());
  CHECK(ConnectivitySchedule::parse("0-24 WiFi").outages(kEpoch, 3).empty());
  CHECK(error_of([] { (void)ConnectivitySchedule::parse("0-10 WiFi, 11-24 WiFi"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([] { (void)ConnectivitySchedule::parse("0-20 WiFi"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([] { (void)ConnectivitySchedule::parse("0-24 Satellite"); }) == ErrorCode::InvalidProperty);
}

TEST_CASE("schedule module posts mode changes at segment boundaries") {
  auto rt = sim_runtime("edge", 36000.0);
  rt->register_module("ConnectivityScheduleModule", "conn");
  std::vector<std::pair<std::string, std::int64_t>> modes;
  std::size_t samples = 0;
  rt->add_module("watch", lambda_module([&](LambdaModule& self) {
    self.subscribe("LinkMode", "String", [&](const Envelope& e) { modes.emplace_back(e.payload.as<std::string>(), e.timestamp_ms); });
    self.subscribe("ConnectivityData", "String", [&](const Envelope&) { ++samples; });
  }));
  rt->start();
  rt->run_until(kEpoch + 3 * kMsPerHour);
  rt->stop();
  using M = std::vector<std::pair<std::string, std::int64_t>>;
  CHECK(modes == M{{"Cellular", kEpoch}, {"WiFi", kEpoch + 2 * kMsPerHour}});
  CHECK(samples == 3 * 3600);
}

TEST_CASE("manifest build and diff") {
  TempDir dir;
  write_bytes(dir / "a/x.rec", "hello");
  write_bytes(dir / "b.chunk", "world!");
  write_bytes(dir / "a/y.rec.tmp", "partial");
  ChecksumCache cache;
  const auto m = build_manifest(dir.path(), &cache);
  REQUIRE(m.size() == 2);
  CHECK(m[0].relative_path == "a/x.rec");
  CHECK(m[0].size_bytes == 5);
  const std::string hello = "hello";
  CHECK(m[0].checksum == fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(hello.data()), hello.size())));
  CHECK(m[1].relative_path == "b.chunk");
  CHECK(cache.size() == 2);
  CHECK(build_manifest(dir.path(), &cache) == m);
  CHECK(build_manifest(dir / "missing").empty());

  // FNV-1a 64 reference values
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cULL);

  const ManifestEntry ea{"a", 1, 1}, eb{"b", 2, 2};
  CHECK(diff_manifests({ea, eb}, {ea, eb}).empty());
  CHECK(diff_manifests({ea, eb}, {ea}) == std::vector<std::string>{"b"});
  CHECK(diff_manifests({ea, eb}, {ea, {"b", 2, 3}}) == std::vector<std::string>{"b"});
  CHECK(diff_manifests({ea, eb}, {ea, {"b", 5, 2}}) == std::vector<std::string>{"b"});
  CHECK(diff_manifests({ea}, {ea, eb}).empty());
  CHECK(manifest_from_wire(to_wire(m)) == m);
}

TEST_CASE("sync session is idempotent and repairs corruption") {
  TempDir client, server;
  write_bytes(client / "AccelData/20221231_2358.rec", std::string(1000, 'a'));
  write_bytes(client / "AudioData/audio_file_1.chunk", std::string(5000, 'b'));
  // still being written: minute not over yet
  write_bytes(client / "AccelData/20230101_0000.rec", "open");

  auto rt = create_runtime("edge", 1.0, sensing_factory());
  rt->register_module("DataReceiverModule", "receiver", Properties(PropertyMap{{"StoragePath", server.path().string()}}));
  rt->register_module("DataSyncModule", "sync",
                      Properties(PropertyMap{{"FilePath", client.path().string()},
                                             {"UserIdentifier", "User01"},
                                             {"SyncInterval", "0"},
                                             {"LinkChannel", ""}}));
  rt->start();
  auto* sync = rt->find_module<DataSyncModule>("sync");
  auto* receiver = rt->find_module<DataReceiverModule>("receiver");

  auto first = sync->sync_now();
  CHECK(first.files_sent == 2);
  CHECK(first.bytes_sent == 6000);
  CHECK(first.files_confirmed == 2);
  rt->wait_idle();
  auto closed_client = build_manifest(client.path());
  closed_client.erase(std::remove_if(closed_client.begin(), closed_client.end(),
                                     [](const ManifestEntry& e) { return e.relative_path == "AccelData/20230101_0000.rec"; }),
                      closed_client.end());
  CHECK(build_manifest(server / "User01") == closed_client);
  CHECK(receiver->manifest("User01") == closed_client);

  CHECK(sync->sync_now().files_sent == 0);

  write_bytes(server / "User01/AudioData/audio_file_1.chunk", "damaged");
  CHECK(receiver->stats().files_stored == 2);
  // the receiver trusts its own manifest until it reloads, so restart it
  rt->stop();
  rt = create_runtime("edge", 1.0, sensing_factory());
  rt->register_module("DataReceiverModule", "receiver", Properties(PropertyMap{{"StoragePath", server.path().string()}}));
  rt->register_module("DataSyncModule", "sync",
                      Properties(PropertyMap{{"FilePath", client.path().string()},
                                             {"UserIdentifier", "User01"},
                                             {"SyncInterval", "0"},
                                             {"LinkChannel", ""}}));
  rt->start();
  sync = rt->find_module<DataSyncModule>("sync");
  CHECK(sync->sync_now(true).files_sent == 1);
  rt->wait_idle();
  CHECK(build_manifest(server / "User01") == closed_client);

  const auto arrivals = read_arrivals(server / "User01.arrivals.csv");
  REQUIRE(arrivals.size() == 3);
  CHECK(arrivals[0].path == "AccelData/20221231_2358.rec");
  CHECK(arrivals[2].path == "AudioData/audio_file_1.chunk");
  rt->stop();
}

TEST_CASE("a send window is acknowledged before the next one goes out") {
  TempDir client, server;
  for (int i = 0; i < 7; ++i) write_bytes(client / fmt::format("AudioData/audio_file_{}.chunk", i), std::string(3000, 'a' + i));

  auto rt = create_runtime("edge", 1.0, sensing_factory());
  rt->register_module("DataReceiverModule", "receiver", Properties(PropertyMap{{"StoragePath", server.path().string()}}));
  rt->register_module("DataSyncModule", "sync",
                      Properties(PropertyMap{{"FilePath", client.path().string()},
                                             {"UserIdentifier", "User01"},
                                             {"SyncInterval", "0"},
                                             {"LinkChannel", ""},
                                             {"SendWindow", "5000"}}));
  rt->start();
  auto* sync = rt->find_module<DataSyncModule>("sync");
  auto* receiver = rt->find_module<DataReceiverModule>("receiver");

  const auto stats = sync->sync_now();
  CHECK(stats.files_sent == 7);
  CHECK(stats.files_confirmed == 7);
  // one listing request, then one acknowledgement per two files (6000 >= 5000) and one for the last
  CHECK(receiver->stats().requests == 5);
  rt->wait_idle();
  CHECK(build_manifest(server / "User01") == build_manifest(client.path()));
  CHECK(sync->sync_now().files_sent == 0);
  CHECK(receiver->stats().requests == 5);
  rt->stop();

  CHECK(error_of([&] {
          auto bad = create_runtime("edge", 1.0, sensing_factory());
          bad->register_module("DataSyncModule", "sync",
                               Properties(PropertyMap{{"FilePath", client.path().string()},
                                                      {"UserIdentifier", "User01"},
                                                      {"SendWindow", "0"}}));
        }) == ErrorCode::InvalidProperty);
}

TEST_CASE("receiver rejects bad uploads") {
  TempDir server;
  auto rt = create_runtime("server", 1.0, sensing_factory());
  rt->register_module("DataReceiverModule", "receiver", Properties(PropertyMap{{"StoragePath", server.path().string()}}));
  Publisher pub;
  rt->add_module("sender", lambda_module([&](LambdaModule& self) { pub = self.publish(kSyncFileChannel, "SyncFile"); }));
  rt->start();
  const auto upload = [&](const std::string& user, const std::string& path, const wire::Bytes& data, std::uint64_t checksum) {
    wire::Struct s;
    s.type_name = "SyncFile";
    s.add("user", user);
    s.add("path", path);
    s.add("size", static_cast<std::int64_t>(data.size()));
    s.add("checksum", static_cast<std::int64_t>(checksum));
    s.add("data", data);
    pub.post(std::move(s));
  };
  const wire::Bytes data{1, 2, 3};
  upload("u", "a.bin", data, fnv1a64(data) ^ 1);
  upload("u", "../escape.bin", data, fnv1a64(data));
  upload("u", "/abs.bin", data, fnv1a64(data));
  upload("..", "a.bin", data, fnv1a64(data));
  upload("u", "ok/a.bin", data, fnv1a64(data));
  upload("u", "ok/a.bin", data, fnv1a64(data));
  rt->wait_idle();
  const auto stats = rt->find_module<DataReceiverModule>("receiver")->stats();
  CHECK(stats.files_rejected == 4);
  CHECK(stats.files_stored == 1);
  CHECK(stats.files_unchanged == 1);
  CHECK(files_in(server.path()) == std::vector<fs::path>{server / "u/ok/a.bin", server / "u.arrivals.csv"});
  rt->stop();
}

TEST_CASE("sync survives a link drop mid-transfer") {
  TempDir client, server;
  const std::string big(3'000'000, 'z');
  write_bytes(client / "AudioData/audio_file_1.chunk", big);
  write_bytes(client / "AudioData/audio_file_2.chunk", "small");

  auto server_rt = create_runtime("server", 10.0, sensing_factory());
  server_rt->register_module("DataReceiverModule", "receiver",
                             Properties(PropertyMap{{"StoragePath", server.path().string()}}));
  server_rt->start();
  auto net_server = net::start_server(*server_rt, 0);

  auto edge_rt = create_runtime("edge", 10.0, sensing_factory());
  // 3 MB at 300 kB per virtual second: 10 virtual seconds, 1 s real
  edge_rt->register_module("DataSyncModule", "sync",
                           Properties(PropertyMap{{"FilePath", client.path().string()},
                                                  {"UserIdentifier", "User01"},
                                                  {"SyncInterval", "0"},
                                                  {"LinkChannel", ""},
                                                  {"WiFiBandwidth", "300000"}}));
  edge_rt->start();
  auto net_client = net::connect_client(*edge_rt, "127.0.0.1", net_server->port(), 50ms);
  REQUIRE(eventually([&] { return edge_rt->reach(kSyncFileChannel) == 1 && edge_rt->reach(kSyncRequestChannel) == 1; }));
  auto* sync = edge_rt->find_module<DataSyncModule>("sync");

  auto session = std::async(std::launch::async, [&] { return error_of([&] { (void)sync->sync_now(); }); });
  std::this_thread::sleep_for(300ms);
  net_client->set_enabled(false);
  CHECK(session.get() == ErrorCode::PeerDisconnected);
  server_rt->wait_idle();
  CHECK_FALSE(fs::exists(server / "User01/AudioData/audio_file_1.chunk"));
  CHECK(files_in(server / "User01").size() <= 1);  // the small file may have gone first
  for (const auto& f : files_in(server.path())) CHECK(f.extension() != ".tmp");

  net_client->set_enabled(true);
  REQUIRE(eventually([&] { return edge_rt->reach(kSyncFileChannel) == 1; }));
  const auto stats = sync->sync_now();
  CHECK(stats.files_sent >= 1);
  server_rt->wait_idle();
  CHECK(build_manifest(server / "User01") == build_manifest(client.path()));
  CHECK(sync->sync_now().files_sent == 0);
  CHECK(sync->totals().aborted == 1);

  net_client->stop();
  net_server->stop();
  edge_rt->stop();
  server_rt->stop();
}

TEST_CASE("a torn upload frame leaves nothing at the receiver") {
  TempDir server;
  auto server_rt = create_runtime("server", 1.0, sensing_factory());
  server_rt->register_module("DataReceiverModule", "receiver",
                             Properties(PropertyMap{{"StoragePath", server.path().string()}}));
  server_rt->start();
  auto net_server = net::start_server(*server_rt, 0);

  const wire::Bytes data(200'000, 7);
  wire::Struct s;
  s.type_name = "SyncFile";
  s.add("user", "User01");
  s.add("path", "AudioData/a.chunk");
  s.add("size", static_cast<std::int64_t>(data.size()));
  s.add("checksum", static_cast<std::int64_t>(fnv1a64(data)));
  s.add("data", data);
  Envelope env;
  env.channel = kSyncFileChannel;
  env.payload = s;
  const auto frame = net::encode_frame(net::FrameType::Data, net::encode_data(env));
  {
    auto sock = net::connect_tcp("127.0.0.1", net_server->port(), 2000ms);
    REQUIRE(sock.send_all(net::encode_frame(net::FrameType::Hello, net::encode_hello({net::kProtocolVersion, "raw"}))));
    REQUIRE(sock.send_all(net::encode_frame(net::FrameType::Table, net::encode_table({{kSyncFileChannel, true, false, "SyncFile"}}))));
    REQUIRE(sock.send_all(std::span(frame).first(frame.size() / 2)));
    std::this_thread::sleep_for(100ms);
  }
  REQUIRE(eventually([&] {
    const auto peers = net_server->peers();
    return !peers.empty() && peers[0].status != net::PeerStatus::Connected;
  }));
  server_rt->wait_idle();
  CHECK(server_rt->find_module<DataReceiverModule>("receiver")->stats().files_stored == 0);
  CHECK(files_in(server.path()).empty());
  net_server->stop();
  server_rt->stop();
}

TEST_CASE("coverage report") {
  const std::vector<RateEntry> rates{{"Accelerometer", {20, 1}, "AccelerometerData"}, {"Battery", {1, 60}, "BatteryData"}};
  TimestampsBySensor ts;
  auto& accel = ts["Accelerometer"];
  for (std::int64_t i = 0; i < 72000; ++i) accel.push_back(kEpoch + i * 50);
  for (std::int64_t i = 0; i < 72000; i += 2) accel.push_back(kEpoch + kMsPerHour + i * 50);
  accel.push_back(kEpoch - 1);  // before the run
  const auto report = coverage_report(ts, rates, kEpoch, 2);
  REQUIRE(report.size() == 4);
  CHECK(report[0].received == 72000);
  CHECK(report[0].coverage_pct == 100.0);
  CHECK(report[1].received == 36000);
  CHECK(report[1].coverage_pct == 50.0);
  CHECK(report[2].sensor_id == "Battery");
  CHECK(report[2].received == 0);
  CHECK(report[2].coverage_pct == 0.0);
  CHECK(coverage_csv(report) ==
        "sensor_id,hour,expected,received,coverage_pct\n"
        "Accelerometer,0,72000,72000,100.0\n"
        "Accelerometer,1,72000,36000,50.0\n"
        "Battery,0,60,0,0.0\n"
        "Battery,1,60,0,0.0\n");

  TimestampsBySensor unknown{{"Gyroscope", {kEpoch}}};
  CHECK(error_of([&] { (void)coverage_report(unknown, rates, kEpoch, 1); }) == ErrorCode::UnknownSensorId);
}

TEST_CASE("rates file round trip") {
  TempDir dir;
  auto rates = phone_sensor_rates();
  const auto wearable = wearable_sensor_rates();
  rates.insert(rates.end(), wearable.begin(), wearable.end());
  CHECK(rates.size() == 9);
  std::ofstream(dir / "rates.csv") << rates_csv(rates);
  CHECK(read_rates_csv(dir / "rates.csv") == rates);
  std::ofstream(dir / "bad.csv") << "sensor_id,rate_hz,channel\nA,1\n";
  CHECK(error_of([&] { (void)read_rates_csv(dir / "bad.csv"); }) == ErrorCode::InvalidProperty);
  CHECK(error_of([&] { (void)read_rates_csv(dir / "none.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("arrival curve") {
  const std::vector<RateEntry> rates{{"Battery", {1, 60}, "BatteryData"}};  // 60 per hour, 120 over 2 h
  const std::vector<Arrival> arrivals{
      {"BatteryData/20230101_0000.rec", kEpoch + 90 * kMsPerSecond, 30},
      {"BatteryData/20230101_0001.rec", kEpoch + 3 * kMsPerMinute, 30},
      {"BatteryData/20230101_0000.rec", kEpoch + 4 * kMsPerMinute, 30},  // re-sent, no new records
      {"BatteryData/20230101_0002.rec", kEpoch + 5 * kMsPerMinute + 1, 60},
      {"OtherData/20230101_0000.rec", kEpoch, 999},
  };
  const auto curve = arrival_curve(arrivals, rates, kEpoch, 2);
  REQUIRE(curve.size() == 6);
  const std::vector<double> pct{0.0, 25.0, 25.0, 50.0, 50.0, 100.0};
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve[i].minute == static_cast<std::int64_t>(i));
    CHECK(curve[i].cumulative_pct == doctest::Approx(pct[i]));
  }
  CHECK(arrival_csv(curve).rfind("sensor_id,minute,cumulative_pct\nBattery,0,0.0000\n", 0) == 0);
}
