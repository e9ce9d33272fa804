#include <doctest.h>

#include <fmt/format.h>
#include <poll.h>

#include <atomic>
#include <random>
#include <thread>

#include "chanrt/error.hpp"
#include "chanrt/net/network.hpp"
#include "chanrt/wire/codec.hpp"
#include "test_modules.hpp"
#include "wire_gen.hpp"

using namespace chanrt;
using namespace chanrt::net;
using namespace std::chrono_literals;
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

template <typename P>
bool eventually(P pred, std::chrono::milliseconds limit = 5000ms) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(1ms);
  }
  return pred();
}

// Speaks the frame protocol by hand so tests can see exactly what goes over
// the wire.
class RawPeer {
 public:
  explicit RawPeer(std::uint16_t port) : socket_(connect_tcp("127.0.0.1", port, 2000ms)) {}

  void send(FrameType type, const wire::Bytes& payload) { REQUIRE(socket_.send_all(encode_frame(type, payload))); }
  void send_raw(const wire::Bytes& bytes) { REQUIRE(socket_.send_all(bytes)); }

  void handshake(const std::string& id, const ChannelTable& table = {}) {
    send(FrameType::Hello, encode_hello({kProtocolVersion, id}));
    send(FrameType::Table, encode_table(table));
  }

  /// Next frame, or nullopt on timeout or close.
  std::optional<Frame> read(std::chrono::milliseconds timeout = 3000ms) {
    const auto until = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto f = parser_.next()) return f;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(until - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{socket_.fd(), POLLIN, 0};
      if (::poll(&pfd, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
      std::uint8_t buf[4096];
      const long n = socket_.recv_some(buf);
      if (n <= 0) {
        closed_ = true;
        return std::nullopt;
      }
      parser_.feed(std::span(buf, static_cast<std::size_t>(n)));
    }
  }

  /// Skips PING/PONG traffic.
  std::optional<Frame> read_non_control(std::chrono::milliseconds timeout = 3000ms) {
    for (;;) {
      auto f = read(timeout);
      if (!f || (f->type != FrameType::Ping && f->type != FrameType::Pong)) return f;
    }
  }

  bool wait_closed(std::chrono::milliseconds timeout = 3000ms) {
    const auto until = std::chrono::steady_clock::now() + timeout;
    while (!closed_ && std::chrono::steady_clock::now() < until) (void)read(50ms);
    return closed_;
  }

 private:
  Socket socket_;
  FrameParser parser_;
  bool closed_ = false;
};

Frame random_frame(std::mt19937_64& rng) {
  Frame f;
  f.type = static_cast<FrameType>(std::uniform_int_distribution<int>(1, 5)(rng));
  f.payload.resize(std::uniform_int_distribution<std::size_t>(0, 300)(rng));
  for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
  return f;
}

}  // namespace

TEST_CASE("frame header layout") {
  const auto bytes = encode_frame(FrameType::Hello, encode_hello({1, "edge"}));
  const wire::Bytes expected{'C', 'L', 'D', '1', 0x01, 0, 0, 0, 10, 0x00, 0x01, 0, 0, 0, 4, 'e', 'd', 'g', 'e'};
  CHECK(bytes == expected);
  CHECK(encode_frame(FrameType::Ping, {}) == wire::Bytes{'C', 'L', 'D', '1', 0x04, 0, 0, 0, 0});
}

TEST_CASE("table entry flags") {
  const ChannelTable t{{"A", true, false, "Int"}, {"B", false, true, "String"}, {"C", true, true, "Float"}};
  const auto bytes = encode_table(t);
  // count, then "A" (4+1), flags
  CHECK(bytes[4 + 5] == 0x01);
  CHECK(decode_table(bytes) == t);
  auto bad = encode_table({{"A", true, false, "Int"}});
  bad[9] = 0x00;
  CHECK(error_of([&] { (void)decode_table(bad); }) == ErrorCode::MalformedFrame);
}

TEST_CASE("data payload round trip and truncation") {
  Envelope e;
  e.channel = "AudioData";
  e.sequence = 77;
  e.timestamp_ms = -5;
  e.payload = wire::List{1.5, "x"};
  const auto bytes = encode_data(e);
  const auto back = decode_data(bytes);
  CHECK(back.channel == e.channel);
  CHECK(back.sequence == 77);
  CHECK(back.timestamp_ms == -5);
  CHECK(back.payload == e.payload);
  CHECK(back.type_name == "List");
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    wire::Bytes prefix(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK(error_of([&] { (void)decode_data(prefix); }) == ErrorCode::MalformedFrame);
  }
  auto extra = bytes;
  extra.push_back(0x00);
  CHECK(error_of([&] { (void)decode_data(extra); }) == ErrorCode::MalformedFrame);
}

TEST_CASE("property: a concatenation of frames parses into exactly those frames") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Frame> frames(std::uniform_int_distribution<std::size_t>(0, 20)(rng));
    wire::Bytes stream;
    for (auto& f : frames) {
      f = random_frame(rng);
      const auto b = encode_frame(f);
      stream.insert(stream.end(), b.begin(), b.end());
    }
    FrameParser parser;
    std::vector<Frame> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const auto n = std::min(stream.size() - pos, std::uniform_int_distribution<std::size_t>(1, 64)(rng));
      parser.feed(std::span(stream.data() + pos, n));
      pos += n;
      while (auto f = parser.next()) got.push_back(std::move(*f));
    }
    REQUIRE(got == frames);
    CHECK(parser.buffered() == 0);
  }
}

TEST_CASE("parser rejects garbage early") {
  FrameParser p;
  const wire::Bytes junk{'X'};
  p.feed(junk);
  CHECK(error_of([&] { (void)p.next(); }) == ErrorCode::MalformedFrame);
  FrameParser q;
  const wire::Bytes bad_type{'C', 'L', 'D', '1', 0x09};
  q.feed(bad_type);
  CHECK(error_of([&] { (void)q.next(); }) == ErrorCode::MalformedFrame);
  FrameParser r;
  const wire::Bytes huge{'C', 'L', 'D', '1', 0x03, 0xFF, 0xFF, 0xFF, 0xFF};
  r.feed(huge);
  CHECK(error_of([&] { (void)r.next(); }) == ErrorCode::MalformedFrame);
}

TEST_CASE("route") {
  PeerState connected_sub{"a", {{"C", false, true, "Int"}}, PeerStatus::Connected, 0};
  PeerState connected_pub{"b", {{"C", true, false, "Int"}}, PeerStatus::Connected, 0};
  PeerState down_sub{"c", {{"C", false, true, "Int"}}, PeerStatus::Disconnected, 0};
  CHECK(route("C", {connected_sub}) == RouteDecision{{0}, {}});
  CHECK(route("C", {connected_pub}) == RouteDecision{});
  CHECK(route("D", {connected_sub}) == RouteDecision{});
  CHECK(route("C", {down_sub, connected_pub, connected_sub}) == RouteDecision{{2}, {0}});
}

TEST_CASE("server and client exchange tables") {
  auto server_rt = create_runtime("server");
  auto edge_rt = create_runtime("edge");
  server_rt->add_module("s", lambda_module([](LambdaModule& m) { m.subscribe("AudioData", "List", [](const Envelope&) {}); }));
  edge_rt->add_module("p", lambda_module([](LambdaModule& m) { (void)m.publish("AudioData", "List"); }));
  server_rt->start();
  edge_rt->start();

  std::unique_ptr<NetworkServer> server;
  try {
    server = start_server(*server_rt, 4000);
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::PortInUse);
    server = start_server(*server_rt, 0);
  }
  auto client = connect_client(*edge_rt, "127.0.0.1", server->port(), 100ms);
  REQUIRE(client->wait_connected(5000ms));
  REQUIRE(server->wait_for_peers(1, 5000ms));
  const auto c = client->peer();
  CHECK(c.peer_instance_id == "server");
  CHECK(c.remote_table == ChannelTable{{"AudioData", false, true, "List"}});
  REQUIRE(eventually([&] { return server->peers()[0].remote_table == ChannelTable{{"AudioData", true, false, "List"}}; }));
  CHECK(server->peers()[0].peer_instance_id == "edge");
  CHECK(edge_rt->reach("AudioData") == 1);

  CHECK(error_of([&] { NetworkServer dup(*server_rt, server->port()); }) == ErrorCode::PortInUse);
  client->stop();
  server->stop();
}

TEST_CASE("routing over a live link") {
  auto server_rt = create_runtime("server");
  auto edge_rt = create_runtime("edge");
  std::mutex m;
  std::vector<Envelope> got;
  Publisher audio, local_only;
  server_rt->add_module("eval", lambda_module([&](LambdaModule& mod) {
    mod.subscribe("Results", "Float", [&](const Envelope& e) {
      std::lock_guard l(m);
      got.push_back(e);
    });
  }));
  edge_rt->add_module("model", lambda_module([&](LambdaModule& mod) {
    audio = mod.publish("Results", "Float");
    local_only = mod.publish("Private", "Int");
  }));
  server_rt->start();
  edge_rt->start();
  auto server = start_server(*server_rt, 0);
  auto client = connect_client(*edge_rt, "127.0.0.1", server->port(), 100ms);
  REQUIRE(client->wait_connected(5000ms));

  audio.post(0.25);
  local_only.post(1);
  REQUIRE(eventually([&] {
    std::lock_guard l(m);
    return got.size() == 1;
  }));
  {
    std::lock_guard l(m);
    CHECK(got[0].payload == wire::WireValue(0.25));
    CHECK(got[0].origin_instance == "edge");
    CHECK(got[0].sequence == 0);
  }
  // exactly one DATA frame for the subscribed channel, none for the other
  CHECK(client->peer().data_sent == 1);
  REQUIRE(eventually([&] { return server->peers()[0].data_received == 1; }));

  SUBCASE("link down: local delivery continues, drops are counted, routing resumes on reconnect") {
    std::atomic<int> local{0};
    edge_rt->add_module("watch", lambda_module([&](LambdaModule& mod) {
      mod.subscribe("Results", "Float", [&](const Envelope&) { ++local; });
    }));
    client->set_enabled(false);
    REQUIRE(eventually([&] { return client->peer().status == PeerStatus::Disconnected; }));
    for (int i = 0; i < 5; ++i) audio.post(1.0 + i);
    edge_rt->wait_idle();
    CHECK(local == 5);
    CHECK(client->peer().dropped_count == 5);
    client->set_enabled(true);
    REQUIRE(client->wait_connected(5000ms));
    CHECK(client->peer().sessions == 2);
    audio.post(9.0);
    REQUIRE(eventually([&] {
      std::lock_guard l(m);
      return got.size() == 2;
    }));
    std::lock_guard l(m);
    CHECK(got[1].payload == wire::WireValue(9.0));
    CHECK(got[1].sequence == 6);
  }

  SUBCASE("a subscriber added later shows up in the peer's table") {
    std::atomic<int> edge_got{0};
    Publisher back;
    server_rt->add_module("reply", lambda_module([&](LambdaModule& mod) { back = mod.publish("Commands", "String"); }));
    edge_rt->add_module("listener", lambda_module([&](LambdaModule& mod) {
      mod.subscribe("Commands", "String", [&](const Envelope&) { ++edge_got; });
    }));
    REQUIRE(eventually([&] { return server_rt->reach("Commands") == 1; }));
    back.post("go");
    CHECK(eventually([&] { return edge_got == 1; }));
  }
  client->stop();
  server->stop();
}

TEST_CASE("unreachable host keeps retrying") {
  auto rt = create_runtime("edge");
  rt->start();
  std::uint16_t free_port = 0;
  {
    auto probe = listen_tcp(0, "127.0.0.1");
    free_port = local_port(probe);
  }
  auto client = connect_client(*rt, "127.0.0.1", free_port, 20ms);
  CHECK(eventually([&] { return client->connect_attempts() >= 4; }));
  CHECK(client->peer().status == PeerStatus::Disconnected);
  client->stop();
}

TEST_CASE("wire capture of the handshake and a later TABLE update") {
  auto rt = create_runtime("native");
  rt->add_module("p", lambda_module([](LambdaModule& m) { (void)m.publish("DetectedCoughs", "Int"); }));
  rt->start();
  auto server = start_server(*rt, 0);
  RawPeer peer(server->port());
  auto hello = peer.read_non_control();
  REQUIRE(hello);
  CHECK(hello->type == FrameType::Hello);
  CHECK(decode_hello(hello->payload).instance_id == "native");
  CHECK(decode_hello(hello->payload).version == 1);
  auto table = peer.read_non_control();
  REQUIRE(table);
  CHECK(table->type == FrameType::Table);
  CHECK(decode_table(table->payload) == ChannelTable{{"DetectedCoughs", true, false, "Int"}});

  peer.handshake("sdk", {{"DetectedCoughs", false, true, "Int"}});
  REQUIRE(server->wait_for_peers(1, 3000ms));

  rt->add_module("late", lambda_module([](LambdaModule& m) { m.subscribe("AudioData", "Struct", [](const Envelope&) {}); }));
  auto update = peer.read_non_control();
  REQUIRE(update);
  CHECK(update->type == FrameType::Table);
  CHECK(decode_table(update->payload) ==
        ChannelTable{{"AudioData", false, true, "Struct"}, {"DetectedCoughs", true, false, "Int"}});
  server->stop();
}

TEST_CASE("raw peer: data injection, unknown channels, bad frames") {
  auto rt = create_runtime("native");
  std::atomic<int> hits{0};
  rt->add_module("s", lambda_module([&](LambdaModule& m) {
    m.subscribe("X", "Int", [&](const Envelope& e) {
      CHECK(e.origin_instance == "sdk");
      ++hits;
    });
  }));
  rt->start();
  auto server = start_server(*rt, 0);
  RawPeer peer(server->port());
  peer.handshake("sdk");
  REQUIRE(server->wait_for_peers(1, 3000ms));

  Envelope e;
  e.channel = "X";
  e.payload = std::int64_t{5};
  peer.send(FrameType::Data, encode_data(e));
  e.channel = "Nope";
  peer.send(FrameType::Data, encode_data(e));
  e.channel = "X";
  e.payload = "wrong type";
  peer.send(FrameType::Data, encode_data(e));
  e.payload = std::int64_t{6};
  peer.send(FrameType::Data, encode_data(e));
  REQUIRE(eventually([&] { return hits == 2; }));
  CHECK(server->peers()[0].status == PeerStatus::Connected);

  SUBCASE("truncated DATA resets the connection") {
    auto bytes = encode_frame(FrameType::Data, wire::Bytes{0, 0, 0, 9, 'X'});
    peer.send_raw(bytes);
    CHECK(peer.wait_closed());
    CHECK(eventually([&] { return server->peers()[0].status == PeerStatus::Disconnected; }));
  }
  SUBCASE("PING gets a PONG") {
    peer.send(FrameType::Ping, {});
    bool pong = false;
    for (int i = 0; i < 5 && !pong; ++i) {
      auto f = peer.read();
      pong = f && f->type == FrameType::Pong;
    }
    CHECK(pong);
  }
  server->stop();
}

TEST_CASE("protocol version mismatch closes the connection") {
  auto rt = create_runtime("native");
  rt->start();
  auto server = start_server(*rt, 0);
  RawPeer peer(server->port());
  peer.send(FrameType::Hello, encode_hello({2, "future"}));
  CHECK(peer.wait_closed());
  REQUIRE(server->peers().size() == 1);
  CHECK(eventually([&] { return server->peers()[0].status == PeerStatus::Disconnected; }));
  server->stop();
}

TEST_CASE("a silent peer is dropped after three unanswered pings") {
  auto clock = std::make_shared<VirtualClock>(1000.0);
  RuntimeOptions opts;
  opts.instance_id = "native";
  opts.clock = clock;
  Runtime rt(opts);
  rt.start();
  NetworkServer server(rt, 0);
  server.start();
  RawPeer peer(server.port());
  peer.handshake("mute");
  REQUIRE(server.wait_for_peers(1, 3000ms));
  int pings = 0;
  while (auto f = peer.read(2000ms)) {
    if (f->type == FrameType::Ping) ++pings;
  }
  CHECK(peer.wait_closed(100ms));
  CHECK(pings == PeerLink::kMaxMissedPongs);
  CHECK(eventually([&] { return server.peers()[0].status == PeerStatus::Disconnected; }));
  server.stop();
}

TEST_CASE("client module gated by a link channel") {
  auto factory = std::make_shared<ModuleFactory>();
  factory->add("NetworkServerModule", [] { return std::make_unique<NetworkServerModule>(); });
  factory->add("NetworkClientModule", [] { return std::make_unique<NetworkClientModule>(); });
  auto server_rt = create_runtime("server", 1.0, factory);
  auto edge_rt = create_runtime("edge", 1.0, factory);
  server_rt->register_module("NetworkServerModule", "net", Properties(PropertyMap{{"Port", "0"}}));
  server_rt->start();
  const auto port = server_rt->find_module<NetworkServerModule>("net")->server()->port();

  CHECK(error_of([&] { edge_rt->register_module("NetworkClientModule", "bad", Properties(PropertyMap{{"ConnectTo", "nohost"}})); }) ==
        ErrorCode::InvalidProperty);
  edge_rt->register_module("NetworkClientModule", "client",
                           Properties(PropertyMap{{"ConnectTo", fmt::format("127.0.0.1:{}", port)},
                                                  {"RetryInterval", "50ms"},
                                                  {"LinkChannel", "LinkMode"}}));
  Publisher mode;
  edge_rt->add_module("sched", lambda_module([&](LambdaModule& m) { mode = m.publish("LinkMode", "String"); }));
  edge_rt->start();
  auto* client = edge_rt->find_module<NetworkClientModule>("client")->client();
  REQUIRE(client->wait_connected(5000ms));
  mode.post("Disconnected");
  CHECK(eventually([&] { return client->peer().status == PeerStatus::Disconnected; }));
  std::this_thread::sleep_for(150ms);
  CHECK(client->peer().status == PeerStatus::Disconnected);
  mode.post("WiFi");
  CHECK(client->wait_connected(5000ms));
  edge_rt->stop();
  server_rt->stop();
}
