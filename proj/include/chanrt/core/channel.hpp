#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "chanrt/wire/value.hpp"

namespace chanrt {

/// One published datum.
struct Envelope {
  std::string channel;
  wire::WireValue payload;
  std::string type_name;
  std::uint64_t sequence = 0;  // per publisher, starting at 0
  std::int64_t timestamp_ms = 0;
  std::string origin_instance;
};

using EnvelopeCallback = std::function<void(const Envelope&)>;

/// Subscribing with this type name accepts every payload type and does not
/// fix the channel's type. Until a typed registration arrives the channel's
/// type_name stays empty.
inline constexpr const char* kAnyType = "";

/// Per-channel presence advertised to connected peers.
struct ChannelTableEntry {
  std::string channel;
  bool has_publisher = false;
  bool has_subscriber = false;
  std::string type_name;

  friend bool operator==(const ChannelTableEntry&, const ChannelTableEntry&) = default;
};

using ChannelTable = std::vector<ChannelTableEntry>;

/// Bridge from a runtime to one remote peer. The runtime calls these with its
/// channel lock held, so implementations must not call back into the runtime
/// from inside them.
class RemoteLink {
 public:
  virtual ~RemoteLink() = default;

  /// Every locally posted envelope, in post order.
  virtual void forward(const std::shared_ptr<const Envelope>& envelope) = 0;
  /// Fresh snapshot of the local channel table after any publish/subscribe.
  virtual void local_table_changed(const ChannelTable& table) = 0;
  /// Whether the peer currently has a subscriber for `channel` and is connected.
  [[nodiscard]] virtual bool reaches(const std::string& channel) const = 0;
};

}  // namespace chanrt
