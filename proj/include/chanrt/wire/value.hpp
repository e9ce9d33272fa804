#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace chanrt::wire {

// One-byte tags of the binary encoding.
enum class Tag : std::uint8_t {
  Null = 0x00,
  Bool = 0x01,
  Int = 0x02,
  Float = 0x03,
  String = 0x04,
  Bytes = 0x05,
  List = 0x06,
  Map = 0x07,
  Struct = 0x08,
};

class WireValue;

using Bytes = std::vector<std::uint8_t>;
using List = std::vector<WireValue>;
// std::string ordering is unsigned-byte lexicographic, which is the canonical
// key order of the encoding.
using Map = std::map<std::string, WireValue>;

struct Null {
  friend bool operator==(Null, Null) { return true; }
};

struct Struct {
  std::string type_name;
  std::vector<std::pair<std::string, WireValue>> fields;

  // Linear lookup; structs are small.
  [[nodiscard]] const WireValue* find(std::string_view name) const;
  [[nodiscard]] const WireValue& at(std::string_view name) const;
  Struct& add(std::string name, WireValue value);
};

/// Self-describing payload value carried on channels and written to disk.
///
/// Equality is structural; floats compare by bit pattern so NaN payloads
/// survive a round trip and compare equal to themselves.
class WireValue {
 public:
  using Storage = std::variant<Null, bool, std::int64_t, double, std::string, Bytes, List, Map, Struct>;

  WireValue() : v_(Null{}) {}
  WireValue(Null) : v_(Null{}) {}
  WireValue(bool b) : v_(b) {}
  WireValue(std::int64_t i) : v_(i) {}
  WireValue(int i) : v_(static_cast<std::int64_t>(i)) {}
  WireValue(double d) : v_(d) {}
  WireValue(std::string s) : v_(std::move(s)) {}
  WireValue(const char* s) : v_(std::string(s)) {}
  WireValue(Bytes b) : v_(std::move(b)) {}
  WireValue(List l) : v_(std::move(l)) {}
  WireValue(Map m) : v_(std::move(m)) {}
  WireValue(Struct s) : v_(std::move(s)) {}

  [[nodiscard]] Tag tag() const noexcept { return static_cast<Tag>(v_.index()); }

  template <typename T>
  [[nodiscard]] bool is() const noexcept {
    return std::holds_alternative<T>(v_);
  }
  template <typename T>
  [[nodiscard]] const T& as() const {
    return std::get<T>(v_);
  }
  template <typename T>
  [[nodiscard]] T& as() {
    return std::get<T>(v_);
  }

  [[nodiscard]] const Storage& storage() const noexcept { return v_; }

  /// Channel-level type name: the struct's type_name, or the tag name for
  /// every other kind ("Int", "String", ...).
  [[nodiscard]] std::string type_name() const;

  friend bool operator==(const WireValue& a, const WireValue& b);
  friend bool operator!=(const WireValue& a, const WireValue& b) { return !(a == b); }

 private:
  Storage v_;
};

std::string_view tag_name(Tag tag) noexcept;

/// Schema of a value: its type name and the ordered (field, tag) list for
/// structs; empty field list for every other kind.
struct TypeDescriptor {
  std::string type_name;
  std::vector<std::pair<std::string, Tag>> fields;

  friend bool operator==(const TypeDescriptor&, const TypeDescriptor&) = default;
};

TypeDescriptor describe(const WireValue& value);

}  // namespace chanrt::wire
