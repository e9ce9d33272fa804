#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chanrt {

class PropertyValue;
using PropertyMap = std::map<std::string, PropertyValue>;
using PropertyList = std::vector<PropertyValue>;

/// A configuration value: a scalar string, a nested map, or a list (repeated
/// elements). Modules interpret scalars themselves.
class PropertyValue {
 public:
  PropertyValue() : v_(std::string{}) {}
  PropertyValue(std::string s) : v_(std::move(s)) {}
  PropertyValue(const char* s) : v_(std::string(s)) {}
  PropertyValue(PropertyMap m) : v_(std::move(m)) {}
  PropertyValue(PropertyList l) : v_(std::move(l)) {}

  [[nodiscard]] bool is_scalar() const noexcept { return std::holds_alternative<std::string>(v_); }
  [[nodiscard]] bool is_map() const noexcept { return std::holds_alternative<PropertyMap>(v_); }
  [[nodiscard]] bool is_list() const noexcept { return std::holds_alternative<PropertyList>(v_); }

  [[nodiscard]] const std::string& scalar() const { return std::get<std::string>(v_); }
  [[nodiscard]] const PropertyMap& map() const { return std::get<PropertyMap>(v_); }
  [[nodiscard]] const PropertyList& list() const { return std::get<PropertyList>(v_); }

  friend bool operator==(const PropertyValue&, const PropertyValue&) = default;

 private:
  std::variant<std::string, PropertyMap, PropertyList> v_;
};

/// "<integer><unit>" with unit in {ms, s, m, h}; bare integers are
/// milliseconds. Throws Error(InvalidProperty).
std::int64_t parse_duration_ms(std::string_view text);

/// Typed read access over a module's property map. Every accessor throws
/// Error(InvalidProperty) naming the key when the value is missing or does
/// not parse.
class Properties {
 public:
  Properties() = default;
  Properties(PropertyMap values) : values_(std::move(values)) {}

  [[nodiscard]] bool has(std::string_view key) const;
  [[nodiscard]] const PropertyValue& at(std::string_view key) const;

  [[nodiscard]] std::string string(std::string_view key) const;
  [[nodiscard]] std::string string_or(std::string_view key, std::string fallback) const;
  [[nodiscard]] std::int64_t integer(std::string_view key) const;
  [[nodiscard]] std::int64_t integer_or(std::string_view key, std::int64_t fallback) const;
  [[nodiscard]] double number(std::string_view key) const;
  [[nodiscard]] double number_or(std::string_view key, double fallback) const;
  [[nodiscard]] std::int64_t duration_ms(std::string_view key) const;
  [[nodiscard]] std::int64_t duration_ms_or(std::string_view key, std::int64_t fallback) const;
  [[nodiscard]] bool boolean_or(std::string_view key, bool fallback) const;

  /// Repeated elements come back as-is; a single element is wrapped in a
  /// one-item list; a missing key gives an empty list.
  [[nodiscard]] PropertyList list(std::string_view key) const;
  [[nodiscard]] Properties nested(std::string_view key) const;

  [[nodiscard]] const PropertyMap& values() const noexcept { return values_; }
  void set(std::string key, PropertyValue value) { values_.insert_or_assign(std::move(key), std::move(value)); }

 private:
  PropertyMap values_;
};

}  // namespace chanrt
