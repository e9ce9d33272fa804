#include "chanrt/core/properties.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "chanrt/error.hpp"

namespace chanrt {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void invalid(std::string_view key, const std::string& why) {
  throw Error(ErrorCode::InvalidProperty, std::string(key) + ": " + why);
}

}  // namespace

std::int64_t parse_duration_ms(std::string_view text) {
  auto s = trim(text);
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || end == s.data() || value < 0) {
    throw Error(ErrorCode::InvalidProperty, "bad duration '" + std::string(text) + "'");
  }
  const std::string_view unit(end, static_cast<std::size_t>(s.data() + s.size() - end));
  if (unit.empty() || unit == "ms") return value;
  if (unit == "s") return value * 1000;
  if (unit == "m") return value * 60'000;
  if (unit == "h") return value * 3'600'000;
  throw Error(ErrorCode::InvalidProperty, "bad duration unit in '" + std::string(text) + "'");
}

bool Properties::has(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }

const PropertyValue& Properties::at(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) invalid(key, "missing");
  return it->second;
}

std::string Properties::string(std::string_view key) const {
  const auto& v = at(key);
  if (!v.is_scalar()) invalid(key, "expected a scalar value");
  return std::string(trim(v.scalar()));
}

std::string Properties::string_or(std::string_view key, std::string fallback) const {
  return has(key) ? string(key) : std::move(fallback);
}

std::int64_t Properties::integer(std::string_view key) const {
  const auto s = string(key);
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || end != s.data() + s.size()) invalid(key, "expected an integer, got '" + s + "'");
  return value;
}

std::int64_t Properties::integer_or(std::string_view key, std::int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

double Properties::number(std::string_view key) const {
  const auto s = string(key);
  // Rationals such as "1/60" are accepted for rates.
  if (auto slash = s.find('/'); slash != std::string::npos) {
    try {
      std::size_t a = 0;
      std::size_t b = 0;
      const double num = std::stod(s.substr(0, slash), &a);
      const double den = std::stod(s.substr(slash + 1), &b);
      if (a == slash && b == s.size() - slash - 1 && den != 0.0) return num / den;
    } catch (const std::exception&) {
    }
    invalid(key, "expected a number, got '" + s + "'");
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  invalid(key, "expected a number, got '" + s + "'");
}

double Properties::number_or(std::string_view key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::int64_t Properties::duration_ms(std::string_view key) const {
  try {
    return parse_duration_ms(string(key));
  } catch (const Error&) {
    invalid(key, "expected a duration such as 6s, got '" + string(key) + "'");
  }
}

std::int64_t Properties::duration_ms_or(std::string_view key, std::int64_t fallback) const {
  return has(key) ? duration_ms(key) : fallback;
}

bool Properties::boolean_or(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto s = string(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  invalid(key, "expected a boolean, got '" + s + "'");
}

PropertyList Properties::list(std::string_view key) const {
  if (!has(key)) return {};
  const auto& v = at(key);
  if (v.is_list()) return v.list();
  return {v};
}

Properties Properties::nested(std::string_view key) const {
  const auto& v = at(key);
  if (!v.is_map()) invalid(key, "expected nested elements");
  return Properties(v.map());
}

}  // namespace chanrt
