#include "chanrt/wire/value.hpp"

#include <bit>
#include <stdexcept>

namespace chanrt::wire {

const WireValue* Struct::find(std::string_view name) const {
  for (const auto& [field, value] : fields) {
    if (field == name) return &value;
  }
  return nullptr;
}

const WireValue& Struct::at(std::string_view name) const {
  if (const auto* v = find(name)) return *v;
  throw std::out_of_range("struct " + type_name + " has no field " + std::string(name));
}

Struct& Struct::add(std::string name, WireValue value) {
  fields.emplace_back(std::move(name), std::move(value));
  return *this;
}

std::string_view tag_name(Tag tag) noexcept {
  switch (tag) {
    case Tag::Null: return "Null";
    case Tag::Bool: return "Bool";
    case Tag::Int: return "Int";
    case Tag::Float: return "Float";
    case Tag::String: return "String";
    case Tag::Bytes: return "Bytes";
    case Tag::List: return "List";
    case Tag::Map: return "Map";
    case Tag::Struct: return "Struct";
  }
  return "?";
}

std::string WireValue::type_name() const {
  if (const auto* s = std::get_if<Struct>(&v_)) return s->type_name;
  return std::string(tag_name(tag()));
}

bool operator==(const WireValue& a, const WireValue& b) {
  if (a.v_.index() != b.v_.index()) return false;
  switch (a.tag()) {
    case Tag::Null: return true;
    case Tag::Bool: return a.as<bool>() == b.as<bool>();
    case Tag::Int: return a.as<std::int64_t>() == b.as<std::int64_t>();
    case Tag::Float:
      return std::bit_cast<std::uint64_t>(a.as<double>()) == std::bit_cast<std::uint64_t>(b.as<double>());
    case Tag::String: return a.as<std::string>() == b.as<std::string>();
    case Tag::Bytes: return a.as<Bytes>() == b.as<Bytes>();
    case Tag::List: return a.as<List>() == b.as<List>();
    case Tag::Map: return a.as<Map>() == b.as<Map>();
    case Tag::Struct: {
      const auto& x = a.as<Struct>();
      const auto& y = b.as<Struct>();
      return x.type_name == y.type_name && x.fields == y.fields;
    }
  }
  return false;
}

TypeDescriptor describe(const WireValue& value) {
  TypeDescriptor d{value.type_name(), {}};
  if (value.is<Struct>()) {
    for (const auto& [name, field] : value.as<Struct>().fields) d.fields.emplace_back(name, field.tag());
  }
  return d;
}

}  // namespace chanrt::wire
