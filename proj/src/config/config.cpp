#include "chanrt/config/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace chanrt::config {

namespace pt = boost::property_tree;

namespace {

bool is_meta(const std::string& key) { return key == "<xmlattr>" || key == "<xmlcomment>"; }

bool has_elements(const pt::ptree& node) {
  for (const auto& [key, _] : node) {
    if (!is_meta(key)) return true;
  }
  return false;
}

PropertyValue to_property(const pt::ptree& node);

PropertyMap to_map(const pt::ptree& node) {
  PropertyMap out;
  for (const auto& [key, child] : node) {
    if (is_meta(key)) continue;
    auto value = to_property(child);
    auto it = out.find(key);
    if (it == out.end()) {
      out.emplace(key, std::move(value));
    } else if (it->second.is_list()) {
      auto list = it->second.list();
      list.push_back(std::move(value));
      it->second = PropertyValue(std::move(list));
    } else {
      it->second = PropertyValue(PropertyList{it->second, std::move(value)});
    }
  }
  return out;
}

PropertyValue to_property(const pt::ptree& node) {
  if (has_elements(node)) return PropertyValue(to_map(node));
  return PropertyValue(node.data());
}

ModuleConfig module_from(const pt::ptree& node, std::size_t index) {
  ModuleConfig m;
  const auto cls = node.get_optional<std::string>("<xmlattr>.class");
  if (!cls || cls->empty()) {
    throw Error(ErrorCode::MissingClassAttribute, fmt::format("Module element #{} has no class attribute", index));
  }
  m.class_name = *cls;
  m.instance_name = node.get<std::string>("<xmlattr>.id", m.class_name + std::to_string(index));
  m.properties = Properties(to_map(node));
  return m;
}

}  // namespace

HostConfig parse_config(const std::string& xml_text) {
  pt::ptree tree;
  try {
    std::istringstream in(xml_text);
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, fmt::format("line {}: {}", e.line(), e.message()));
  }

  // Either the modules sit at the top, or inside exactly one wrapper element.
  const pt::ptree* scope = &tree;
  if (tree.count("Module") == 0) {
    const pt::ptree* wrapper = nullptr;
    for (const auto& [key, child] : tree) {
      if (is_meta(key)) continue;
      if (wrapper != nullptr) throw Error(ErrorCode::MalformedXml, "expected Module elements or one root element");
      wrapper = &child;
    }
    if (wrapper != nullptr) scope = wrapper;
  }

  HostConfig config;
  std::set<std::string> names;
  for (const auto& [key, child] : *scope) {
    if (is_meta(key)) continue;
    if (key != "Module") throw Error(ErrorCode::MalformedXml, fmt::format("unexpected element <{}>", key));
    auto m = module_from(child, config.modules.size());
    if (!names.insert(m.instance_name).second) throw Error(ErrorCode::DuplicateInstanceName, m.instance_name);
    config.modules.push_back(std::move(m));
  }
  return config;
}

HostConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::vector<ModuleHandle> load_modules(Runtime& runtime, const HostConfig& config, const ModuleFactory& factory) {
  for (const auto& m : config.modules) {
    if (!factory.contains(m.class_name)) {
      throw Error(ErrorCode::UnknownModuleClass, fmt::format("{} (module '{}')", m.class_name, m.instance_name));
    }
  }
  std::vector<ModuleHandle> handles;
  for (const auto& m : config.modules) {
    handles.push_back(runtime.add_module(m.instance_name, factory.create(m.class_name), m.class_name, m.properties));
  }
  return handles;
}

}  // namespace chanrt::config
