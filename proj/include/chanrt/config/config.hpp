#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chanrt/core/runtime.hpp"

namespace chanrt::config {

struct ModuleConfig {
  std::string class_name;
  /// The `id` attribute, or class_name followed by the module's position in
  /// the file.
  std::string instance_name;
  Properties properties;
};

struct HostConfig {
  std::vector<ModuleConfig> modules;
};

/// Accepts top-level <Module class="..."> elements, optionally wrapped in a
/// single root element. Child elements become properties; elements with
/// children become nested maps; repeated names become lists. Text is trimmed.
/// Throws Error(MalformedXml), Error(MissingClassAttribute) or
/// Error(DuplicateInstanceName).
HostConfig parse_config(const std::string& xml_text);
HostConfig load_config_file(const std::filesystem::path& path);

/// Checks every class against `factory` before constructing anything, then
/// registers the modules in file order (configure() runs for each). The
/// runtime must not be started yet. Throws Error(UnknownModuleClass) or
/// whatever a module's configure() rejects.
std::vector<ModuleHandle> load_modules(Runtime& runtime, const HostConfig& config, const ModuleFactory& factory);

}  // namespace chanrt::config
