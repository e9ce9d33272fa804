#pragma once

#include <memory>

#include "chanrt/core/runtime.hpp"

namespace chanrt::app {

/// Every module class shipped with the runtime: network, sensing and ML.
std::shared_ptr<const ModuleFactory> builtin_factory();

}  // namespace chanrt::app
