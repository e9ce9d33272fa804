#pragma once

#include "chanrt/core/runtime.hpp"

namespace chanrt::sensing {

/// Sensors, saver, connectivity schedule, sync and receiver.
void register_sensing_modules(ModuleFactory& factory);

}  // namespace chanrt::sensing
