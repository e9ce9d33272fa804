#include "chanrt/sensing/modules.hpp"

#include "chanrt/sensing/saver.hpp"
#include "chanrt/sensing/schedule.hpp"
#include "chanrt/sensing/sensors.hpp"
#include "chanrt/sensing/sync.hpp"

namespace chanrt::sensing {

void register_sensing_modules(ModuleFactory& factory) {
  register_sensor_modules(factory);
  register_saver_module(factory);
  register_schedule_module(factory);
  register_sync_modules(factory);
}

}  // namespace chanrt::sensing
