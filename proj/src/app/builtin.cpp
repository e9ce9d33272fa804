#include "chanrt/app/builtin.hpp"

#include "chanrt/ml/modules.hpp"
#include "chanrt/net/network.hpp"
#include "chanrt/sensing/modules.hpp"

namespace chanrt::app {

std::shared_ptr<const ModuleFactory> builtin_factory() {
  static const auto factory = [] {
    auto f = std::make_shared<ModuleFactory>();
    f->add("NetworkServerModule", [] { return std::make_unique<net::NetworkServerModule>(); });
    f->add("NetworkClientModule", [] { return std::make_unique<net::NetworkClientModule>(); });
    sensing::register_sensing_modules(*f);
    ml::register_ml_modules(*f);
    return f;
  }();
  return factory;
}

}  // namespace chanrt::app
