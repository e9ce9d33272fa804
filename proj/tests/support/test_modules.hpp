#pragma once

#include <functional>
#include <utility>

#include "chanrt/core/runtime.hpp"

namespace chanrt::testing {

// Module whose initialize() is a lambda; exposes the protected API so tests
// can wire channels and timers inline.
class LambdaModule : public Module {
 public:
  using Init = std::function<void(LambdaModule&)>;

  explicit LambdaModule(Init init) : init_(std::move(init)) {}

  void initialize() override {
    ++initialize_calls;
    if (init_) init_(*this);
  }

  using Module::cancel_timer;
  using Module::defer;
  using Module::now_ms;
  using Module::publish;
  using Module::register_periodic;
  using Module::register_scheduled;
  using Module::subscribe;

  int initialize_calls = 0;

 private:
  Init init_;
};

inline std::unique_ptr<LambdaModule> lambda_module(LambdaModule::Init init) {
  return std::make_unique<LambdaModule>(std::move(init));
}

}  // namespace chanrt::testing
