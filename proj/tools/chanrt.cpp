// chanrt: boot a configured instance, or run the experiment harnesses.
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "chanrt/app/builtin.hpp"
#include "chanrt/app/mlloop.hpp"
#include "chanrt/config/config.hpp"
#include "chanrt/core/files.hpp"
#include "chanrt/error.hpp"
#include "chanrt/ml/dataset.hpp"
#include "chanrt/net/network.hpp"
#include "chanrt/sensing/coverage.hpp"

namespace fs = std::filesystem;
using namespace chanrt;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedXml:
    case ErrorCode::MissingClassAttribute:
    case ErrorCode::InvalidProperty:
    case ErrorCode::UnknownModuleClass:
    case ErrorCode::DuplicateInstanceName:
    case ErrorCode::EmptyInstanceId:
    case ErrorCode::UnknownSensorId:
      return kConfigError;
    default:
      return kRuntimeError;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("chanrt");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("CHANRT_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

std::int64_t parse_duration(const std::string& flag, const std::string& text) {
  try {
    return Properties(PropertyMap{{flag, text}}).duration_ms(flag);
  } catch (const Error&) {
    throw CLI::ValidationError(flag, "expected a duration such as 90s, 2m or 24h");
  }
}

// Blocks SIGINT/SIGTERM in every thread started after this call, so the main
// thread can collect them with sigtimedwait.
sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

bool wait_signal(const sigset_t& set, std::chrono::milliseconds slice) {
  timespec ts{static_cast<time_t>(slice.count() / 1000), static_cast<long>(slice.count() % 1000) * 1'000'000};
  return sigtimedwait(&set, nullptr, &ts) > 0;
}

// Runs until a stop signal or, when `for_ms` is positive, until that much
// virtual time has passed.
void serve(Runtime& rt, const sigset_t& signals, std::int64_t for_ms) {
  const auto until = rt.now_ms() + for_ms;
  while (!wait_signal(signals, std::chrono::milliseconds(100))) {
    if (for_ms > 0 && rt.now_ms() >= until) {
      rt.run_until(until);
      break;
    }
  }
}

// Clock whose virtual time reads the epoch at the Unix instant `start_unix_ms`,
// so separate processes given the same instant agree on virtual time. Null
// when unset; the runtime then starts its own clock at the epoch.
std::shared_ptr<VirtualClock> clock_from(double time_scale, std::optional<std::int64_t> start_unix_ms) {
  if (!start_unix_ms) return nullptr;
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now().time_since_epoch());
  return std::make_shared<VirtualClock>(time_scale, VirtualClock::kDefaultEpochMs,
                                        std::chrono::milliseconds(*start_unix_ms) - now);
}

struct RunArgs {
  fs::path config;
  std::string id = "edge";
  double time_scale = 1.0;
  std::string for_text;
  std::optional<std::int64_t> clock_start;
};

int cmd_run(const RunArgs& a, const sigset_t& signals) {
  const auto for_ms = a.for_text.empty() ? 0 : parse_duration("--for", a.for_text);
  const auto cfg = config::load_config_file(a.config);
  auto rt = std::make_unique<Runtime>(
      RuntimeOptions{a.id, a.time_scale, clock_from(a.time_scale, a.clock_start), app::builtin_factory()});
  const auto handles = config::load_modules(*rt, cfg, *app::builtin_factory());
  rt->start();
  spdlog::info("{}: {} modules running at time scale {}", a.id, handles.size(), a.time_scale);
  serve(*rt, signals, for_ms);
  rt->stop();
  spdlog::info("{}: stopped", a.id);
  return kOk;
}

struct CoverageArgs {
  fs::path data_dir;
  fs::path rates;
  fs::path out;
  std::int64_t epoch_ms = VirtualClock::kDefaultEpochMs;
  std::int64_t hours = 24;
};

int cmd_coverage(const CoverageArgs& a) {
  const auto rates = sensing::read_rates_csv(a.rates);
  const auto report = sensing::coverage_report(sensing::scan_timestamps(a.data_dir, rates), rates, a.epoch_ms, a.hours);
  const auto csv = sensing::coverage_csv(report);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text_atomic(a.out, csv);
  }
  return kOk;
}

int cmd_mlloop(const app::MlLoopOptions& o) {
  const auto r = app::run_mlloop(o);
  std::cout << app::mlloop_summary(r);
  return kOk;
}

struct SyncServeArgs {
  fs::path root;
  std::uint16_t port = 4000;
  double time_scale = 1.0;
  std::string for_text;
  std::optional<std::int64_t> clock_start;
};

int cmd_sync_serve(const SyncServeArgs& a, const sigset_t& signals) {
  const auto for_ms = a.for_text.empty() ? 0 : parse_duration("--for", a.for_text);
  auto rt = std::make_unique<Runtime>(
      RuntimeOptions{"server", a.time_scale, clock_from(a.time_scale, a.clock_start), app::builtin_factory()});
  rt->register_module("DataReceiverModule", "receiver", Properties(PropertyMap{{"StoragePath", a.root.string()}}));
  rt->register_module("NetworkServerModule", "net", Properties(PropertyMap{{"Port", std::to_string(a.port)}}));
  rt->start();
  spdlog::info("receiving into {} on port {}", a.root.string(), rt->find_module<net::NetworkServerModule>("net")->server()->port());
  serve(*rt, signals, for_ms);
  rt->stop();
  return kOk;
}

int cmd_gen_dataset(const fs::path& out, const ml::DatasetConfig& c) {
  const auto labels = ml::generate_dataset(out, c);
  std::size_t events = 0;
  for (const auto& l : labels) events += l.events.size();
  std::cout << fmt::format("{} files, {} events in {}\n", labels.size(), events, out.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  const auto signals = block_stop_signals();

  CLI::App app{"Channel-based module runtime"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Boot one instance from an XML config");
  run_cmd->add_option("--config", run.config, "Module configuration")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--id", run.id, "Instance id")->capture_default_str();
  run_cmd->add_option("--time-scale", run.time_scale, "Virtual seconds per real second")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run_cmd->add_option("--for", run.for_text, "Stop after this much virtual time (default: until interrupted)");
  run_cmd->add_option("--clock-start", run.clock_start, "Unix time in ms at which the virtual clock reads its epoch");

  CoverageArgs cov;
  auto* cov_cmd = app.add_subcommand("coverage", "Per sensor-hour sampling coverage of a data directory");
  cov_cmd->add_option("--data-dir", cov.data_dir, "Saved data root")->required()->check(CLI::ExistingDirectory);
  cov_cmd->add_option("--rates", cov.rates, "CSV sensor_id,rate_hz,channel")->required()->check(CLI::ExistingFile);
  cov_cmd->add_option("--out", cov.out, "Output CSV (default: stdout)");
  cov_cmd->add_option("--epoch-ms", cov.epoch_ms, "Start of hour 0")->capture_default_str();
  cov_cmd->add_option("--hours", cov.hours, "Hours to report")->check(CLI::PositiveNumber)->capture_default_str();

  app::MlLoopOptions ml;
  auto* ml_cmd = app.add_subcommand("mlloop", "Stream a labelled dataset through an edge detector and compare variants");
  ml_cmd->add_option("--edge-config", ml.edge_config, "Edge configuration")->required()->check(CLI::ExistingFile);
  ml_cmd->add_option("--server-config", ml.server_config, "Evaluator configuration")->required()->check(CLI::ExistingFile);
  ml_cmd->add_option("--dataset", ml.dataset_dir, "Dataset directory (overrides the evaluator's)")->check(CLI::ExistingDirectory);
  ml_cmd->add_option("--out", ml.out_dir, "Report directory")->required();
  ml_cmd->add_option("--quantize", ml.quantize_bits, "Bits for the quantized pass")->check(CLI::IsMember({8, 16}))->capture_default_str();

  SyncServeArgs sync;
  auto* sync_cmd = app.add_subcommand("sync-serve", "Receive uploads from DataSyncModule clients");
  sync_cmd->add_option("--root", sync.root, "Storage root")->required();
  sync_cmd->add_option("--port", sync.port, "TCP port (0 picks one)")->capture_default_str();
  sync_cmd->add_option("--time-scale", sync.time_scale, "Virtual seconds per real second")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sync_cmd->add_option("--for", sync.for_text, "Stop after this much virtual time");
  sync_cmd->add_option("--clock-start", sync.clock_start, "Unix time in ms at which the virtual clock reads its epoch");

  fs::path gen_out;
  ml::DatasetConfig gen;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Write the synthetic labelled cough dataset");
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_option("--files", gen.files, "Number of files")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--events", gen.events, "Total labelled events")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run, signals);
    if (*cov_cmd) return cmd_coverage(cov);
    if (*ml_cmd) return cmd_mlloop(ml);
    if (*sync_cmd) return cmd_sync_serve(sync, signals);
    if (*gen_cmd) return cmd_gen_dataset(gen_out, gen);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  }
  return kOk;
}
