#include "chanrt/app/mlloop.hpp"

#include <algorithm>
#include <span>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "chanrt/app/builtin.hpp"
#include "chanrt/config/config.hpp"
#include "chanrt/core/files.hpp"
#include "chanrt/error.hpp"
#include "chanrt/ml/modules.hpp"
#include "chanrt/net/network.hpp"

namespace chanrt::app {

namespace fs = std::filesystem;
using config::HostConfig;
using config::ModuleConfig;

namespace {

constexpr std::string_view kEvaluator[] = {"CoughEvaluatorModule"};
constexpr std::string_view kDetector[] = {"CoughDetectorModule", "TensorFlowLiteModule"};
constexpr std::string_view kServer[] = {"NetworkServerModule"};
constexpr std::string_view kClient[] = {"NetworkClientModule"};

bool is_class(const ModuleConfig& m, std::span<const std::string_view> classes) {
  return std::find(classes.begin(), classes.end(), m.class_name) != classes.end();
}

ModuleConfig& find_one(HostConfig& cfg, std::span<const std::string_view> classes, const fs::path& source) {
  for (auto& m : cfg.modules) {
    if (is_class(m, classes)) return m;
  }
  throw Error(ErrorCode::InvalidProperty, fmt::format("{} has no {} module", source.string(), classes.front()));
}


std::unique_ptr<Runtime> boot(const std::string& id, const HostConfig& cfg) {
  auto rt = std::make_unique<Runtime>(RuntimeOptions{id, 1.0, nullptr, builtin_factory()});
  config::load_modules(*rt, cfg, *builtin_factory());
  rt->start();
  return rt;
}

ml::EvaluationReport await(Runtime& rt, const std::string& evaluator, std::chrono::milliseconds timeout,
                           const std::string& pass) {
  auto* eval = rt.find_module<ml::CoughEvaluatorModule>(evaluator);
  if (eval == nullptr) throw Error(ErrorCode::InvalidProperty, "evaluator instance is not a CoughEvaluatorModule");
  if (!eval->wait_done(timeout)) throw Error(ErrorCode::Timeout, fmt::format("{} pass unfinished", pass));
  return *eval->report();
}

ml::EvaluationReport remote_pass(HostConfig server_cfg, HostConfig edge_cfg, const std::string& edge_id,
                                 const fs::path& report_dir, std::chrono::milliseconds timeout, const std::string& pass) {
  auto& evaluator = find_one(server_cfg, kEvaluator, "server config");
  evaluator.properties.set("ReportDir", report_dir.string());
  auto& listener = find_one(server_cfg, kServer, "server config");
  listener.properties.set("Port", "0");

  auto server = boot("server", server_cfg);
  auto* net = server->find_module<net::NetworkServerModule>(listener.instance_name);
  find_one(edge_cfg, kClient, "edge config").properties.set("ConnectTo", fmt::format("127.0.0.1:{}", net->server()->port()));
  std::unique_ptr<Runtime> edge;
  try {
    edge = boot(edge_id, edge_cfg);
    auto report = await(*server, evaluator.instance_name, timeout, pass);
    edge->stop();
    server->stop();
    return report;
  } catch (...) {
    if (edge) edge->stop();
    server->stop();
    throw;
  }
}

ml::EvaluationReport local_pass(const HostConfig& server_cfg, const HostConfig& edge_cfg, const fs::path& report_dir,
                                std::chrono::milliseconds timeout) {
  HostConfig merged;
  std::string evaluator;
  for (const auto& [prefix, cfg] : {std::pair{"server.", &server_cfg}, std::pair{"edge.", &edge_cfg}}) {
    for (auto m : cfg->modules) {
      if (is_class(m, kServer) || is_class(m, kClient)) continue;
      m.instance_name = prefix + m.instance_name;
      if (is_class(m, kEvaluator)) {
        m.properties.set("ReportDir", report_dir.string());
        evaluator = m.instance_name;
      }
      merged.modules.push_back(std::move(m));
    }
  }
  auto rt = boot("solo", merged);
  try {
    auto report = await(*rt, evaluator, timeout, "local");
    rt->stop();
    return report;
  } catch (...) {
    rt->stop();
    throw;
  }
}

// Raw outputs of the files both reports answered.
ml::DeviationReport compare(const ml::EvaluationReport& a, const ml::EvaluationReport& b) {
  std::vector<double> xa, xb;
  for (std::size_t i = 0; i < std::min(a.files.size(), b.files.size()); ++i) {
    const auto& da = a.files[i].detection;
    const auto& db = b.files[i].detection;
    if (!da || !db) continue;
    xa.insert(xa.end(), da->raw_outputs.begin(), da->raw_outputs.end());
    xb.insert(xb.end(), db->raw_outputs.begin(), db->raw_outputs.end());
  }
  return ml::deviation_report(xa, xb);
}

std::string deviation_csv(const MlLoopResult& r) {
  std::string out = "comparison,total_values,equal_values,different_values,max_difference,mean_difference\n";
  for (const auto& [name, d] : {std::pair{"replica", &r.replica_deviation}, std::pair{"quantized", &r.candidate_deviation}}) {
    out += fmt::format("{},{},{},{},{:.9e},{:.9e}\n", name, d->total_values, d->equal_values, d->different_values,
                       d->max_difference, d->mean_difference);
  }
  return out;
}

}  // namespace

MlLoopResult run_mlloop(const MlLoopOptions& options) {
  auto server_cfg = config::load_config_file(options.server_config);
  auto edge_cfg = config::load_config_file(options.edge_config);
  auto& evaluator = find_one(server_cfg, kEvaluator, options.server_config);
  if (!options.dataset_dir.empty()) evaluator.properties.set("Dataset", options.dataset_dir.string());
  find_one(server_cfg, kServer, options.server_config);
  find_one(edge_cfg, kClient, options.edge_config);
  const auto detector = find_one(edge_cfg, kDetector, options.edge_config).instance_name;

  MlLoopResult r;
  r.threshold = evaluator.properties.number_or("Threshold", 0.5);
  const auto& out = options.out_dir;

  spdlog::info("mlloop: reference pass");
  r.reference = remote_pass(server_cfg, edge_cfg, "edge", out / "reference", options.pass_timeout, "reference");
  spdlog::info("mlloop: replica pass");
  r.replica = remote_pass(server_cfg, edge_cfg, "edge-replica", out / "replica", options.pass_timeout, "replica");
  spdlog::info("mlloop: quantized pass ({} bits)", options.quantize_bits);
  auto quantized_cfg = edge_cfg;
  for (auto& m : quantized_cfg.modules) {
    if (m.instance_name == detector) m.properties.set("Quantize", std::to_string(options.quantize_bits));
  }
  r.candidate = remote_pass(server_cfg, quantized_cfg, "edge-quantized", out / "quantized", options.pass_timeout, "quantized");
  spdlog::info("mlloop: single-instance pass");
  r.local = local_pass(server_cfg, edge_cfg, out / "local", options.pass_timeout);

  r.replica_deviation = compare(r.reference, r.replica);
  r.candidate_deviation = compare(r.reference, r.candidate);
  r.robustness = ml::robustness_rows(r.reference, r.candidate, r.threshold);
  r.local_matches_remote = r.local == r.reference;

  write_text_atomic(out / "evaluation.csv", ml::evaluation_csv(r.reference, r.threshold));
  write_text_atomic(out / "deviation.csv", deviation_csv(r));
  write_text_atomic(out / "robustness.csv", ml::robustness_csv(r.robustness));
  write_text_atomic(out / "summary.txt", mlloop_summary(r));
  return r;
}

std::string mlloop_summary(const MlLoopResult& r) {
  std::string out = "Evaluation (reference edge)\n";
  out += ml::metrics_summary(r.reference);
  out += '\n';
  out += ml::deviation_summary("Deviations in model outputs: replica instance", r.replica_deviation);
  out += '\n';
  out += ml::deviation_summary("Deviations in model outputs: quantized weights", r.candidate_deviation);
  const auto holds = std::count_if(r.robustness.begin(), r.robustness.end(), [](const auto& x) { return x.condition_holds; });
  const auto equal = std::count_if(r.robustness.begin(), r.robustness.end(),
                                   [](const auto& x) { return x.reference_coughs == x.candidate_coughs; });
  const auto equal_where_holds = std::count_if(r.robustness.begin(), r.robustness.end(), [](const auto& x) {
    return x.condition_holds && x.reference_coughs == x.candidate_coughs;
  });
  out += fmt::format("\nThreshold margin holds for {} of {} files; counts equal there: {}; counts equal overall: {}\n", holds,
                     r.robustness.size(), equal_where_holds, equal);
  out += fmt::format("Quantized detected coughs: {} (reference {})\n", r.candidate.detected_events, r.reference.detected_events);
  out += fmt::format("Single-instance report identical to TCP report: {}\n", r.local_matches_remote ? "yes" : "no");
  return out;
}

}  // namespace chanrt::app
