#pragma once

#include <chrono>
#include <filesystem>
#include <vector>

#include "chanrt/ml/evaluation.hpp"

namespace chanrt::app {

struct MlLoopOptions {
  std::filesystem::path edge_config;    // detector side, needs a NetworkClientModule
  std::filesystem::path server_config;  // evaluator side, needs a NetworkServerModule
  std::filesystem::path dataset_dir;    // overrides the evaluator's Dataset when set
  std::filesystem::path out_dir;
  int quantize_bits = 8;
  std::chrono::milliseconds pass_timeout{std::chrono::minutes(10)};
};

struct MlLoopResult {
  double threshold = 0.5;
  ml::EvaluationReport reference;  // edge as configured
  ml::EvaluationReport replica;    // the same edge config on a second instance
  ml::EvaluationReport candidate;  // edge with quantized weights
  ml::EvaluationReport local;      // edge and evaluator in one instance
  ml::DeviationReport replica_deviation;
  ml::DeviationReport candidate_deviation;
  std::vector<ml::RobustnessRow> robustness;
  bool local_matches_remote = false;
};

/// Runs the dataset through the edge pipeline four times: three times over
/// loopback TCP (reference, replica, quantized candidate) and once with both
/// configs loaded into a single instance. Both configs are used as written
/// except that the server binds an ephemeral port and the client is pointed
/// at it. Writes evaluation.csv, deviation.csv, robustness.csv and
/// summary.txt to out_dir, plus each pass's own report in a subdirectory.
/// Throws Error(InvalidProperty) for unusable configs and Error(Timeout) if a
/// pass does not finish in time.
MlLoopResult run_mlloop(const MlLoopOptions& options);

std::string mlloop_summary(const MlLoopResult& result);

}  // namespace chanrt::app
