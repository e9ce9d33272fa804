#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chanrt/ml/dataset.hpp"
#include "chanrt/ml/metrics.hpp"
#include "chanrt/wire/value.hpp"

namespace chanrt::ml {

/// What the detector reports for one audio chunk, carried as a
/// "CoughDetection" struct.
struct Detection {
  std::int64_t start_ms = 0;
  std::int64_t duration_ms = 0;
  std::uint32_t coughs = 0;
  std::vector<double> probabilities;  // one per window, 0 when skipped
  std::vector<bool> skipped;
  std::vector<double> raw_outputs;  // non-skipped windows, ten values each

  friend bool operator==(const Detection&, const Detection&) = default;
};

wire::WireValue to_wire(const Detection& detection);
/// Throws Error(InvalidStruct).
Detection detection_from_wire(const wire::WireValue& value);

struct FileResult {
  std::string name;
  std::uint32_t expected = 0;
  std::optional<Detection> detection;  // empty when the file timed out

  friend bool operator==(const FileResult&, const FileResult&) = default;
};

struct EvaluationReport {
  std::vector<FileResult> files;
  ConfusionMatrix confusion;  // window level, answered files only
  MetricsReport metrics;
  std::uint64_t missing = 0;
  std::uint64_t expected_events = 0;
  std::uint64_t detected_events = 0;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Window labels come from event centres; a window counts as a positive
/// prediction when its averaged probability exceeds `threshold`.
EvaluationReport evaluate(const std::vector<LabeledFile>& labels, std::vector<std::optional<Detection>> detections,
                          const WindowConfig& window, std::int64_t sampling_rate, double threshold);

/// Raw outputs of every answered file, concatenated in file order.
std::vector<double> all_raw_outputs(const EvaluationReport& report);

/// "file,expected,detected,windows,skipped_windows,positive_windows", one row per file.
std::string evaluation_csv(const EvaluationReport& report, double threshold);
/// Plain-text block with the confusion matrix and the five metrics.
std::string metrics_summary(const EvaluationReport& report);
/// Plain-text block with the deviation fields.
std::string deviation_summary(const std::string& title, const DeviationReport& deviation);

/// Per-file check that quantization cannot have moved any window across the
/// threshold: the largest probability change stays below the smallest
/// distance of a reference probability from the threshold.
struct RobustnessRow {
  std::string name;
  double margin = 0.0;
  double max_shift = 0.0;
  bool condition_holds = false;
  std::uint32_t reference_coughs = 0;
  std::uint32_t candidate_coughs = 0;
};

/// Throws Error(LengthMismatch) if the reports cover different files or windows.
std::vector<RobustnessRow> robustness_rows(const EvaluationReport& reference, const EvaluationReport& candidate,
                                           double threshold);
std::string robustness_csv(const std::vector<RobustnessRow>& rows);

}  // namespace chanrt::ml
