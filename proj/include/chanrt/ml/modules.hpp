#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "chanrt/core/audio.hpp"
#include "chanrt/core/runtime.hpp"
#include "chanrt/ml/evaluation.hpp"
#include "chanrt/ml/model.hpp"

namespace chanrt::ml {

/// Sliding windows, band spectrogram and the five-model ensemble over every
/// AudioData chunk; posts one "CoughDetection" per chunk.
///
/// Properties: Input (AudioData), Output (DetectedCoughs), Model (a .json
/// ensemble; any other name selects the built-in detector), Seed (42),
/// Quantize (0, 8 or 16 bits), Bands (32), WindowLength (512), Hop (600),
/// SilenceRms (1e-4), Threshold and MinRun (override the model's), Parallel
/// (true). Acceleration is accepted; inference always runs on the CPU.
class CoughDetectorModule : public Module {
 public:
  void configure(const Properties& properties) override;
  void initialize() override;

  [[nodiscard]] const EnsembleSpec& ensemble() const noexcept { return ensemble_; }
  [[nodiscard]] const WindowConfig& window() const noexcept { return window_; }
  [[nodiscard]] std::uint64_t processed() const noexcept { return processed_; }
  [[nodiscard]] std::uint64_t failed() const noexcept { return failed_; }

  /// The whole per-chunk computation, usable without a runtime.
  [[nodiscard]] Detection detect(const AudioView& audio) const;

 private:
  void on_audio(const Envelope& envelope);

  std::string input_ = "AudioData";
  std::string output_ = "DetectedCoughs";
  WindowConfig window_;
  std::size_t bands_ = 32;
  bool parallel_ = true;
  EnsembleSpec ensemble_;
  std::optional<BandLayout> layout_;
  Publisher publisher_;
  std::atomic<std::uint64_t> processed_{0};
  std::atomic<std::uint64_t> failed_{0};
};

/// Logs each detection. Properties: Input (DetectedCoughs), LogFile
/// (optional CSV "start_ms,coughs,windows", appended).
class CoughLogModule : public Module {
 public:
  void configure(const Properties& properties) override;
  void initialize() override;

  [[nodiscard]] std::uint64_t detections() const noexcept { return detections_; }
  [[nodiscard]] std::uint64_t coughs() const noexcept { return coughs_; }

 private:
  std::string input_ = "DetectedCoughs";
  std::filesystem::path log_file_;
  std::atomic<std::uint64_t> detections_{0};
  std::atomic<std::uint64_t> coughs_{0};
};

/// Streams a labelled dataset over Output one file at a time, waiting for
/// each detection on Input before posting the next. A file not answered
/// within FileTimeout is recorded as missing.
///
/// Properties: Dataset (directory with labels.csv), Output (AudioData),
/// Input (DetectedCoughs), ReportDir (optional; evaluation.csv and
/// summary.txt), FileTimeout and StartTimeout (real time, 30s each),
/// Threshold (0.5), WindowLength (512) and Hop (600) for window labels.
class CoughEvaluatorModule : public Module {
 public:
  ~CoughEvaluatorModule() override;
  void configure(const Properties& properties) override;
  void initialize() override;
  void terminate() override;

  /// Blocks until the whole dataset is evaluated.
  bool wait_done(std::chrono::milliseconds timeout) const;
  [[nodiscard]] std::optional<EvaluationReport> report() const;
  [[nodiscard]] double threshold() const noexcept { return threshold_; }

 private:
  void worker();
  std::optional<Detection> exchange(std::size_t index);

  std::filesystem::path dataset_;
  std::filesystem::path report_dir_;
  std::string input_ = "DetectedCoughs";
  std::string output_ = "AudioData";
  std::chrono::milliseconds file_timeout_{30'000};
  std::chrono::milliseconds start_timeout_{30'000};
  double threshold_ = 0.5;
  WindowConfig window_;
  std::vector<LabeledFile> labels_;
  std::int64_t sampling_rate_ = 0;
  std::int64_t file_ms_ = 0;

  Publisher publisher_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::map<std::int64_t, Detection> answers_;
  std::optional<EvaluationReport> report_;
  bool done_ = false;
  bool stopping_ = false;
  std::thread thread_;
};

/// CoughDetectorModule, CoughLogModule and CoughEvaluatorModule, plus the
/// names TensorFlowLiteModule and CoughVisualizerPlot for the first two.
void register_ml_modules(ModuleFactory& factory);

}  // namespace chanrt::ml
