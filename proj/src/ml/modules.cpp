#include "chanrt/ml/modules.hpp"

#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "chanrt/core/audio.hpp"
#include "chanrt/core/files.hpp"
#include "chanrt/error.hpp"
#include "chanrt/ml/kernels.hpp"

namespace chanrt::ml {

// ---- CoughDetectorModule

void CoughDetectorModule::configure(const Properties& p) {
  input_ = p.string_or("Input", input_);
  output_ = p.string_or("Output", output_);
  bands_ = static_cast<std::size_t>(p.integer_or("Bands", 32));
  window_.window_len = static_cast<std::size_t>(p.integer_or("WindowLength", 512));
  window_.hop = static_cast<std::size_t>(p.integer_or("Hop", 600));
  window_.silence_rms = p.number_or("SilenceRms", 1e-4);
  parallel_ = p.boolean_or("Parallel", true);
  if (window_.window_len < 2 || window_.hop == 0 || bands_ == 0) {
    throw Error(ErrorCode::InvalidProperty, "WindowLength, Hop and Bands must be positive");
  }

  const auto model = p.string_or("Model", "");
  if (model.ends_with(".json")) {
    try {
      ensemble_ = load_ensemble(model);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidProperty, fmt::format("Model {}: {}", model, e.what()));
    }
  } else {
    ensemble_ = default_cough_ensemble(bands_, static_cast<std::uint64_t>(p.integer_or("Seed", 42)));
    if (!model.empty()) spdlog::info("Model '{}': using the built-in detector", model);
  }
  if (ensemble_.input_dim() != bands_) {
    throw Error(ErrorCode::InvalidProperty, fmt::format("model takes {} features, Bands is {}", ensemble_.input_dim(), bands_));
  }
  ensemble_.threshold = p.number_or("Threshold", ensemble_.threshold);
  ensemble_.min_run = static_cast<std::uint32_t>(p.integer_or("MinRun", ensemble_.min_run));
  if (const auto bits = p.integer_or("Quantize", 0); bits != 0) ensemble_ = quantize_ensemble(ensemble_, static_cast<int>(bits));
  try {
    ensemble_.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidProperty, e.what());
  }
  layout_.emplace(window_.window_len, bands_);
  if (const auto accel = p.string_or("Acceleration", ""); !accel.empty() && accel != "CPU") {
    spdlog::info("Acceleration {} requested; inference runs on the CPU", accel);
  }
}

void CoughDetectorModule::initialize() {
  if (!layout_) layout_.emplace(window_.window_len, bands_);
  if (ensemble_.models.empty()) ensemble_ = default_cough_ensemble(bands_);
  publisher_ = publish(output_, "CoughDetection");
  subscribe(input_, "AudioData", [this](const Envelope& e) { on_audio(e); });
}

Detection CoughDetectorModule::detect(const AudioView& audio) const {
  const auto features = parallel_ ? compute_features_parallel(audio.samples, window_, *layout_)
                                  : compute_features_serial(audio.samples, window_, *layout_);
  const auto windows = parallel_ ? infer_windows_parallel(ensemble_, features) : infer_windows_serial(ensemble_, features);
  Detection d;
  d.start_ms = audio.start_ms;
  d.duration_ms = audio.duration_ms;
  d.probabilities = window_probabilities(windows);
  for (const auto& w : windows) d.skipped.push_back(w.skipped);
  d.raw_outputs = raw_outputs(windows);
  d.coughs = count_coughs(d.probabilities, ensemble_.threshold, ensemble_.min_run);
  return d;
}

void CoughDetectorModule::on_audio(const Envelope& envelope) {
  try {
    publisher_.post(to_wire(detect(read_audio(envelope.payload))));
    ++processed_;
  } catch (const Error& e) {
    ++failed_;
    spdlog::warn("{}: chunk {} skipped: {}", instance_name(), envelope.sequence, e.what());
  }
}

// ---- CoughLogModule

void CoughLogModule::configure(const Properties& p) {
  input_ = p.string_or("Input", input_);
  log_file_ = p.string_or("LogFile", "");
}

void CoughLogModule::initialize() {
  if (!log_file_.empty()) {
    std::error_code ec;
    if (log_file_.has_parent_path()) std::filesystem::create_directories(log_file_.parent_path(), ec);
    if (!std::filesystem::exists(log_file_, ec)) std::ofstream(log_file_) << "start_ms,coughs,windows\n";
  }
  subscribe(input_, "CoughDetection", [this](const Envelope& e) {
    Detection d;
    try {
      d = detection_from_wire(e.payload);
    } catch (const Error& ex) {
      spdlog::warn("{}: {}", instance_name(), ex.what());
      return;
    }
    ++detections_;
    coughs_ += d.coughs;
    spdlog::info("{}: {} cough(s) in chunk at {} ms", instance_name(), d.coughs, d.start_ms);
    if (!log_file_.empty()) {
      std::ofstream out(log_file_, std::ios::app);
      out << d.start_ms << ',' << d.coughs << ',' << d.probabilities.size() << '\n';
      if (!out) spdlog::warn("{}: cannot append to {}", instance_name(), log_file_.string());
    }
  });
}

// ---- CoughEvaluatorModule

CoughEvaluatorModule::~CoughEvaluatorModule() { terminate(); }

void CoughEvaluatorModule::configure(const Properties& p) {
  dataset_ = p.string("Dataset");
  report_dir_ = p.string_or("ReportDir", "");
  input_ = p.string_or("Input", input_);
  output_ = p.string_or("Output", output_);
  file_timeout_ = std::chrono::milliseconds(p.duration_ms_or("FileTimeout", 30'000));
  start_timeout_ = std::chrono::milliseconds(p.duration_ms_or("StartTimeout", 30'000));
  threshold_ = p.number_or("Threshold", 0.5);
  window_.window_len = static_cast<std::size_t>(p.integer_or("WindowLength", 512));
  window_.hop = static_cast<std::size_t>(p.integer_or("Hop", 600));
  try {
    labels_ = read_labels(dataset_ / kLabelsFile);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidProperty, fmt::format("Dataset {}: {}", dataset_.string(), e.what()));
  }
  for (const auto& l : labels_) {
    if (!std::filesystem::exists(dataset_ / l.name)) {
      throw Error(ErrorCode::InvalidProperty, fmt::format("Dataset {} lacks {}", dataset_.string(), l.name));
    }
  }
}

void CoughEvaluatorModule::initialize() {
  publisher_ = publish(output_, "AudioData");
  subscribe(input_, "CoughDetection", [this](const Envelope& e) {
    try {
      auto d = detection_from_wire(e.payload);
      std::lock_guard lock(mutex_);
      answers_.insert_or_assign(d.start_ms, std::move(d));
      cv_.notify_all();
    } catch (const Error& ex) {
      spdlog::warn("{}: {}", instance_name(), ex.what());
    }
  });
  thread_ = std::thread([this] { worker(); });
}

void CoughEvaluatorModule::terminate() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

bool CoughEvaluatorModule::wait_done(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [this] { return done_; });
}

std::optional<EvaluationReport> CoughEvaluatorModule::report() const {
  std::lock_guard lock(mutex_);
  return report_;
}

std::optional<Detection> CoughEvaluatorModule::exchange(std::size_t index) {
  auto audio = load_signal(dataset_ / labels_[index].name);
  if (sampling_rate_ == 0) {
    sampling_rate_ = audio.sampling_rate;
    file_ms_ = audio.duration_ms;
  } else if (audio.sampling_rate != sampling_rate_ || audio.duration_ms != file_ms_) {
    throw Error(ErrorCode::InvalidProperty, fmt::format("{} differs in rate or length", labels_[index].name));
  }
  // Distinct start times let a reply be matched to its file.
  const auto start = static_cast<std::int64_t>(index) * file_ms_;
  publisher_.post(make_audio(audio.sampling_rate, start, audio.duration_ms, audio.samples));

  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, file_timeout_, [&] { return stopping_ || answers_.contains(start); });
  auto it = answers_.find(start);
  if (it == answers_.end()) return std::nullopt;
  auto d = std::move(it->second);
  answers_.erase(it);
  return d;
}

void CoughEvaluatorModule::worker() {
  {
    const auto deadline = std::chrono::steady_clock::now() + start_timeout_;
    std::unique_lock lock(mutex_);
    while (!stopping_ && runtime().reach(output_) == 0 && std::chrono::steady_clock::now() < deadline) {
      cv_.wait_for(lock, std::chrono::milliseconds(20));
    }
  }
  std::vector<std::optional<Detection>> results(labels_.size());
  std::size_t missing = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
    }
    try {
      results[i] = exchange(i);
    } catch (const Error& e) {
      spdlog::error("{}: {}: {}", instance_name(), labels_[i].name, e.what());
    }
    if (!results[i]) {
      ++missing;
      spdlog::warn("{}: no detection for {}", instance_name(), labels_[i].name);
    }
  }
  auto report = evaluate(labels_, std::move(results), window_, sampling_rate_, threshold_);
  if (!report_dir_.empty()) {
    try {
      write_text_atomic(report_dir_ / "evaluation.csv", evaluation_csv(report, threshold_));
      write_text_atomic(report_dir_ / "summary.txt", metrics_summary(report));
    } catch (const Error& e) {
      spdlog::error("{}: report not written: {}", instance_name(), e.what());
    }
  }
  spdlog::info("{}: evaluated {} files, {} missing", instance_name(), labels_.size(), missing);
  std::lock_guard lock(mutex_);
  report_ = std::move(report);
  done_ = true;
  cv_.notify_all();
}

void register_ml_modules(ModuleFactory& factory) {
  factory.add("CoughDetectorModule", [] { return std::make_unique<CoughDetectorModule>(); });
  factory.add("TensorFlowLiteModule", [] { return std::make_unique<CoughDetectorModule>(); });
  factory.add("CoughLogModule", [] { return std::make_unique<CoughLogModule>(); });
  factory.add("CoughVisualizerPlot", [] { return std::make_unique<CoughLogModule>(); });
  factory.add("CoughEvaluatorModule", [] { return std::make_unique<CoughEvaluatorModule>(); });
}

}  // namespace chanrt::ml
