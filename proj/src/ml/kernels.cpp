#include "chanrt/ml/kernels.hpp"

#include "chanrt/error.hpp"

namespace chanrt::ml {

namespace {

WindowFeatures features_of(std::span<const float> signal, const WindowSpan& w, std::size_t window_len,
                           const BandLayout& layout) {
  WindowFeatures out{w.index, {}, w.skipped};
  if (!w.skipped) out.bands = band_spectrogram(signal.subspan(w.offset, window_len), layout);
  return out;
}

WindowInference inference_of(const EnsembleSpec& ensemble, const WindowFeatures& f) {
  WindowInference out{f.window_index, f.skipped, {}, 0.0};
  if (f.skipped) return out;
  auto r = ensemble_infer(ensemble, f.bands);
  out.raw = std::move(r.raw);
  out.probability = r.cough_probability;
  return out;
}

void check_layout(const WindowConfig& config, const BandLayout& layout) {
  if (config.window_len != layout.window_len()) {
    throw Error(ErrorCode::DimensionMismatch, "window length differs from the band layout");
  }
}

}  // namespace

std::vector<WindowFeatures> compute_features_serial(std::span<const float> signal, const WindowConfig& config,
                                                    const BandLayout& layout) {
  check_layout(config, layout);
  const auto windows = sliding_windows(signal, config);
  std::vector<WindowFeatures> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) out[i] = features_of(signal, windows[i], config.window_len, layout);
  return out;
}

std::vector<WindowFeatures> compute_features_parallel(std::span<const float> signal, const WindowConfig& config,
                                                      const BandLayout& layout) {
  check_layout(config, layout);
  const auto windows = sliding_windows(signal, config);
  std::vector<WindowFeatures> out(windows.size());
  const auto n = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = features_of(signal, windows[static_cast<std::size_t>(i)], config.window_len, layout);
  }
  return out;
}

std::vector<WindowInference> infer_windows_serial(const EnsembleSpec& ensemble, std::span<const WindowFeatures> features) {
  std::vector<WindowInference> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) out[i] = inference_of(ensemble, features[i]);
  return out;
}

std::vector<WindowInference> infer_windows_parallel(const EnsembleSpec& ensemble, std::span<const WindowFeatures> features) {
  std::vector<WindowInference> out(features.size());
  // Exceptions must not leave an OpenMP region; validate the one thing that
  // can throw up front.
  for (const auto& f : features) {
    if (!f.skipped && f.bands.size() != ensemble.input_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "feature size differs from the model input");
    }
  }
  const auto n = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = inference_of(ensemble, features[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<double> window_probabilities(std::span<const WindowInference> windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.probability);
  return out;
}

std::vector<double> raw_outputs(std::span<const WindowInference> windows) {
  std::vector<double> out;
  for (const auto& w : windows) out.insert(out.end(), w.raw.begin(), w.raw.end());
  return out;
}

}  // namespace chanrt::ml
