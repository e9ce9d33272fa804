#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chanrt/ml/dsp.hpp"
#include "chanrt/ml/model.hpp"

namespace chanrt::ml {

struct WindowFeatures {
  std::uint32_t window_index = 0;
  std::vector<double> bands;  // empty when skipped
  bool skipped = false;
};

struct WindowInference {
  std::uint32_t window_index = 0;
  bool skipped = false;
  std::vector<double> raw;  // empty when skipped
  double probability = 0.0;
};

// The serial and parallel variants run the same per-window code and return
// bit-identical results; the parallel ones split windows across OpenMP
// threads.
std::vector<WindowFeatures> compute_features_serial(std::span<const float> signal, const WindowConfig& config,
                                                    const BandLayout& layout);
std::vector<WindowFeatures> compute_features_parallel(std::span<const float> signal, const WindowConfig& config,
                                                      const BandLayout& layout);

std::vector<WindowInference> infer_windows_serial(const EnsembleSpec& ensemble, std::span<const WindowFeatures> features);
std::vector<WindowInference> infer_windows_parallel(const EnsembleSpec& ensemble, std::span<const WindowFeatures> features);

/// Averaged cough probability per window, 0 for skipped windows.
std::vector<double> window_probabilities(std::span<const WindowInference> windows);
/// Raw outputs of every non-skipped window, in window order.
std::vector<double> raw_outputs(std::span<const WindowInference> windows);

}  // namespace chanrt::ml
