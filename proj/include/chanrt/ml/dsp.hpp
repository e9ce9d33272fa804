#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace chanrt::ml {

struct WindowConfig {
  std::size_t window_len = 512;
  std::size_t hop = 600;
  double silence_rms = 1e-4;
};

struct WindowSpan {
  std::uint32_t index = 0;
  std::size_t offset = 0;
  bool skipped = false;  // RMS below the silence threshold
};

/// floor((len - window) / hop) + 1. Throws Error(WindowLargerThanSignal), or
/// Error(InvalidProperty) for an empty window or a zero hop.
std::size_t window_count(std::size_t signal_len, std::size_t window_len, std::size_t hop);

std::vector<WindowSpan> sliding_windows(std::span<const float> signal, const WindowConfig& config);

double rms(std::span<const float> samples);

/// Assigns DFT bins 1..N/2 of an N-point window to M bands of equal width on
/// a log-frequency axis, spanning bin max(1, N/64) up to N/2. Bins below the
/// lowest edge belong to no band.
class BandLayout {
 public:
  BandLayout(std::size_t window_len, std::size_t bands);

  [[nodiscard]] std::size_t window_len() const noexcept { return window_len_; }
  [[nodiscard]] std::size_t bands() const noexcept { return bands_; }
  /// -1 when the bin lies below the lowest edge.
  [[nodiscard]] int band_of(std::size_t bin) const { return band_of_.at(bin); }
  /// Band edges and geometric centre, in bin units.
  [[nodiscard]] double lower_edge(std::size_t band) const;
  [[nodiscard]] double center(std::size_t band) const;

 private:
  std::size_t window_len_;
  std::size_t bands_;
  double lo_;
  double hi_;
  std::vector<int> band_of_;  // indexed by bin 0..N/2
};

/// Power |X_k|^2 / N of bins 0..N/2 via a real-input FFT. Thread-safe.
std::vector<double> power_spectrum(std::span<const float> window);

/// log1p of the power summed per band. Deterministic bit-for-bit.
/// Throws Error(DimensionMismatch) if the window length differs from the layout.
std::vector<double> band_spectrogram(std::span<const float> window, const BandLayout& layout);
void band_spectrogram_into(std::span<const float> window, const BandLayout& layout, std::span<double> out);

}  // namespace chanrt::ml
