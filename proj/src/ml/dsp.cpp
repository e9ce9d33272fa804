#include "chanrt/ml/dsp.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include <fftw3.h>
#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace chanrt::ml {

namespace {

// The FFTW planner is not thread-safe; execution with fresh arrays is, as
// long as they share the planning arrays' alignment (fftw_malloc gives that).
struct Plan {
  fftw_plan plan = nullptr;
  std::size_t n = 0;
  ~Plan() {
    if (plan) fftw_destroy_plan(plan);
  }
};

const Plan& plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<Plan>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) {
    auto* in = fftw_alloc_real(n);
    auto* out = fftw_alloc_complex(n / 2 + 1);
    slot = std::make_unique<Plan>();
    slot->n = n;
    slot->plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  return *slot;
}

struct Buffers {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  std::size_t n = 0;
  ~Buffers() {
    fftw_free(in);
    fftw_free(out);
  }
  void ensure(std::size_t size) {
    if (n == size) return;
    fftw_free(in);
    fftw_free(out);
    in = fftw_alloc_real(size);
    out = fftw_alloc_complex(size / 2 + 1);
    n = size;
  }
};

}  // namespace

std::size_t window_count(std::size_t signal_len, std::size_t window_len, std::size_t hop) {
  if (window_len == 0 || hop == 0) throw Error(ErrorCode::InvalidProperty, "window length and hop must be positive");
  if (window_len > signal_len) {
    throw Error(ErrorCode::WindowLargerThanSignal, fmt::format("window {} > signal {}", window_len, signal_len));
  }
  return (signal_len - window_len) / hop + 1;
}

double rms(std::span<const float> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (float s : samples) sum += static_cast<double>(s) * s;
  return std::sqrt(sum / static_cast<double>(samples.size()));
}

std::vector<WindowSpan> sliding_windows(std::span<const float> signal, const WindowConfig& config) {
  const auto n = window_count(signal.size(), config.window_len, config.hop);
  std::vector<WindowSpan> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].index = static_cast<std::uint32_t>(i);
    out[i].offset = i * config.hop;
    out[i].skipped = rms(signal.subspan(out[i].offset, config.window_len)) < config.silence_rms;
  }
  return out;
}

BandLayout::BandLayout(std::size_t window_len, std::size_t bands) : window_len_(window_len), bands_(bands) {
  if (window_len < 2 || bands == 0) throw Error(ErrorCode::InvalidProperty, "band layout needs window >= 2 and bands >= 1");
  hi_ = static_cast<double>(window_len / 2);
  lo_ = std::max<double>(1.0, static_cast<double>(window_len / 64));
  if (lo_ >= hi_) lo_ = 1.0;
  band_of_.assign(window_len / 2 + 1, -1);
  const double span = std::log(hi_ / lo_);
  for (std::size_t k = 1; k <= window_len / 2; ++k) {
    const double x = static_cast<double>(k);
    if (x < lo_) continue;
    const double pos = span > 0 ? std::log(x / lo_) / span : 0.0;
    auto b = static_cast<long>(std::floor(pos * static_cast<double>(bands)));
    band_of_[k] = static_cast<int>(std::clamp<long>(b, 0, static_cast<long>(bands) - 1));
  }
}

double BandLayout::lower_edge(std::size_t band) const {
  return lo_ * std::pow(hi_ / lo_, static_cast<double>(band) / static_cast<double>(bands_));
}

double BandLayout::center(std::size_t band) const {
  return lo_ * std::pow(hi_ / lo_, (static_cast<double>(band) + 0.5) / static_cast<double>(bands_));
}

std::vector<double> power_spectrum(std::span<const float> window) {
  const auto n = window.size();
  const auto& plan = plan_for(n);
  thread_local Buffers buf;
  buf.ensure(n);
  for (std::size_t i = 0; i < n; ++i) buf.in[i] = window[i];
  fftw_execute_dft_r2c(plan.plan, buf.in, buf.out);
  std::vector<double> power(n / 2 + 1);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k <= n / 2; ++k) power[k] = (buf.out[k][0] * buf.out[k][0] + buf.out[k][1] * buf.out[k][1]) * scale;
  return power;
}

void band_spectrogram_into(std::span<const float> window, const BandLayout& layout, std::span<double> out) {
  if (window.size() != layout.window_len() || out.size() != layout.bands()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("window {} / bands {} vs layout {} / {}", window.size(), out.size(), layout.window_len(), layout.bands()));
  }
  const auto power = power_spectrum(window);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 1; k < power.size(); ++k) {
    const int b = layout.band_of(k);
    if (b >= 0) out[static_cast<std::size_t>(b)] += power[k];
  }
  for (auto& v : out) v = std::log1p(v);
}

std::vector<double> band_spectrogram(std::span<const float> window, const BandLayout& layout) {
  std::vector<double> out(layout.bands());
  band_spectrogram_into(window, layout, out);
  return out;
}

}  // namespace chanrt::ml
