#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chanrt::ml {

/// Number of maximal runs of values > tau whose length is at least k.
std::uint32_t count_coughs(std::span<const double> window_probs, double tau, std::uint32_t k);

struct DeviationReport {
  std::uint64_t total_values = 0;
  std::uint64_t equal_values = 0;
  std::uint64_t different_values = 0;
  double max_difference = 0.0;
  /// Mean of |a - b| over all compared values, equal ones included.
  double mean_difference = 0.0;

  friend bool operator==(const DeviationReport&, const DeviationReport&) = default;
};

/// Exact equality per position. Throws Error(LengthMismatch).
DeviationReport deviation_report(std::span<const double> a, std::span<const double> b);

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  void add(bool actual, bool predicted) noexcept;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Fields are empty when their denominator is zero.
struct MetricsReport {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> accuracy;
  std::optional<double> mcc;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport classification_metrics(const ConfusionMatrix& cm);

/// "0.7518796992" with ten decimals, or "undefined".
std::string format_metric(const std::optional<double>& value);

}  // namespace chanrt::ml
