#include "chanrt/ml/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace chanrt::ml {

std::uint32_t count_coughs(std::span<const double> window_probs, double tau, std::uint32_t k) {
  std::uint32_t count = 0;
  std::uint32_t run = 0;
  for (double p : window_probs) {
    if (p > tau) {
      ++run;
      continue;
    }
    if (run >= k && run > 0) ++count;
    run = 0;
  }
  if (run >= k && run > 0) ++count;
  return count;
}

DeviationReport deviation_report(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, fmt::format("{} vs {} values", a.size(), b.size()));
  DeviationReport r;
  r.total_values = a.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) {
      ++r.equal_values;
      continue;
    }
    ++r.different_values;
    const double d = std::abs(a[i] - b[i]);
    r.max_difference = std::max(r.max_difference, d);
    sum += d;
  }
  r.mean_difference = a.empty() ? 0.0 : sum / static_cast<double>(a.size());
  return r;
}

void ConfusionMatrix::add(bool actual, bool predicted) noexcept {
  if (actual) {
    ++(predicted ? tp : fn);
  } else {
    ++(predicted ? fp : tn);
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

MetricsReport classification_metrics(const ConfusionMatrix& cm) {
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const auto tn = static_cast<double>(cm.tn);
  MetricsReport r;
  r.sensitivity = ratio(tp, tp + fn);
  r.specificity = ratio(tn, tn + fp);
  r.precision = ratio(tp, tp + fp);
  r.accuracy = ratio(tp + tn, tp + fp + fn + tn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den > 0.0) r.mcc = (tp * tn - fp * fn) / std::sqrt(den);
  return r;
}

std::string format_metric(const std::optional<double>& value) {
  return value ? fmt::format("{:.10f}", *value) : std::string("undefined");
}

}  // namespace chanrt::ml
