#include "chanrt/ml/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "chanrt/core/files.hpp"
#include "chanrt/error.hpp"

namespace chanrt::ml {

using nlohmann::json;

std::string_view to_string(Activation activation) noexcept {
  switch (activation) {
    case Activation::None: return "None";
    case Activation::ReLU: return "ReLU";
    case Activation::Softmax: return "Softmax";
  }
  return "None";
}

Activation parse_activation(std::string_view text) {
  if (text == "None") return Activation::None;
  if (text == "ReLU") return Activation::ReLU;
  if (text == "Softmax") return Activation::Softmax;
  throw Error(ErrorCode::InvalidProperty, fmt::format("unknown activation '{}'", text));
}

void ModelSpec::validate() const {
  if (layers.empty()) throw Error(ErrorCode::DimensionMismatch, "model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in == 0 || l.out == 0 || l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
      throw Error(ErrorCode::DimensionMismatch, fmt::format("layer {} has inconsistent shape", i));
    }
    if (i > 0 && layers[i - 1].out != l.in) {
      throw Error(ErrorCode::DimensionMismatch, fmt::format("layer {} expects {} inputs, gets {}", i, l.in, layers[i - 1].out));
    }
  }
  if (layers.back().activation != Activation::Softmax) {
    throw Error(ErrorCode::DimensionMismatch, "final layer must be Softmax");
  }
}

namespace {

void apply(Activation activation, std::vector<double>& v) {
  switch (activation) {
    case Activation::None: break;
    case Activation::ReLU:
      for (auto& x : v) x = std::max(0.0, x);
      break;
    case Activation::Softmax: {
      const double top = *std::max_element(v.begin(), v.end());
      double sum = 0.0;
      for (auto& x : v) sum += (x = std::exp(x - top));
      for (auto& x : v) x /= sum;
      break;
    }
  }
}

}  // namespace

std::vector<double> infer(const ModelSpec& model, std::span<const double> features) {
  if (features.size() != model.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("{} features for a {}-input model", features.size(), model.input_dim()));
  }
  std::vector<double> x(features.begin(), features.end());
  std::vector<double> y;
  for (const auto& layer : model.layers) {
    y.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double* w = layer.weights.data() + r * layer.in;
      double acc = y[r];
      for (std::size_t c = 0; c < layer.in; ++c) acc += w[c] * x[c];
      y[r] = acc;
    }
    apply(layer.activation, y);
    x.swap(y);
  }
  return x;
}

void EnsembleSpec::validate() const {
  if (models.size() != kEnsembleSize) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("ensemble needs {} models, has {}", kEnsembleSize, models.size()));
  }
  for (const auto& m : models) {
    m.validate();
    if (m.input_dim() != input_dim() || m.output_dim() != 2) {
      throw Error(ErrorCode::DimensionMismatch, "ensemble models must share the input size and have two outputs");
    }
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::InvalidProperty, "threshold must lie in (0,1)");
  if (min_run == 0) throw Error(ErrorCode::InvalidProperty, "min_run must be positive");
}

EnsembleOutput ensemble_infer(const EnsembleSpec& ensemble, std::span<const double> features) {
  EnsembleOutput out;
  out.raw.reserve(ensemble.models.size() * 2);
  double sum = 0.0;
  for (const auto& model : ensemble.models) {
    const auto y = infer(model, features);
    out.raw.insert(out.raw.end(), y.begin(), y.end());
    sum += y[kCoughOutput];
  }
  out.cough_probability = ensemble.models.empty() ? 0.0 : sum / static_cast<double>(ensemble.models.size());
  return out;
}

ModelSpec quantize_model(const ModelSpec& model, int bits) {
  if (bits != 8 && bits != 16) throw Error(ErrorCode::InvalidProperty, fmt::format("unsupported bit width {}", bits));
  const double qmax = static_cast<double>((1 << (bits - 1)) - 1);
  ModelSpec out = model;
  for (auto& layer : out.layers) {
    double top = 0.0;
    for (double w : layer.weights) top = std::max(top, std::abs(w));
    if (top == 0.0) continue;
    // w = top * (q / qmax) rather than q * (top / qmax): the largest weight
    // maps back onto itself exactly, so a second pass is a no-op.
    for (auto& w : layer.weights) w = top * (std::round(w / top * qmax) / qmax);
  }
  return out;
}

EnsembleSpec quantize_ensemble(const EnsembleSpec& ensemble, int bits) {
  EnsembleSpec out = ensemble;
  for (auto& m : out.models) m = quantize_model(m, bits);
  return out;
}

// ---- designed detector

namespace {

constexpr std::size_t kHidden = 16;

}  // namespace

EnsembleSpec default_cough_ensemble(std::size_t bands, std::uint64_t seed) {
  if (bands < 8) throw Error(ErrorCode::InvalidProperty, "the designed detector needs at least 8 bands");
  // Band groups as fractions of the log-frequency axis: the top quarter
  // carries the burst energy, roughly the second fifth to two thirds the
  // tonal distractors.
  const std::size_t high_lo = bands - bands / 4;
  const std::size_t tonal_lo = bands / 8;
  const std::size_t tonal_hi = (bands * 2) / 3;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);

  EnsembleSpec ensemble;
  for (std::size_t m = 0; m < kEnsembleSize; ++m) {
    Layer hidden{bands, kHidden, std::vector<double>(bands * kHidden), std::vector<double>(kHidden), Activation::ReLU};
    Layer output{kHidden, 2, std::vector<double>(kHidden * 2), std::vector<double>(2), Activation::Softmax};

    // unit 0: burst energy minus tonal energy
    for (std::size_t b = high_lo; b < bands; ++b) hidden.weights[b] = jitter(rng);
    for (std::size_t b = tonal_lo; b < tonal_hi; ++b) hidden.weights[b] = -0.5 * jitter(rng);
    // unit 1: tonal energy
    for (std::size_t b = tonal_lo; b < tonal_hi; ++b) hidden.weights[bands + b] = 0.3 * jitter(rng);
    for (std::size_t u = 2; u < kHidden; ++u) {
      for (std::size_t b = 0; b < bands; ++b) hidden.weights[u * bands + b] = 0.02 * noise(rng);
      hidden.bias[u] = 0.01 * noise(rng);
    }

    // logit(cough) - logit(other) = g * (h0 - theta) - h1 + small noise terms
    const double g = 3.0 * jitter(rng);
    const double theta = 1.5 * jitter(rng);
    output.weights[0] = g / 2;
    output.weights[kHidden + 0] = -g / 2;
    output.weights[1] = -0.5;
    output.weights[kHidden + 1] = 0.5;
    for (std::size_t u = 2; u < kHidden; ++u) {
      output.weights[u] = 0.05 * noise(rng);
      output.weights[kHidden + u] = 0.05 * noise(rng);
    }
    output.bias[0] = -g * theta / 2;
    output.bias[1] = g * theta / 2;

    ensemble.models.push_back(ModelSpec{{std::move(hidden), std::move(output)}});
  }
  ensemble.validate();
  return ensemble;
}

// ---- persistence

std::string ensemble_to_json(const EnsembleSpec& ensemble) {
  json doc;
  doc["threshold"] = ensemble.threshold;
  doc["min_run"] = ensemble.min_run;
  doc["models"] = json::array();
  for (const auto& model : ensemble.models) {
    json layers = json::array();
    for (const auto& l : model.layers) {
      layers.push_back({{"in", l.in},
                        {"out", l.out},
                        {"activation", std::string(to_string(l.activation))},
                        {"weights", l.weights},
                        {"bias", l.bias}});
    }
    doc["models"].push_back({{"layers", std::move(layers)}});
  }
  // max_digits10 keeps every double exact through a round trip.
  return doc.dump(1);
}

EnsembleSpec ensemble_from_json(const std::string& text) {
  try {
    const auto doc = json::parse(text);
    EnsembleSpec out;
    out.threshold = doc.at("threshold").get<double>();
    out.min_run = doc.at("min_run").get<std::uint32_t>();
    for (const auto& m : doc.at("models")) {
      ModelSpec model;
      for (const auto& l : m.at("layers")) {
        model.layers.push_back(Layer{l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                                     l.at("weights").get<std::vector<double>>(), l.at("bias").get<std::vector<double>>(),
                                     parse_activation(l.at("activation").get<std::string>())});
      }
      out.models.push_back(std::move(model));
    }
    out.validate();
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidProperty, fmt::format("model document: {}", e.what()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DimensionMismatch) throw Error(ErrorCode::InvalidProperty, e.what());
    throw;
  }
}

void save_ensemble(const EnsembleSpec& ensemble, const std::filesystem::path& path) {
  write_text_atomic(path, ensemble_to_json(ensemble));
}

EnsembleSpec load_ensemble(const std::filesystem::path& path) { return ensemble_from_json(read_text(path)); }

}  // namespace chanrt::ml
