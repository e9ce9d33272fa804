#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace chanrt::ml {

enum class Activation { None, ReLU, Softmax };

std::string_view to_string(Activation activation) noexcept;
Activation parse_activation(std::string_view text);

/// Dense layer; weights are row-major, out rows of in columns.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::None;

  [[nodiscard]] double weight(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
  friend bool operator==(const Layer&, const Layer&) = default;
};

struct ModelSpec {
  std::vector<Layer> layers;

  [[nodiscard]] std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  [[nodiscard]] std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  /// Checks shapes, chaining and a final Softmax; throws Error(DimensionMismatch).
  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Forward pass. Throws Error(DimensionMismatch) if the feature count differs.
std::vector<double> infer(const ModelSpec& model, std::span<const double> features);

inline constexpr std::size_t kEnsembleSize = 5;
/// Output index of the cough class.
inline constexpr std::size_t kCoughOutput = 0;

struct EnsembleSpec {
  std::vector<ModelSpec> models;
  double threshold = 0.5;
  std::uint32_t min_run = 2;

  [[nodiscard]] std::size_t input_dim() const { return models.empty() ? 0 : models.front().input_dim(); }
  /// Exactly five two-output models of one input size, τ in (0,1), k >= 1.
  void validate() const;
  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

struct EnsembleOutput {
  std::vector<double> raw;  // model-major, two values per model
  double cough_probability = 0.0;
};

EnsembleOutput ensemble_infer(const EnsembleSpec& ensemble, std::span<const double> features);

/// Per-tensor symmetric quantization of every weight matrix:
/// s = max|w| / (2^(bits-1) - 1), w -> round(w / s) * s. Biases stay in
/// double. Applying it twice gives the same model. Throws
/// Error(InvalidProperty) unless bits is 8 or 16.
ModelSpec quantize_model(const ModelSpec& model, int bits = 8);
EnsembleSpec quantize_ensemble(const EnsembleSpec& ensemble, int bits = 8);

/// Hand-built detector for the synthetic cough set: one hidden unit
/// responds to high-band energy that is not accompanied by low-band energy,
/// one to tonal low-band energy; the rest of the hidden layer is seeded noise.
/// Every model gets its own jitter from `seed`.
EnsembleSpec default_cough_ensemble(std::size_t bands = 32, std::uint64_t seed = 42);

std::string ensemble_to_json(const EnsembleSpec& ensemble);
/// Throws Error(InvalidProperty) on a malformed document.
EnsembleSpec ensemble_from_json(const std::string& text);
void save_ensemble(const EnsembleSpec& ensemble, const std::filesystem::path& path);
/// Throws Error(IoError) or Error(InvalidProperty).
EnsembleSpec load_ensemble(const std::filesystem::path& path);

}  // namespace chanrt::ml
