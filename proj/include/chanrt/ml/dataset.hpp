#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chanrt/core/audio.hpp"
#include "chanrt/ml/dsp.hpp"

namespace chanrt::ml {

struct CoughEvent {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;  // exclusive
  friend bool operator==(const CoughEvent&, const CoughEvent&) = default;
};

struct LabeledFile {
  std::string name;
  std::vector<CoughEvent> events;
  friend bool operator==(const LabeledFile&, const LabeledFile&) = default;
};

struct DatasetConfig {
  std::size_t files = 278;
  std::size_t events = 281;
  std::int64_t sampling_rate = 4000;
  std::int64_t duration_ms = 6000;
  std::uint64_t seed = 7;
};

inline constexpr std::uint32_t kMaxEventsPerFile = 6;
inline constexpr std::int64_t kEventMs = 400;
inline constexpr char kLabelsFile[] = "labels.csv";

/// Events per file: an eighth of the files get none, every other file one,
/// and the surplus goes out in decreasing batches (5, 4, 3, 3, 2, 2, 2, 2
/// extra), then one extra per file. Positions are shuffled by the seed.
/// Throws Error(InvalidProperty) if the events cannot be placed.
std::vector<std::uint32_t> event_count_plan(const DatasetConfig& config);

struct SyntheticFile {
  LabeledFile label;
  std::vector<float> samples;
};

/// Deterministic in (config.seed, index). Each event is a decaying
/// high-band burst inside its own one-second slot; files also carry
/// silent leads, tonal distractors, short clicks and some faint bursts.
SyntheticFile synthesize_file(const DatasetConfig& config, std::size_t index, std::uint32_t events);

/// Writes `NNN.sig` (encoded AudioData) per file plus labels.csv; returns the labels.
std::vector<LabeledFile> generate_dataset(const std::filesystem::path& dir, const DatasetConfig& config);

/// Reads one `.sig` file. Throws Error(IoError), a decode error, or
/// Error(InvalidStruct) for trailing bytes or a non-audio value.
AudioView load_signal(const std::filesystem::path& path);

/// Header "file,event_count,event_positions"; positions as "start-end;..." in ms.
std::string labels_csv(const std::vector<LabeledFile>& labels);
/// Throws Error(InvalidProperty) on a malformed table, Error(IoError) if unreadable.
std::vector<LabeledFile> read_labels(const std::filesystem::path& path);
std::vector<LabeledFile> parse_labels(const std::string& text);

/// True for windows whose centre lies inside an event.
std::vector<bool> window_labels(const std::vector<CoughEvent>& events, std::size_t window_count,
                                const WindowConfig& config, std::int64_t sampling_rate);

}  // namespace chanrt::ml
