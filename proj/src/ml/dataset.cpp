#include "chanrt/ml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "chanrt/core/audio.hpp"
#include "chanrt/core/files.hpp"
#include "chanrt/error.hpp"
#include "chanrt/wire/codec.hpp"

namespace chanrt::ml {

namespace {

constexpr std::int64_t kSlotMs = 1000;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  bool chance(double p) { return unit() < p; }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

std::int64_t ms_to_sample(std::int64_t ms, std::int64_t rate) { return ms * rate / 1000; }

// First difference of uniform noise: 20 ms attack, hold, then a fast decay
// over the last 150 ms.
void add_burst(std::vector<float>& x, Rng& rng, std::int64_t rate, std::int64_t start_ms, std::int64_t length_ms,
               double amplitude) {
  const auto begin = ms_to_sample(start_ms, rate);
  const auto end = std::min<std::int64_t>(ms_to_sample(start_ms + length_ms, rate), static_cast<std::int64_t>(x.size()));
  const double attack = 0.02 * static_cast<double>(rate);
  const double release = static_cast<double>(end - begin) - 0.15 * static_cast<double>(rate);
  const double decay = 0.05 * static_cast<double>(rate);
  double prev = 0.0;
  for (auto n = begin; n < end; ++n) {
    const double t = static_cast<double>(n - begin);
    const double env = t < attack ? t / attack : t < release ? 1.0 : std::exp(-(t - release) / decay);
    const double u = rng.uniform(-1.0, 1.0);
    x[static_cast<std::size_t>(n)] += static_cast<float>(amplitude * env * (u - prev) * 0.5);
    prev = u;
  }
}

// A few harmonics of a low fundamental under a Hann envelope.
void add_tone(std::vector<float>& x, Rng& rng, std::int64_t rate, std::int64_t start_ms, std::int64_t length_ms) {
  const auto begin = ms_to_sample(start_ms, rate);
  const auto count = ms_to_sample(length_ms, rate);
  const double f0 = rng.uniform(120.0, 250.0);
  const double amplitude = rng.uniform(0.1, 0.25);
  for (std::int64_t i = 0; i < count && begin + i < static_cast<std::int64_t>(x.size()); ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(rate);
    const double env = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count));
    double v = 0.0;
    for (int h = 1; h <= 3; ++h) v += std::sin(2 * std::numbers::pi * f0 * h * t) / h;
    x[static_cast<std::size_t>(begin + i)] += static_cast<float>(amplitude * env * v / 1.8);
  }
}

}  // namespace

std::vector<std::uint32_t> event_count_plan(const DatasetConfig& config) {
  const std::size_t slots = static_cast<std::size_t>(config.duration_ms / kSlotMs);
  const std::uint32_t cap = static_cast<std::uint32_t>(std::min<std::size_t>(kMaxEventsPerFile, slots));
  const std::size_t empty = config.files / 8;
  const std::size_t with_events = config.files - empty;
  if (config.files == 0 || config.events < with_events || config.events > with_events * cap) {
    throw Error(ErrorCode::InvalidProperty,
                fmt::format("cannot place {} events in {} files of {} ms", config.events, config.files, config.duration_ms));
  }
  std::vector<std::uint32_t> plan(config.files, 0);
  for (std::size_t i = 0; i < with_events; ++i) plan[i] = 1;
  std::size_t extra = config.events - with_events;
  constexpr std::uint32_t kBatches[] = {5, 4, 3, 3, 2, 2, 2, 2};
  std::size_t next = 0;
  for (std::uint32_t batch : kBatches) {
    if (extra == 0 || next == with_events) break;
    const auto add = std::min<std::size_t>({batch, extra, cap - 1});
    plan[next++] += static_cast<std::uint32_t>(add);
    extra -= add;
  }
  // Remaining surplus: one per file, wrapping until placed.
  for (std::size_t i = next; extra > 0; i = (i + 1 == with_events ? 0 : i + 1)) {
    if (plan[i] < cap) {
      ++plan[i];
      --extra;
    }
  }
  Rng rng(config.seed);
  rng.shuffle(plan);
  return plan;
}

SyntheticFile synthesize_file(const DatasetConfig& config, std::size_t index, std::uint32_t events) {
  const auto rate = config.sampling_rate;
  const auto slots = static_cast<std::size_t>(config.duration_ms / kSlotMs);
  if (events > slots) throw Error(ErrorCode::InvalidProperty, "more events than one-second slots");
  Rng rng(config.seed * 0x9E3779B97F4A7C15ULL + index + 1);

  SyntheticFile out;
  out.label.name = fmt::format("{:03d}.sig", index);
  out.samples.resize(static_cast<std::size_t>(ms_to_sample(config.duration_ms, rate)));
  for (auto& s : out.samples) s = static_cast<float>(rng.uniform(-0.003, 0.003));

  // A silent lead of whole slots, when the events leave room for one.
  std::size_t lead = 0;
  if (index % 5 == 0 && slots - events >= 1) lead = std::min<std::size_t>(1 + rng.below(2), slots - events);
  std::fill_n(out.samples.begin(), static_cast<std::size_t>(ms_to_sample(static_cast<std::int64_t>(lead) * kSlotMs, rate)), 0.0f);

  std::vector<std::size_t> free;
  for (std::size_t s = lead; s < slots; ++s) free.push_back(s);
  rng.shuffle(free);
  std::vector<std::size_t> chosen(free.begin(), free.begin() + events);
  std::sort(chosen.begin(), chosen.end());

  for (std::size_t slot : chosen) {
    const auto start = static_cast<std::int64_t>(slot) * kSlotMs + 100 + static_cast<std::int64_t>(rng.below(201));
    // Mostly clear bursts; some borderline and some too faint to find.
    const double pick = rng.unit();
    const double amplitude = pick < 0.1 ? 0.05 : pick < 0.2 ? rng.uniform(0.2, 0.35) : rng.uniform(0.4, 0.8);
    add_burst(out.samples, rng, rate, start, kEventMs, amplitude);
    out.label.events.push_back({start, start + kEventMs});
  }
  for (std::size_t slot : std::vector<std::size_t>(free.begin() + events, free.end())) {
    const auto base = static_cast<std::int64_t>(slot) * kSlotMs;
    if (rng.chance(0.4)) add_tone(out.samples, rng, rate, base + 100 + static_cast<std::int64_t>(rng.below(300)), 300 + static_cast<std::int64_t>(rng.below(200)));
    if (rng.chance(0.2)) add_burst(out.samples, rng, rate, base + 50 + static_cast<std::int64_t>(rng.below(800)), 60, 0.6);
  }
  return out;
}

std::vector<LabeledFile> generate_dataset(const std::filesystem::path& dir, const DatasetConfig& config) {
  const auto plan = event_count_plan(config);
  std::vector<LabeledFile> labels;
  labels.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    auto file = synthesize_file(config, i, plan[i]);
    const auto bytes = wire::encode(make_audio(config.sampling_rate, 0, config.duration_ms, file.samples));
    write_file_atomic(dir / file.label.name, bytes);
    labels.push_back(std::move(file.label));
  }
  write_text_atomic(dir / kLabelsFile, labels_csv(labels));
  return labels;
}

AudioView load_signal(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  auto decoded = wire::decode(bytes);
  if (decoded.consumed != bytes.size()) {
    throw Error(ErrorCode::InvalidStruct, fmt::format("{}: {} trailing bytes", path.string(), bytes.size() - decoded.consumed));
  }
  return read_audio(decoded.value);
}

std::string labels_csv(const std::vector<LabeledFile>& labels) {
  std::string out = "file,event_count,event_positions\n";
  for (const auto& l : labels) {
    out += fmt::format("{},{},", l.name, l.events.size());
    for (std::size_t i = 0; i < l.events.size(); ++i) {
      out += fmt::format("{}{}-{}", i ? ";" : "", l.events[i].start_ms, l.events[i].end_ms);
    }
    out += '\n';
  }
  return out;
}

std::vector<LabeledFile> parse_labels(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "file,event_count,event_positions") {
    throw Error(ErrorCode::InvalidProperty, "labels table lacks its header");
  }
  std::vector<LabeledFile> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw Error(ErrorCode::InvalidProperty, fmt::format("labels row {} malformed", row));
    LabeledFile f;
    f.name = line.substr(0, c1);
    std::size_t count = 0;
    try {
      count = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
      std::istringstream positions(line.substr(c2 + 1));
      std::string item;
      while (std::getline(positions, item, ';')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) throw std::invalid_argument(item);
        f.events.push_back({std::stoll(item.substr(0, dash)), std::stoll(item.substr(dash + 1))});
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidProperty, fmt::format("labels row {} malformed", row));
    }
    if (count != f.events.size()) {
      throw Error(ErrorCode::InvalidProperty, fmt::format("labels row {}: {} events listed, count says {}", row, f.events.size(), count));
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<LabeledFile> read_labels(const std::filesystem::path& path) { return parse_labels(read_text(path)); }

std::vector<bool> window_labels(const std::vector<CoughEvent>& events, std::size_t window_count, const WindowConfig& config,
                                std::int64_t sampling_rate) {
  std::vector<bool> out(window_count, false);
  for (std::size_t i = 0; i < window_count; ++i) {
    // centre_ms * 2 * rate, kept in integers
    const auto centre2 = static_cast<std::int64_t>(2 * i * config.hop + config.window_len) * 1000;
    for (const auto& e : events) {
      if (centre2 >= 2 * e.start_ms * sampling_rate && centre2 < 2 * e.end_ms * sampling_rate) {
        out[i] = true;
        break;
      }
    }
  }
  return out;
}

}  // namespace chanrt::ml
