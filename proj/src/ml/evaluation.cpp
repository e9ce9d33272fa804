#include "chanrt/ml/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "chanrt/error.hpp"

namespace chanrt::ml {

namespace {

wire::List doubles(const std::vector<double>& v) {
  wire::List out;
  out.reserve(v.size());
  for (double x : v) out.emplace_back(x);
  return out;
}

std::vector<double> doubles_of(const wire::WireValue& v) {
  std::vector<double> out;
  for (const auto& x : v.as<wire::List>()) out.push_back(x.as<double>());
  return out;
}

}  // namespace

wire::WireValue to_wire(const Detection& d) {
  wire::Struct s{"CoughDetection", {}};
  s.add("start_ms", d.start_ms);
  s.add("duration_ms", d.duration_ms);
  s.add("coughs", static_cast<std::int64_t>(d.coughs));
  s.add("probabilities", doubles(d.probabilities));
  wire::List skipped;
  for (bool b : d.skipped) skipped.emplace_back(b);
  s.add("skipped", std::move(skipped));
  s.add("raw_outputs", doubles(d.raw_outputs));
  return s;
}

Detection detection_from_wire(const wire::WireValue& value) {
  try {
    const auto& s = value.as<wire::Struct>();
    if (s.type_name != "CoughDetection") throw Error(ErrorCode::InvalidStruct, "not a CoughDetection");
    Detection d;
    d.start_ms = s.at("start_ms").as<std::int64_t>();
    d.duration_ms = s.at("duration_ms").as<std::int64_t>();
    d.coughs = static_cast<std::uint32_t>(s.at("coughs").as<std::int64_t>());
    d.probabilities = doubles_of(s.at("probabilities"));
    for (const auto& b : s.at("skipped").as<wire::List>()) d.skipped.push_back(b.as<bool>());
    d.raw_outputs = doubles_of(s.at("raw_outputs"));
    if (d.skipped.size() != d.probabilities.size()) throw Error(ErrorCode::InvalidStruct, "skipped/probabilities length");
    return d;
  } catch (const std::bad_variant_access&) {
    throw Error(ErrorCode::InvalidStruct, "CoughDetection field has the wrong kind");
  } catch (const std::out_of_range& e) {
    throw Error(ErrorCode::InvalidStruct, e.what());
  }
}

EvaluationReport evaluate(const std::vector<LabeledFile>& labels, std::vector<std::optional<Detection>> detections,
                          const WindowConfig& window, std::int64_t sampling_rate, double threshold) {
  if (labels.size() != detections.size()) {
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} labels, {} results", labels.size(), detections.size()));
  }
  EvaluationReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    FileResult f{labels[i].name, static_cast<std::uint32_t>(labels[i].events.size()), std::move(detections[i])};
    r.expected_events += f.expected;
    if (!f.detection) {
      ++r.missing;
    } else {
      const auto& d = *f.detection;
      r.detected_events += d.coughs;
      const auto truth = window_labels(labels[i].events, d.probabilities.size(), window, sampling_rate);
      for (std::size_t w = 0; w < truth.size(); ++w) r.confusion.add(truth[w], d.probabilities[w] > threshold);
    }
    r.files.push_back(std::move(f));
  }
  r.metrics = classification_metrics(r.confusion);
  return r;
}

std::vector<double> all_raw_outputs(const EvaluationReport& report) {
  std::vector<double> out;
  for (const auto& f : report.files) {
    if (f.detection) out.insert(out.end(), f.detection->raw_outputs.begin(), f.detection->raw_outputs.end());
  }
  return out;
}

std::string evaluation_csv(const EvaluationReport& report, double threshold) {
  std::string out = "file,expected,detected,windows,skipped_windows,positive_windows\n";
  for (const auto& f : report.files) {
    if (!f.detection) {
      out += fmt::format("{},{},missing,,,\n", f.name, f.expected);
      continue;
    }
    const auto& d = *f.detection;
    const auto skipped = std::count(d.skipped.begin(), d.skipped.end(), true);
    const auto positive = std::count_if(d.probabilities.begin(), d.probabilities.end(), [&](double p) { return p > threshold; });
    out += fmt::format("{},{},{},{},{},{}\n", f.name, f.expected, d.coughs, d.probabilities.size(), skipped, positive);
  }
  return out;
}

std::string metrics_summary(const EvaluationReport& report) {
  const auto& cm = report.confusion;
  const auto& m = report.metrics;
  std::string out;
  out += fmt::format("files              {}\n", report.files.size());
  out += fmt::format("missing            {}\n", report.missing);
  out += fmt::format("expected coughs    {}\n", report.expected_events);
  out += fmt::format("detected coughs    {}\n", report.detected_events);
  out += fmt::format("windows            tp={} fp={} fn={} tn={}\n", cm.tp, cm.fp, cm.fn, cm.tn);
  out += fmt::format("Sensitivity        {}\n", format_metric(m.sensitivity));
  out += fmt::format("Specificity        {}\n", format_metric(m.specificity));
  out += fmt::format("Precision          {}\n", format_metric(m.precision));
  out += fmt::format("Accuracy           {}\n", format_metric(m.accuracy));
  out += fmt::format("MCC                {}\n", format_metric(m.mcc));
  return out;
}

std::string deviation_summary(const std::string& title, const DeviationReport& d) {
  std::string out = title + "\n";
  out += fmt::format("Values             {}\n", d.total_values);
  out += fmt::format("Equal values       {}\n", d.equal_values);
  out += fmt::format("Different values   {}\n", d.different_values);
  out += fmt::format("Max difference     {:.6e}\n", d.max_difference);
  out += fmt::format("Mean difference    {:.6e}\n", d.mean_difference);
  return out;
}

std::vector<RobustnessRow> robustness_rows(const EvaluationReport& reference, const EvaluationReport& candidate,
                                           double threshold) {
  if (reference.files.size() != candidate.files.size()) {
    throw Error(ErrorCode::LengthMismatch, "reports cover different file counts");
  }
  std::vector<RobustnessRow> rows;
  for (std::size_t i = 0; i < reference.files.size(); ++i) {
    const auto& a = reference.files[i];
    const auto& b = candidate.files[i];
    if (a.name != b.name) throw Error(ErrorCode::LengthMismatch, fmt::format("file {} vs {}", a.name, b.name));
    if (!a.detection || !b.detection) continue;
    const auto& pa = a.detection->probabilities;
    const auto& pb = b.detection->probabilities;
    if (pa.size() != pb.size()) throw Error(ErrorCode::LengthMismatch, fmt::format("{}: window counts differ", a.name));
    RobustnessRow row{a.name, 1.0, 0.0, false, a.detection->coughs, b.detection->coughs};
    for (std::size_t w = 0; w < pa.size(); ++w) {
      row.margin = std::min(row.margin, std::abs(pa[w] - threshold));
      row.max_shift = std::max(row.max_shift, std::abs(pa[w] - pb[w]));
    }
    row.condition_holds = row.max_shift < row.margin;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string robustness_csv(const std::vector<RobustnessRow>& rows) {
  std::string out = "file,margin,max_shift,condition_holds,reference_coughs,candidate_coughs\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.9e},{:.9e},{},{},{}\n", r.name, r.margin, r.max_shift, r.condition_holds ? 1 : 0,
                       r.reference_coughs, r.candidate_coughs);
  }
  return out;
}

}  // namespace chanrt::ml
