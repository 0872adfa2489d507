#include "wmark/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wmark/error.hpp"

namespace wmark {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0) + 0.0; }

}  // namespace

Bounds resolve(const BoundsSpec& spec) {
  struct Visitor {
    Bounds operator()(const OriginalBounds& b) const { return {b.upper, b.lower}; }
    Bounds operator()(const PresetBounds& b) const { return {b.upper, b.lower}; }
    Bounds operator()(const ComparisonBounds& b) const {
      switch (b.rule) {
        case ComparisonRule::DetectabilityFloor: return {b.baseline, 0.5};
        case ComparisonRule::DoubleDegradation: return {b.baseline, 2.0 * b.baseline};
      }
      return {b.baseline, b.baseline};
    }
  };
  return std::visit(Visitor{}, spec);
}

double normalize(double value, double upper, double lower) {
  if (upper == lower || !std::isfinite(upper) || !std::isfinite(lower)) {
    throw Error(ErrorKind::DegenerateBounds,
                "upper and lower bounds must be finite and distinct (both " + std::to_string(upper) + ")");
  }
  return clamp01((value - lower) / (upper - lower));
}

double normalize(double value, const BoundsSpec& spec) {
  const auto b = resolve(spec);
  return normalize(value, b.upper, b.lower);
}

double score_detectability(double auc) {
  if (!(auc >= 0.0 && auc <= 1.0)) throw Error(ErrorKind::InvalidArgument, "AUCROC must lie in [0, 1]");
  return normalize(auc, OriginalBounds{1.0, 0.5});
}

double score_double_degradation(double marked, double base) {
  if (!(base > 0.0)) throw Error(ErrorKind::NonpositiveBaseline, "baseline must be > 0");
  return normalize(marked, ComparisonBounds{base, ComparisonRule::DoubleDegradation});
}

double score_detect_time(double seconds_per_text) {
  if (!(seconds_per_text >= 0.0)) throw Error(ErrorKind::InvalidArgument, "detect time must be >= 0");
  return normalize(seconds_per_text, PresetBounds{0.0, 1.0});
}

double score_usability(double s_memory, double s_generate_time, double s_detect_time) {
  for (double s : {s_memory, s_generate_time, s_detect_time}) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::InvalidArgument, "usability sub-scores must lie in [0, 1]");
  }
  return (s_memory + s_generate_time + s_detect_time) / 3.0;
}

double score_robustness(double auc_before, double auc_after) {
  if (!(auc_before > 0.5)) {
    throw Error(ErrorKind::DegenerateBounds, "robustness needs an unattacked AUCROC above 0.5");
  }
  return normalize(auc_after, ComparisonBounds{auc_before, ComparisonRule::DetectabilityFloor});
}

double score_steal(double auc_spoof) {
  if (!(auc_spoof >= 0.0 && auc_spoof <= 1.0)) throw Error(ErrorKind::InvalidArgument, "AUCROC must lie in [0, 1]");
  // A spoof the detector fully accepts (AUCROC 1) is the worst case.
  return normalize(auc_spoof, PresetBounds{0.5, 1.0});
}

std::string_view to_string(Scenario scenario) noexcept {
  return scenario == Scenario::Authorized ? "A" : "NA";
}

double score_imperceptibility(std::span<const double, 4> steal_scores, Scenario scenario) {
  if (scenario == Scenario::Authorized) return *std::min_element(steal_scores.begin(), steal_scores.end());
  return std::accumulate(steal_scores.begin(), steal_scores.end(), 0.0) / 4.0;
}

void WeightVector::validate() const {
  for (double w : {detectability, text_quality, usability, robustness, imperceptibility}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::InvalidWeights, "weights must be finite and >= 0");
  }
  if (std::abs(sum() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidWeights, "weights sum to " + std::to_string(sum()) + ", expected 1");
  }
}

double score_comprehensive(const CharacteristicScores& s, const WeightVector& w) {
  w.validate();
  return w.detectability * s.detectability + w.text_quality * s.text_quality + w.usability * s.usability +
         w.robustness * s.robustness + w.imperceptibility * s.imperceptibility;
}

CharacteristicScores score_characteristics(const RawMetrics& raw, Scenario scenario) {
  if (raw.detect_batch_size == 0) throw Error(ErrorKind::InvalidArgument, "detect batch size must be >= 1");
  CharacteristicScores s;
  s.detectability = score_detectability(raw.auc);
  s.text_quality = score_double_degradation(raw.ppl_marked, raw.ppl_base);
  s.memory = score_double_degradation(raw.memory_marked, raw.memory_base);
  s.generate_time = score_double_degradation(raw.generate_time_marked, raw.generate_time_base);
  s.detect_time = score_detect_time(raw.detect_time_total / static_cast<double>(raw.detect_batch_size));
  s.usability = score_usability(s.memory, s.generate_time, s.detect_time);
  s.robustness = score_robustness(raw.auc_before_scrub, raw.auc_after_scrub);
  for (std::size_t n = 0; n < 4; ++n) s.steal[n] = score_steal(raw.steal_auc[n]);
  s.imperceptibility = score_imperceptibility(s.steal, scenario);
  return s;
}

}  // namespace wmark
