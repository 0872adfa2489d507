#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <variant>

namespace wmark {

// ---------------------------------------------------------------------------
// Bounds principles. Every metric is mapped into [0, 1] by a linear map that
// sends `lower` to 0 and `upper` to 1, clamped outside.

// The metric's own range, e.g. AUCROC with upper 1 and lower 0.5.
struct OriginalBounds {
  double upper = 1.0;
  double lower = 0.5;
};

// Values fixed by whoever runs the evaluation, e.g. detect time 0 s to 1 s.
struct PresetBounds {
  double upper = 0.0;
  double lower = 1.0;
};

enum class ComparisonRule {
  // upper = baseline value, lower = 0.5 (the AUCROC floor).
  DetectabilityFloor,
  // upper = baseline value, lower = 2 * baseline.
  DoubleDegradation,
};

// Bounds taken from a second measurement of the same metric.
struct ComparisonBounds {
  double baseline = 1.0;
  ComparisonRule rule = ComparisonRule::DoubleDegradation;
};

using BoundsSpec = std::variant<OriginalBounds, PresetBounds, ComparisonBounds>;

struct Bounds {
  double upper;
  double lower;
};

Bounds resolve(const BoundsSpec& spec);

// clamp((v - lower) / (upper - lower), 0, 1). Throws DegenerateBounds when
// upper == lower.
double normalize(double value, double upper, double lower);
double normalize(double value, const BoundsSpec& spec);

// ---------------------------------------------------------------------------
// Characteristic scores

double score_detectability(double auc);
// Degradation relative to a baseline, worst case twice the baseline. Used for
// perplexity, generate time and memory. Throws NonpositiveBaseline.
double score_double_degradation(double marked, double base);
// Seconds to detect one text, 0 s best and 1 s worst.
double score_detect_time(double seconds_per_text);
double score_usability(double s_memory, double s_generate_time, double s_detect_time);
// Throws DegenerateBounds if auc_before <= 0.5.
double score_robustness(double auc_before, double auc_after);
double score_steal(double auc_spoof);

enum class Scenario {
  Authorized,     // attacker can query the detector and keeps the best attack
  NonAuthorized,  // attacker picks one of the attacks at random
};

std::string_view to_string(Scenario scenario) noexcept;

// Authorized: min of the four STEAL scores. NonAuthorized: their mean.
double score_imperceptibility(std::span<const double, 4> steal_scores, Scenario scenario);

struct WeightVector {
  double detectability = 1.0 / 6.0;
  double text_quality = 1.0 / 6.0;
  double usability = 1.0 / 6.0;
  double robustness = 1.0 / 4.0;
  double imperceptibility = 1.0 / 4.0;

  // Throws InvalidWeights unless all are >= 0 and they sum to 1 within 1e-9.
  void validate() const;
  double sum() const noexcept {
    return detectability + text_quality + usability + robustness + imperceptibility;
  }
};

struct CharacteristicScores {
  double detectability = 0.0;
  double text_quality = 0.0;
  double usability = 0.0;
  double robustness = 0.0;
  double imperceptibility = 0.0;

  double memory = 0.0;
  double generate_time = 0.0;
  double detect_time = 0.0;
  std::array<double, 4> steal{};
};

double score_comprehensive(const CharacteristicScores& scores, const WeightVector& weights);

// The raw measurements behind one scheme's scores. Times and memory are batch
// totals; base and marked runs use the same batch size.
struct RawMetrics {
  double auc = 0.0;
  double ppl_base = 0.0;
  double ppl_marked = 0.0;
  double generate_time_base = 0.0;
  double generate_time_marked = 0.0;
  double detect_time_total = 0.0;
  std::size_t detect_batch_size = 1;
  double memory_base = 0.0;
  double memory_marked = 0.0;
  double auc_before_scrub = 0.0;
  double auc_after_scrub = 0.0;
  std::array<double, 4> steal_auc{};
};

CharacteristicScores score_characteristics(const RawMetrics& raw, Scenario scenario);

}  // namespace wmark
