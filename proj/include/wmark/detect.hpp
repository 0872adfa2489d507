#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wmark/lm.hpp"
#include "wmark/watermark.hpp"

namespace wmark {

struct GreenCount {
  std::size_t green = 0;
  std::size_t scored = 0;
};

// Recomputes each step's partition from the text alone. KGW and BW score
// positions w..|text|-1 (0-based), whose context token lies inside the text;
// UNIW scores every position. Throws TextTooShort when nothing can be scored.
GreenCount count_green(std::span<const TokenId> text, const Watermark& watermark);

// (g - T/2) / sqrt(T/4), the gamma = 0.5 soft-watermark statistic.
double z_score(std::size_t green, std::size_t scored);

struct DetectionResult {
  std::size_t green = 0;
  std::size_t scored = 0;
  double z = 0.0;
};

DetectionResult detect(std::span<const TokenId> text, const Watermark& watermark);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  // From (0,0) to (1,1), nondecreasing in both coordinates.
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// AUC as the Mann-Whitney statistic (ties count one half); the curve comes
// from sweeping a "score >= threshold is positive" cut over distinct scores.
RocCurve roc_auc(std::span<const double> positive, std::span<const double> negative);

// Largest TPR among thresholds whose empirical FPR is <= fpr_cap.
double tpr_at_fpr(std::span<const double> positive, std::span<const double> negative, double fpr_cap);

}  // namespace wmark
