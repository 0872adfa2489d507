#include "wmark/detect.hpp"

#include <algorithm>
#include <cmath>

#include "wmark/error.hpp"

namespace wmark {

GreenCount count_green(std::span<const TokenId> text, const Watermark& watermark) {
  const auto& cfg = watermark.config();
  const std::size_t first = cfg.scheme == Scheme::Uniw ? 0 : static_cast<std::size_t>(cfg.window);
  if (text.size() <= first || text.empty()) {
    throw Error(ErrorKind::TextTooShort, "text of " + std::to_string(text.size()) + " tokens cannot be scored by " +
                                             cfg.label());
  }
  GreenCount out;
  Partition scratch;
  for (std::size_t i = first; i < text.size(); ++i) {
    if (text[i] >= watermark.vocab_size()) throw Error(ErrorKind::InvalidArgument, "token id outside vocabulary");
    const Partition& green = watermark.step_partition(text, i, scratch);
    out.green += green.is_green(text[i]) ? 1 : 0;
    ++out.scored;
  }
  return out;
}

double z_score(std::size_t green, std::size_t scored) {
  if (scored == 0) throw Error(ErrorKind::InvalidArgument, "z-score needs at least one scored token");
  const double t = static_cast<double>(scored);
  return (static_cast<double>(green) - 0.5 * t) / std::sqrt(0.25 * t);
}

DetectionResult detect(std::span<const TokenId> text, const Watermark& watermark) {
  const auto gc = count_green(text, watermark);
  return {gc.green, gc.scored, z_score(gc.green, gc.scored)};
}

namespace {

void require_scores(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) {
    throw Error(ErrorKind::EmptyScoreSet, "both score sets must be non-empty");
  }
}

struct Labeled {
  double score;
  bool positive;
};

}  // namespace

RocCurve roc_auc(std::span<const double> positive, std::span<const double> negative) {
  require_scores(positive, negative);
  std::vector<Labeled> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Labeled& a, const Labeled& b) { return a.score > b.score; });

  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  // Pairs (pos, neg) with pos > neg, plus half of the tied pairs.
  double wins = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t tie_pos = 0;
    std::size_t tie_neg = 0;
    const double s = all[i].score;
    for (; i < all.size() && all[i].score == s; ++i) (all[i].positive ? tie_pos : tie_neg)++;
    // Every negative in this group loses to the positives already above it.
    wins += static_cast<double>(tie_neg) * static_cast<double>(tp);
    wins += 0.5 * static_cast<double>(tie_neg) * static_cast<double>(tie_pos);
    tp += tie_pos;
    fp += tie_neg;
    curve.points.push_back({static_cast<double>(fp) / nn, static_cast<double>(tp) / np});
  }
  curve.auc = wins / (np * nn);
  return curve;
}

double tpr_at_fpr(std::span<const double> positive, std::span<const double> negative, double fpr_cap) {
  require_scores(positive, negative);
  if (!(fpr_cap > 0.0 && fpr_cap < 1.0)) throw Error(ErrorKind::InvalidArgument, "fpr_cap must lie in (0, 1)");
  double best = 0.0;
  for (const auto& p : roc_auc(positive, negative).points) {
    if (p.fpr <= fpr_cap) best = std::max(best, p.tpr);
  }
  return best;
}

}  // namespace wmark
