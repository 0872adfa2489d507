#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmark/detect.hpp"
#include "wmark/fixtures.hpp"
#include "wmark/scoring.hpp"

namespace wmark {

enum class Provenance { Measured, Fixture };

std::string_view to_string(Provenance provenance) noexcept;

struct SchemeResult {
  std::string label;
  RawMetrics raw;
  CharacteristicScores scores;
  double cefw = 0.0;
  // Curves exist for measured runs only.
  std::optional<RocCurve> roc;
};

struct EnvironmentReport {
  std::string model;
  std::string dataset;
  std::vector<SchemeResult> schemes;

  std::string name() const { return model + "/" + dataset; }
};

struct EvaluationReport {
  Scenario scenario = Scenario::Authorized;
  WeightVector weights;
  Provenance provenance = Provenance::Fixture;
  std::vector<EnvironmentReport> environments;
};

// Scores every scheme of every environment. Throws InvalidWeights before any
// scoring happens.
EvaluationReport evaluate_metrics(std::span<const EnvironmentMetrics> metrics, Scenario scenario,
                                  const WeightVector& weights, Provenance provenance);

// Schema in docs/formats.md. Doubles are written with 17 significant digits,
// so read_json(write_json(r)) == r field for field.
void write_json(const EvaluationReport& report, std::ostream& out);
EvaluationReport read_json(std::istream& in);

// One row per (environment, scheme): raw metrics, sub-scores, scores, S_CEFW.
void write_csv(const EvaluationReport& report, std::ostream& out);

// Static SVG charts for one environment.
std::string roc_svg(const EnvironmentReport& env);
std::string scores_svg(const EnvironmentReport& env);
std::string ranking_svg(const EnvironmentReport& env);

}  // namespace wmark
