#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmark/scoring.hpp"

namespace wmark {

// One line of a wide metric table:
//   model,dataset,metric,Original,<scheme label>...
// "-" or an empty cell marks a value that was not reported.
struct MetricRow {
  std::string model;
  std::string dataset;
  std::string metric;
  std::optional<double> original;
  std::vector<std::optional<double>> values;  // parallel to MetricTable::schemes()
};

class MetricTable {
 public:
  // Throws Format on a malformed header, a short row or an unparsable number.
  static MetricTable read_csv(std::istream& in);
  static MetricTable read_csv(const std::filesystem::path& path);

  const std::vector<std::string>& schemes() const noexcept { return schemes_; }
  const std::vector<MetricRow>& rows() const noexcept { return rows_; }
  const MetricRow* find(const std::string& model, const std::string& dataset, const std::string& metric) const;
  // The value for `scheme`, nullopt when absent or unreported.
  std::optional<double> value(const std::string& model, const std::string& dataset, const std::string& metric,
                              const std::string& scheme) const;

 private:
  std::vector<std::string> schemes_;
  std::vector<MetricRow> rows_;
};

struct SchemeMetrics {
  std::string label;
  RawMetrics raw;
};

struct EnvironmentMetrics {
  std::string model;
  std::string dataset;
  std::vector<SchemeMetrics> schemes;

  std::string name() const { return model + "/" + dataset; }
};

// Reads detectability.csv, text_quality.csv, usability.csv, robustness.csv and
// imperceptibility.csv from `dir` (layouts in docs/formats.md). Environments and
// schemes follow the order of detectability.csv. Throws MissingMetric naming
// the characteristic, environment and scheme of the first gap.
std::vector<EnvironmentMetrics> load_fixture_metrics(const std::filesystem::path& dir);

}  // namespace wmark
