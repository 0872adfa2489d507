#include "wmark/fixtures.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "wmark/error.hpp"

namespace wmark {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_cell(const std::string& cell, std::size_t line_no) {
  if (cell.empty() || cell == "-") return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
  }
  return v;
}

}  // namespace

MetricTable MetricTable::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, "metric table is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "model" || header[1] != "dataset" || header[2] != "metric" ||
      header[3] != "Original") {
    throw Error(ErrorKind::Format, "metric table header must start with model,dataset,metric,Original");
  }
  MetricTable table;
  table.schemes_.assign(header.begin() + 4, header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    MetricRow row{cells[0], cells[1], cells[2], parse_cell(cells[3], line_no), {}};
    for (std::size_t i = 4; i < cells.size(); ++i) row.values.push_back(parse_cell(cells[i], line_no));
    table.rows_.push_back(std::move(row));
  }
  return table;
}

MetricTable MetricTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_csv(in);
}

const MetricRow* MetricTable::find(const std::string& model, const std::string& dataset,
                                   const std::string& metric) const {
  for (const auto& row : rows_) {
    if (row.model == model && row.dataset == dataset && row.metric == metric) return &row;
  }
  return nullptr;
}

std::optional<double> MetricTable::value(const std::string& model, const std::string& dataset,
                                         const std::string& metric, const std::string& scheme) const {
  const MetricRow* row = find(model, dataset, metric);
  if (!row) return std::nullopt;
  for (std::size_t i = 0; i < schemes_.size(); ++i) {
    if (schemes_[i] == scheme) return row->values[i];
  }
  return std::nullopt;
}

std::vector<EnvironmentMetrics> load_fixture_metrics(const std::filesystem::path& dir) {
  const auto det = MetricTable::read_csv(dir / "detectability.csv");
  const auto tq = MetricTable::read_csv(dir / "text_quality.csv");
  const auto us = MetricTable::read_csv(dir / "usability.csv");
  const auto rob = MetricTable::read_csv(dir / "robustness.csv");
  const auto imp = MetricTable::read_csv(dir / "imperceptibility.csv");

  std::vector<EnvironmentMetrics> envs;
  for (const auto& row : det.rows()) {
    if (row.metric != "aucroc") continue;
    EnvironmentMetrics env{row.model, row.dataset, {}};
    auto missing = [&](const char* characteristic, const std::string& what, const std::string& scheme) {
      return Error(ErrorKind::MissingMetric, std::string(characteristic) + ": no " + what + " for " + scheme +
                                                 " on " + env.name());
    };
    auto need = [&](const MetricTable& t, const char* characteristic, const std::string& metric,
                    const std::string& scheme) {
      auto v = t.value(env.model, env.dataset, metric, scheme);
      if (!v) throw missing(characteristic, metric, scheme);
      return *v;
    };
    auto need_original = [&](const MetricTable& t, const char* characteristic, const std::string& metric) {
      const MetricRow* r = t.find(env.model, env.dataset, metric);
      if (!r || !r->original) throw missing(characteristic, metric, "Original");
      return *r->original;
    };

    for (const auto& label : det.schemes()) {
      SchemeMetrics sm{label, {}};
      auto& raw = sm.raw;
      raw.auc = need(det, "detectability", "aucroc", label);
      raw.ppl_base = need_original(tq, "text quality", "ppl");
      raw.ppl_marked = need(tq, "text quality", "ppl", label);
      raw.generate_time_base = need_original(us, "usability", "generate_time_s");
      raw.generate_time_marked = need(us, "usability", "generate_time_s", label);
      raw.detect_time_total = need(us, "usability", "detect_time_s", label);
      const double batch = need(us, "usability", "detect_batch_size", label);
      if (!(batch >= 1.0)) throw Error(ErrorKind::Format, "detect_batch_size must be >= 1");
      raw.detect_batch_size = static_cast<std::size_t>(batch);
      raw.memory_base = need_original(us, "usability", "memory_mb");
      raw.memory_marked = need(us, "usability", "memory_mb", label);
      raw.auc_before_scrub = need(rob, "robustness", "aucroc_no_attack", label);
      raw.auc_after_scrub = need(rob, "robustness", "aucroc_attacked", label);
      for (int n = 1; n <= 4; ++n) {
        raw.steal_auc[static_cast<std::size_t>(n - 1)] =
            need(imp, "imperceptibility", "steal" + std::to_string(n) + "_aucroc", label);
      }
      env.schemes.push_back(std::move(sm));
    }
    envs.push_back(std::move(env));
  }
  if (envs.empty()) throw Error(ErrorKind::MissingMetric, "detectability: no aucroc rows in " + dir.string());
  return envs;
}

}  // namespace wmark
