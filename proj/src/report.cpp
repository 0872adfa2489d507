#include "wmark/report.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "wmark/error.hpp"

namespace wmark {

using nlohmann::json;

std::string_view to_string(Provenance provenance) noexcept {
  return provenance == Provenance::Measured ? "measured" : "fixture";
}

EvaluationReport evaluate_metrics(std::span<const EnvironmentMetrics> metrics, Scenario scenario,
                                  const WeightVector& weights, Provenance provenance) {
  weights.validate();
  EvaluationReport report;
  report.scenario = scenario;
  report.weights = weights;
  report.provenance = provenance;
  for (const auto& env : metrics) {
    EnvironmentReport er{env.model, env.dataset, {}};
    for (const auto& sm : env.schemes) {
      SchemeResult r;
      r.label = sm.label;
      r.raw = sm.raw;
      r.scores = score_characteristics(sm.raw, scenario);
      r.cefw = score_comprehensive(r.scores, weights);
      er.schemes.push_back(std::move(r));
    }
    report.environments.push_back(std::move(er));
  }
  return report;
}

namespace {

json raw_to_json(const RawMetrics& r) {
  return json{{"aucroc", r.auc},
              {"ppl_base", r.ppl_base},
              {"ppl_marked", r.ppl_marked},
              {"generate_time_base_s", r.generate_time_base},
              {"generate_time_marked_s", r.generate_time_marked},
              {"detect_time_total_s", r.detect_time_total},
              {"detect_batch_size", r.detect_batch_size},
              {"memory_base_mb", r.memory_base},
              {"memory_marked_mb", r.memory_marked},
              {"aucroc_no_attack", r.auc_before_scrub},
              {"aucroc_attacked", r.auc_after_scrub},
              {"steal_aucroc", r.steal_auc}};
}

RawMetrics raw_from_json(const json& j) {
  RawMetrics r;
  r.auc = j.at("aucroc").get<double>();
  r.ppl_base = j.at("ppl_base").get<double>();
  r.ppl_marked = j.at("ppl_marked").get<double>();
  r.generate_time_base = j.at("generate_time_base_s").get<double>();
  r.generate_time_marked = j.at("generate_time_marked_s").get<double>();
  r.detect_time_total = j.at("detect_time_total_s").get<double>();
  r.detect_batch_size = j.at("detect_batch_size").get<std::size_t>();
  r.memory_base = j.at("memory_base_mb").get<double>();
  r.memory_marked = j.at("memory_marked_mb").get<double>();
  r.auc_before_scrub = j.at("aucroc_no_attack").get<double>();
  r.auc_after_scrub = j.at("aucroc_attacked").get<double>();
  r.steal_auc = j.at("steal_aucroc").get<std::array<double, 4>>();
  return r;
}

json scores_to_json(const CharacteristicScores& s) {
  return json{{"S_D", s.detectability}, {"S_T", s.text_quality}, {"S_U", s.usability},
              {"S_R", s.robustness},    {"S_I", s.imperceptibility}, {"S_MC", s.memory},
              {"S_GT", s.generate_time}, {"S_DT", s.detect_time},   {"S_STEAL", s.steal}};
}

CharacteristicScores scores_from_json(const json& j) {
  CharacteristicScores s;
  s.detectability = j.at("S_D").get<double>();
  s.text_quality = j.at("S_T").get<double>();
  s.usability = j.at("S_U").get<double>();
  s.robustness = j.at("S_R").get<double>();
  s.imperceptibility = j.at("S_I").get<double>();
  s.memory = j.at("S_MC").get<double>();
  s.generate_time = j.at("S_GT").get<double>();
  s.detect_time = j.at("S_DT").get<double>();
  s.steal = j.at("S_STEAL").get<std::array<double, 4>>();
  return s;
}

json weights_to_json(const WeightVector& w) {
  return json{{"detectability", w.detectability},
              {"text_quality", w.text_quality},
              {"usability", w.usability},
              {"robustness", w.robustness},
              {"imperceptibility", w.imperceptibility}};
}

}  // namespace

void write_json(const EvaluationReport& report, std::ostream& out) {
  json envs = json::array();
  for (const auto& env : report.environments) {
    json schemes = json::array();
    for (const auto& s : env.schemes) {
      json js{{"label", s.label},
              {"raw", raw_to_json(s.raw)},
              {"scores", scores_to_json(s.scores)},
              {"S_CEFW", s.cefw},
              // S_D is normalized; this marks when it coincides with the raw AUCROC.
              {"S_D_equals_raw_aucroc", s.scores.detectability == s.raw.auc}};
      if (s.roc) {
        json pts = json::array();
        for (const auto& p : s.roc->points) pts.push_back({p.fpr, p.tpr});
        js["roc"] = json{{"auc", s.roc->auc}, {"points", pts}};
      }
      schemes.push_back(std::move(js));
    }
    envs.push_back(json{{"model", env.model}, {"dataset", env.dataset}, {"schemes", schemes}});
  }
  json root{{"format", "wmark-report"},
            {"version", 1},
            {"scenario", std::string(to_string(report.scenario))},
            {"provenance", std::string(to_string(report.provenance))},
            {"weights", weights_to_json(report.weights)},
            {"environments", envs}};
  out << root.dump(2) << '\n';
}

EvaluationReport read_json(std::istream& in) {
  try {
    const json root = json::parse(in);
    if (root.at("format") != "wmark-report" || root.at("version") != 1) {
      throw Error(ErrorKind::Format, "not a version 1 wmark report");
    }
    EvaluationReport r;
    const auto scenario = root.at("scenario").get<std::string>();
    if (scenario != "A" && scenario != "NA") throw Error(ErrorKind::Format, "unknown scenario " + scenario);
    r.scenario = scenario == "A" ? Scenario::Authorized : Scenario::NonAuthorized;
    r.provenance = root.at("provenance") == "measured" ? Provenance::Measured : Provenance::Fixture;
    const auto& w = root.at("weights");
    r.weights = {w.at("detectability"), w.at("text_quality"), w.at("usability"), w.at("robustness"),
                 w.at("imperceptibility")};
    for (const auto& je : root.at("environments")) {
      EnvironmentReport env{je.at("model"), je.at("dataset"), {}};
      for (const auto& js : je.at("schemes")) {
        SchemeResult s;
        s.label = js.at("label");
        s.raw = raw_from_json(js.at("raw"));
        s.scores = scores_from_json(js.at("scores"));
        s.cefw = js.at("S_CEFW");
        if (js.contains("roc")) {
          RocCurve c;
          c.auc = js["roc"].at("auc");
          for (const auto& p : js["roc"].at("points")) c.points.push_back({p.at(0), p.at(1)});
          s.roc = std::move(c);
        }
        env.schemes.push_back(std::move(s));
      }
      r.environments.push_back(std::move(env));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("report JSON: ") + e.what());
  }
}

void write_csv(const EvaluationReport& report, std::ostream& out) {
  out << "model,dataset,scheme,provenance,scenario,aucroc,ppl_base,ppl_marked,generate_time_base_s,"
         "generate_time_marked_s,detect_time_total_s,detect_batch_size,memory_base_mb,memory_marked_mb,"
         "aucroc_no_attack,aucroc_attacked,steal1_aucroc,steal2_aucroc,steal3_aucroc,steal4_aucroc,"
         "S_MC,S_GT,S_DT,S_STEAL1,S_STEAL2,S_STEAL3,S_STEAL4,S_D,S_T,S_U,S_R,S_I,S_CEFW\n";
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& env : report.environments) {
    for (const auto& s : env.schemes) {
      const auto& r = s.raw;
      const auto& c = s.scores;
      out << env.model << ',' << env.dataset << ',' << s.label << ',' << to_string(report.provenance) << ','
          << to_string(report.scenario);
      for (double v : {r.auc, r.ppl_base, r.ppl_marked, r.generate_time_base, r.generate_time_marked,
                       r.detect_time_total, static_cast<double>(r.detect_batch_size), r.memory_base,
                       r.memory_marked, r.auc_before_scrub, r.auc_after_scrub}) {
        out << ',' << num(v);
      }
      for (double v : r.steal_auc) out << ',' << num(v);
      for (double v : {c.memory, c.generate_time, c.detect_time}) out << ',' << num(v);
      for (double v : c.steal) out << ',' << num(v);
      for (double v : {c.detectability, c.text_quality, c.usability, c.robustness, c.imperceptibility, s.cefw}) {
        out << ',' << num(v);
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string fmt(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void svg_open(std::ostringstream& s, int w, int h, std::string_view title) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
}

}  // namespace

std::string roc_svg(const EnvironmentReport& env) {
  constexpr int W = 560, H = 460, L = 60, T = 40, P = 360;
  std::ostringstream s;
  svg_open(s, W, H, "ROC curves, " + env.name());
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << P << "\" height=\"" << P
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T + P << "\" x2=\"" << L + P << "\" y2=\"" << T
    << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    s << "<text x=\"" << L + v * P << "\" y=\"" << T + P + 16 << "\" text-anchor=\"middle\">" << fmt(v, 2)
      << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << T + P - v * P + 4 << "\" text-anchor=\"end\">" << fmt(v, 2)
      << "</text>\n";
  }
  s << "<text x=\"" << L + P / 2 << "\" y=\"" << T + P + 34 << "\" text-anchor=\"middle\">false positive rate</text>\n";
  s << "<text x=\"16\" y=\"" << T + P / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << T + P / 2
    << ")\">true positive rate</text>\n";
  std::size_t k = 0;
  for (const auto& sc : env.schemes) {
    if (!sc.roc) continue;
    s << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color(k) << "\" points=\"";
    for (const auto& p : sc.roc->points) s << fmt(L + p.fpr * P, 2) << ',' << fmt(T + P - p.tpr * P, 2) << ' ';
    s << "\"/>\n";
    const int y = T + 10 + static_cast<int>(k) * 16;
    s << "<rect x=\"" << L + P + 14 << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color(k)
      << "\"/>\n";
    s << "<text x=\"" << L + P + 28 << "\" y=\"" << y + 1 << "\">" << escape(sc.label) << " (" << fmt(sc.roc->auc)
      << ")</text>\n";
    ++k;
  }
  if (k == 0) {
    s << "<text x=\"" << L + P / 2 << "\" y=\"" << T + P / 2 << "\" text-anchor=\"middle\">no curves (fixture input)</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string scores_svg(const EnvironmentReport& env) {
  static constexpr const char* kNames[] = {"S_D", "S_T", "S_U", "S_R", "S_I"};
  const int n = static_cast<int>(env.schemes.size());
  const int group = 5 * 12 + 14;
  const int L = 50, T = 40, P = 260;
  const int W = L + std::max(1, n) * group + 120, H = T + P + 50;
  std::ostringstream s;
  svg_open(s, W, H, "Characteristic scores, " + env.name());
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    const double y = T + P - v * P;
    s << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << L + n * group << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(v, 2) << "</text>\n";
  }
  for (int i = 0; i < n; ++i) {
    const auto& c = env.schemes[static_cast<std::size_t>(i)].scores;
    const double vals[] = {c.detectability, c.text_quality, c.usability, c.robustness, c.imperceptibility};
    const int x0 = L + i * group + 7;
    for (int j = 0; j < 5; ++j) {
      const double h = vals[j] * P;
      s << "<rect x=\"" << x0 + j * 12 << "\" y=\"" << fmt(T + P - h, 2) << "\" width=\"11\" height=\"" << fmt(h, 2)
        << "\" fill=\"" << color(static_cast<std::size_t>(j)) << "\"/>\n";
    }
    s << "<text x=\"" << x0 + 30 << "\" y=\"" << T + P + 16 << "\" text-anchor=\"middle\">"
      << escape(env.schemes[static_cast<std::size_t>(i)].label) << "</text>\n";
  }
  for (int j = 0; j < 5; ++j) {
    const int x = L + n * group + 16, y = T + 10 + j * 16;
    s << "<rect x=\"" << x << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\""
      << color(static_cast<std::size_t>(j)) << "\"/>\n";
    s << "<text x=\"" << x + 14 << "\" y=\"" << y + 1 << "\">" << kNames[j] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string ranking_svg(const EnvironmentReport& env) {
  std::vector<const SchemeResult*> order;
  for (const auto& sc : env.schemes) order.push_back(&sc);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->cefw > b->cefw; });
  const int L = 70, T = 40, P = 360, row = 22;
  const int W = L + P + 70, H = T + static_cast<int>(order.size()) * row + 30;
  std::ostringstream s;
  svg_open(s, W, H, "S_CEFW ranking, " + env.name());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int y = T + static_cast<int>(i) * row;
    const double w = order[i]->cefw * P;
    s << "<text x=\"" << L - 6 << "\" y=\"" << y + 14 << "\" text-anchor=\"end\">" << escape(order[i]->label)
      << "</text>\n";
    s << "<rect x=\"" << L << "\" y=\"" << y + 3 << "\" width=\"" << fmt(w, 2) << "\" height=\"16\" fill=\""
      << color(0) << "\"/>\n";
    s << "<text x=\"" << fmt(L + w + 4, 2) << "\" y=\"" << y + 15 << "\">" << fmt(order[i]->cefw) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace wmark
