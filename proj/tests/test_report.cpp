#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wmark/error.hpp"
#include "wmark/fixtures.hpp"
#include "wmark/report.hpp"

using namespace wmark;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(WMARK_SOURCE_DIR) / "data" / "fixtures";

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("wmark_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("metric table parsing") {
  std::stringstream ok(
      "model,dataset,metric,Original,UNIW,BW1\n"
      "m,d,ppl,4.5,6.0,-\n"
      "m,d,aucroc,-,0.9,\n");
  const auto t = MetricTable::read_csv(ok);
  CHECK(t.schemes() == std::vector<std::string>{"UNIW", "BW1"});
  CHECK(t.rows().size() == 2);
  CHECK(t.find("m", "d", "ppl")->original == 4.5);
  CHECK(t.value("m", "d", "ppl", "UNIW") == 6.0);
  CHECK_FALSE(t.value("m", "d", "ppl", "BW1").has_value());
  CHECK_FALSE(t.value("m", "d", "aucroc", "BW1").has_value());
  CHECK_FALSE(t.find("m", "d", "nope"));

  std::stringstream bad_header("a,b,c\n");
  CHECK_THROWS_AS(MetricTable::read_csv(bad_header), Error);
  std::stringstream short_row("model,dataset,metric,Original,UNIW\nm,d,ppl\n");
  CHECK_THROWS_AS(MetricTable::read_csv(short_row), Error);
  std::stringstream bad_number("model,dataset,metric,Original,UNIW\nm,d,ppl,-,abc\n");
  CHECK_THROWS_AS(MetricTable::read_csv(bad_number), Error);
}

TEST_CASE("fixture metrics load") {
  const auto envs = load_fixture_metrics(kFixtures);
  REQUIRE(envs.size() == 4);
  CHECK(envs[0].name() == "OPT-2.7b/C4");
  REQUIRE(envs[0].schemes.size() == 9);
  const auto& uniw = envs[0].schemes[0].raw;
  CHECK(envs[0].schemes[0].label == "UNIW");
  CHECK(uniw.ppl_base == 4.388);
  CHECK(uniw.ppl_marked == 6.273);
  CHECK(uniw.detect_time_total == 20.79);
  CHECK(uniw.detect_batch_size == 5000);
  CHECK(uniw.steal_auc[0] == 1.0);
}

TEST_CASE("missing fixture metric is reported") {
  const auto d = scratch_dir("missing");
  for (const auto& e : fs::directory_iterator(kFixtures)) fs::copy_file(e.path(), d / e.path().filename());
  // drop every steal4 row
  std::ifstream in(d / "imperceptibility.csv");
  std::string line;
  std::string kept;
  while (std::getline(in, line)) {
    if (line.find("steal4_aucroc") == std::string::npos) kept += line + "\n";
  }
  in.close();
  std::ofstream(d / "imperceptibility.csv") << kept;
  try {
    load_fixture_metrics(d);
    FAIL("expected MissingMetric");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingMetric);
    CHECK(std::string(e.what()).find("imperceptibility") != std::string::npos);
  }
  fs::remove_all(d);
}

TEST_CASE("report JSON round trip and consistency") {
  const auto envs = load_fixture_metrics(kFixtures);
  const auto report = evaluate_metrics(envs, Scenario::Authorized, WeightVector{}, Provenance::Fixture);
  for (const auto& env : report.environments) {
    for (const auto& s : env.schemes) {
      const auto& c = s.scores;
      const double sum = c.detectability / 6 + c.text_quality / 6 + c.usability / 6 + c.robustness / 4 +
                         c.imperceptibility / 4;
      CHECK(s.cefw == doctest::Approx(sum).epsilon(1e-12));
    }
  }
  std::stringstream first;
  write_json(report, first);
  std::stringstream in(first.str());
  const auto back = read_json(in);
  std::stringstream second;
  write_json(back, second);
  CHECK(first.str() == second.str());
  CHECK(back.environments.size() == 4);
  CHECK(back.environments[1].schemes[3].cefw == report.environments[1].schemes[3].cefw);
  CHECK(back.environments[2].schemes[8].raw.steal_auc == report.environments[2].schemes[8].raw.steal_auc);

  std::stringstream csv;
  write_csv(report, csv);
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  CHECK(lines == 1 + 36);

  WeightVector bad;
  bad.usability = 0.9;
  CHECK_THROWS_AS(evaluate_metrics(envs, Scenario::Authorized, bad, Provenance::Fixture), Error);
  std::stringstream junk("{}");
  CHECK_THROWS_AS(read_json(junk), Error);
}

TEST_CASE("non-authorized scenario averages steal scores") {
  const auto envs = load_fixture_metrics(kFixtures);
  const auto na = evaluate_metrics(envs, Scenario::NonAuthorized, WeightVector{}, Provenance::Fixture);
  const auto& s = na.environments[0].schemes[0].scores;
  CHECK(s.imperceptibility == doctest::Approx((s.steal[0] + s.steal[1] + s.steal[2] + s.steal[3]) / 4));
}

TEST_CASE("SVG output") {
  const auto envs = load_fixture_metrics(kFixtures);
  auto report = evaluate_metrics(envs, Scenario::Authorized, WeightVector{}, Provenance::Fixture);
  auto& env = report.environments[0];
  env.schemes[0].roc = RocCurve{{{0, 0}, {0.1, 0.8}, {1, 1}}, 0.89};
  for (const auto& svg : {roc_svg(env), scores_svg(env), ranking_svg(env)}) {
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("UNIW") != std::string::npos);
  }
}
