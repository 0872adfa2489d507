#include <doctest.h>

#include <array>

#include "oracle.hpp"
#include "wmark/error.hpp"
#include "wmark/rng.hpp"
#include "wmark/scoring.hpp"

using namespace wmark;

TEST_CASE("normalize bounds") {
  CHECK(normalize(1.0, 1.0, 0.5) == 1.0);
  CHECK(normalize(0.5, 1.0, 0.5) == 0.0);
  CHECK(normalize(2.0, 1.0, 0.5) == 1.0);
  CHECK(normalize(0.1, 1.0, 0.5) == 0.0);
  CHECK(normalize(0.0, 0.0, 1.0) == 1.0);
  CHECK(normalize(1.0, 0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(normalize(1.0, 2.0, 2.0), Error);
  const auto b = resolve(ComparisonBounds{4.0, ComparisonRule::DoubleDegradation});
  CHECK(b.upper == 4.0);
  CHECK(b.lower == 8.0);
  const auto r = resolve(ComparisonBounds{0.9, ComparisonRule::DetectabilityFloor});
  CHECK(r.upper == 0.9);
  CHECK(r.lower == 0.5);
}

TEST_CASE("detectability") {
  CHECK(score_detectability(1.0) == 1.0);
  CHECK(score_detectability(0.5) == 0.0);
  CHECK(score_detectability(0.998) == doctest::Approx(0.996).epsilon(1e-12));
  CHECK(score_detectability(0.3) == 0.0);
  CHECK_THROWS_AS(score_detectability(1.2), Error);
}

TEST_CASE("double degradation") {
  CHECK(score_double_degradation(6.273, 4.388) == doctest::Approx(0.57042).epsilon(1e-4));
  CHECK(score_double_degradation(21379, 18779) == doctest::Approx(0.86155).epsilon(1e-4));
  CHECK(score_double_degradation(5.0, 5.0) == 1.0);
  CHECK(score_double_degradation(10.0, 5.0) == 0.0);
  CHECK(score_double_degradation(3.0, 5.0) == 1.0);
  CHECK(score_double_degradation(12.0, 5.0) == 0.0);
  CHECK_THROWS_AS(score_double_degradation(1.0, 0.0), Error);
  try {
    score_double_degradation(1.0, -1.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonpositiveBaseline);
  }
}

TEST_CASE("detect time and usability") {
  CHECK(score_detect_time(0.0) == 1.0);
  CHECK(score_detect_time(1.0) == 0.0);
  CHECK(score_detect_time(20.79 / 5000) == doctest::Approx(0.995842).epsilon(1e-6));
  CHECK(score_detect_time(3.0) == 0.0);
  CHECK(score_usability(0.99996, 0.8615, 0.99584) == doctest::Approx(0.95243).epsilon(1e-4));
  CHECK(score_usability(1, 1, 1) == 1.0);
  CHECK(score_usability(0, 0, 0) == 0.0);
  CHECK_THROWS_AS(score_usability(1.1, 0, 0), Error);
}

TEST_CASE("robustness") {
  CHECK(score_robustness(0.999, 0.992) == doctest::Approx(0.98597).epsilon(1e-4));
  CHECK(score_robustness(0.9, 0.9) == 1.0);
  CHECK(score_robustness(0.9, 0.5) == 0.0);
  CHECK(score_robustness(0.9, 0.3) == 0.0);
  CHECK_THROWS_AS(score_robustness(0.5, 0.5), Error);
}

TEST_CASE("steal and imperceptibility") {
  CHECK(score_steal(1.0) == 0.0);
  CHECK(score_steal(0.5) == 1.0);
  CHECK(score_steal(0.661) == doctest::Approx(0.678).epsilon(1e-12));
  CHECK(score_steal(0.3) == 1.0);

  std::array<double, 4> s{};
  const std::array<double, 4> kgw4_auc{0.551, 0.639, 0.661, 0.655};
  for (std::size_t i = 0; i < 4; ++i) s[i] = score_steal(kgw4_auc[i]);
  CHECK(score_imperceptibility(s, Scenario::Authorized) == doctest::Approx(0.678).epsilon(1e-12));

  const std::array<double, 4> uniw_auc{1.000, 0.989, 0.762, 0.574};
  CHECK((uniw_auc[0] + uniw_auc[1] + uniw_auc[2] + uniw_auc[3]) / 4 == doctest::Approx(0.83125));
  std::array<double, 4> u{};
  for (std::size_t i = 0; i < 4; ++i) u[i] = score_steal(uniw_auc[i]);
  CHECK(score_imperceptibility(u, Scenario::NonAuthorized) == doctest::Approx((1 - 0.83125) / 0.5).epsilon(1e-12));

  const std::array<double, 4> same{0.3, 0.3, 0.3, 0.3};
  CHECK(score_imperceptibility(same, Scenario::Authorized) == score_imperceptibility(same, Scenario::NonAuthorized));
  CHECK(to_string(Scenario::Authorized) == "A");
  CHECK(to_string(Scenario::NonAuthorized) == "NA");
}

TEST_CASE("comprehensive score") {
  CharacteristicScores s;
  s.detectability = 0.998;
  s.text_quality = 0.571;
  s.usability = 0.953;
  s.imperceptibility = 0.0;
  s.robustness = 0.986;
  const WeightVector w;
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(score_comprehensive(s, w) == doctest::Approx(0.6668).epsilon(1e-4));

  CharacteristicScores ones;
  ones.detectability = ones.text_quality = ones.usability = ones.robustness = ones.imperceptibility = 1.0;
  CHECK(score_comprehensive(ones, w) == doctest::Approx(1.0).epsilon(1e-15));

  WeightVector bad;
  bad.robustness = 0.5;
  CHECK_THROWS_AS(score_comprehensive(s, bad), Error);
  WeightVector negative{0.5, 0.5, 0.25, 0.0, -0.25};
  CHECK_THROWS_AS(negative.validate(), Error);
}

TEST_CASE("comprehensive score is monotone in every characteristic") {
  Rng rng(2024);
  const WeightVector w;
  auto u = [&] { return rng.uniform01(); };
  for (int i = 0; i < 1000; ++i) {
    CharacteristicScores s;
    s.detectability = u();
    s.text_quality = u();
    s.usability = u();
    s.robustness = u();
    s.imperceptibility = u();
    const double base = score_comprehensive(s, w);
    CharacteristicScores up = s;
    double* fields[] = {&up.detectability, &up.text_quality, &up.usability, &up.robustness, &up.imperceptibility};
    const auto k = rng.below(5);
    const double bump = u() * (1.0 - *fields[k]);
    *fields[k] += bump;
    const double after = score_comprehensive(up, w);
    CHECK(after >= base);
    const double weights[] = {w.detectability, w.text_quality, w.usability, w.robustness, w.imperceptibility};
    CHECK(after - base == doctest::Approx(weights[k] * bump).epsilon(1e-9));
  }
}

TEST_CASE("characteristics from raw metrics") {
  RawMetrics raw;
  raw.auc = 0.998;
  raw.ppl_base = 4.388;
  raw.ppl_marked = 6.273;
  raw.generate_time_base = 18779;
  raw.generate_time_marked = 21379;
  raw.detect_time_total = 20.79;
  raw.detect_batch_size = 5000;
  raw.memory_base = 5057.7;
  raw.memory_marked = 5057.9;
  raw.auc_before_scrub = 0.999;
  raw.auc_after_scrub = 0.992;
  raw.steal_auc = {1.0, 0.989, 0.762, 0.574};
  const auto s = score_characteristics(raw, Scenario::Authorized);
  CHECK(s.detectability == doctest::Approx(0.996));
  CHECK(s.text_quality == doctest::Approx(0.571).epsilon(0.002));
  CHECK(s.usability == doctest::Approx(0.953).epsilon(0.002));
  CHECK(s.robustness == doctest::Approx(0.986).epsilon(0.002));
  CHECK(s.imperceptibility == 0.0);
  const double mem = oracle::clamp01((5057.9 - 2 * 5057.7) / (5057.7 - 2 * 5057.7));
  CHECK(s.memory == doctest::Approx(mem).epsilon(1e-12));
  raw.detect_batch_size = 0;
  CHECK_THROWS_AS(score_characteristics(raw, Scenario::Authorized), Error);
}
