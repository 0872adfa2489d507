#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "wmark/error.hpp"
#include "wmark/pipeline.hpp"

using namespace wmark;
namespace fs = std::filesystem;

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({"seed": 7, "n_texts": 20, "schemes": ["UNIW", "BW2"],
                                  "scrub": {"replace": 0.1}, "scenario": "NA"})");
  CHECK(c.seed == 7u);
  CHECK(c.n_texts == 20);
  CHECK(c.schemes == std::vector<std::string>{"UNIW", "BW2"});
  CHECK(c.scrub.replace_rate == 0.1);
  CHECK(c.scenario == Scenario::NonAuthorized);
  CHECK(c.order == 3);

  const auto back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  auto kind_of = [](const char* text) {
    try {
      parse_config(text).validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind_of(R"({"bogus": 1, "seed": 1})") == ErrorKind::Config);
  CHECK(kind_of(R"({"n_texts": 10})") == ErrorKind::Config);
  CHECK(kind_of(R"({"seed": 1, "schemes": ["ABC"]})") == ErrorKind::Config);
  CHECK(kind_of(R"({"seed": 1, "weights": {"robustness": 0.9}})") == ErrorKind::Config);
  CHECK(kind_of("not json") == ErrorKind::Config);
  CHECK(kind_of(R"({"seed": 1})") == ErrorKind::Io);
}

TEST_CASE("FNV-1a and stage seeds") {
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(hex64(fnv1a64("foobar")) == "85944171f73967e8");
  CHECK(stage_seed(1, "clean") == splitmix64_mix(1 ^ fnv1a64("clean")));
  CHECK(stage_seed(1, "clean") != stage_seed(1, "marked/UNIW"));
}

TEST_CASE("corpus split") {
  std::vector<std::string> docs;
  for (int i = 0; i < 10; ++i) docs.push_back("doc " + std::to_string(i) + " has a few words in it");
  docs[4] = "short";
  const auto s = split_corpus(docs, 5, 3);
  CHECK(s.train.size() == 8);
  CHECK(s.judge.size() == 2);
  REQUIRE(s.prompts.size() == 1);
  CHECK(s.prompts[0].size() == 3);
  CHECK(detokenize(s.prompts[0].ids, s.vocab) == "doc 9 has");
  CHECK_THROWS_AS(split_corpus(std::vector<std::string>{"a b", "c d"}, 5, 3), Error);
}

TEST_CASE("documents round trip") {
  const auto d = fs::temp_directory_path() / "wmark_test_docs";
  fs::create_directories(d);
  const std::vector<std::string> docs{"one two", "three"};
  write_documents(d / "docs.txt", docs);
  CHECK(read_documents(d / "docs.txt") == docs);
  write_file(d / "blank.txt", "a\n\n  \nb\n");
  CHECK(read_documents(d / "blank.txt") == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(read_file(d / "absent.txt"), Error);
  fs::remove_all(d);
}

TEST_CASE("parallel_for covers every index and propagates errors") {
  for (unsigned threads : {1u, 2u, 4u}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw Error(ErrorKind::Io, "boom");
                               }),
                  Error);
}

TEST_CASE("bench output does not depend on thread count") {
  const std::vector<std::string> docs{
      "the cat sat on the mat and the dog sat on the log", "a cat saw a dog near the old red barn",
      "the mat was red and the log was old and the barn was tall", "a dog and a cat sat by the barn door",
      "the old dog slept while the young cat watched the birds", "birds sang and the cat sat still on the wall"};
  const auto split = split_corpus(docs, 3, 3);
  auto model = NGramModel::train(split.train, split.vocab, 3, 0.1);
  auto judge = NGramModel::train(split.judge, split.vocab, 3, 0.1);
  RunConfig c;
  c.seed = 5;
  c.n_texts = 12;
  c.max_tokens = 20;
  c.frequency_texts = 10;
  c.steal_texts = 12;
  c.schemes = {"UNIW", "KGW2", "BW1"};
  c.threads = 1;
  const Bench one(c, model, judge, split.prompts);
  c.threads = 3;
  const Bench three(c, model, judge, split.prompts);
  const auto a = one.evaluate();
  const auto b = three.evaluate();
  REQUIRE(a.metrics.schemes.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& x = a.metrics.schemes[i].raw;
    const auto& y = b.metrics.schemes[i].raw;
    CHECK(x.auc == y.auc);
    CHECK(x.ppl_marked == y.ppl_marked);
    CHECK(x.auc_after_scrub == y.auc_after_scrub);
    CHECK(x.steal_auc == y.steal_auc);
  }
  const auto run = one.make_watermark("BW1");
  REQUIRE(run.watermark.select_function());
  CHECK(run.frequencies.size() == split.vocab.size());
  CHECK(one.generate_clean(4, "x") == three.generate_clean(4, "x"));
}

TEST_CASE("manifest records stages and files") {
  const auto d = fs::temp_directory_path() / "wmark_test_manifest";
  fs::remove_all(d);
  fs::create_directories(d);
  write_file(d / "a.txt", "foobar");
  RunConfig c;
  c.seed = 1;
  {
    auto m = Manifest::load_or_create(d);
    m.set_config(c);
    m.add_stage("train", 0.5);
    m.add_file(d / "a.txt");
    m.save();
  }
  {
    auto m = Manifest::load_or_create(d);
    m.add_stage("generate", 1.0);
    m.add_file(d / "a.txt");
    m.save();
  }
  const auto j = nlohmann::json::parse(read_file(d / "manifest.json"));
  CHECK(j["tool"] == "wmark");
  CHECK(j["config_hash"] == hex64(fnv1a64(config_to_json(c))));
  CHECK(j["stages"].size() == 2);
  REQUIRE(j["files"].size() == 1);
  CHECK(j["files"][0]["path"] == "a.txt");
  CHECK(j["files"][0]["fnv1a64"] == "85944171f73967e8");
  CHECK(j["files"][0]["bytes"] == 6);
  fs::remove_all(d);
}
