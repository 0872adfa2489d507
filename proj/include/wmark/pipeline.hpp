#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmark/attack.hpp"
#include "wmark/detect.hpp"
#include "wmark/lm.hpp"
#include "wmark/report.hpp"
#include "wmark/scoring.hpp"
#include "wmark/watermark.hpp"

namespace wmark {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct RunConfig {
  std::string corpus = "data/corpus.txt";
  std::string fixture_dir = "data/fixtures";
  std::string output_dir = "out";
  // Document i trains the perplexity judge and supplies a prompt when
  // i % judge_every == judge_every - 1; every other document trains the model.
  int judge_every = 5;
  int order = 3;
  double alpha = 0.1;
  std::vector<std::string> schemes{"UNIW", "KGW1", "KGW2", "KGW3", "KGW4", "BW1", "BW2", "BW3", "BW4"};
  double delta = 2.0;
  std::uint64_t key = 0x0DDBA11CAFEF00DULL;
  int n_texts = 200;
  int prompt_tokens = 30;
  int max_tokens = 200;
  double temperature = 1.0;
  // Unwatermarked generations counted to build the BW Select Function.
  int frequency_texts = 500;
  ScrubConfig scrub{0.3, 0.0, 0.0};
  int steal_texts = 2000;
  double steal_intensity = 4.0;
  Scenario scenario = Scenario::Authorized;
  WeightVector weights;
  std::optional<std::uint64_t> seed;
  // 0 uses every hardware thread. Results do not depend on it.
  unsigned threads = 0;

  // Throws Config on any out-of-range field or a missing seed.
  void validate() const;
  std::uint64_t require_seed() const;
};

// Keys as in RunConfig; unknown keys are a Config error. Missing keys keep
// their defaults.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);
// Independent seed for a named pipeline stage.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage);

// UTF-8 text, one document per line; blank lines are skipped.
std::vector<std::string> read_documents(const std::filesystem::path& path);
void write_documents(const std::filesystem::path& path, std::span<const std::string> docs);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

struct CorpusSplit {
  Vocabulary vocab;
  std::vector<TokenSequence> train;
  std::vector<TokenSequence> judge;
  // First prompt_tokens tokens of each judge document longer than that.
  std::vector<TokenSequence> prompts;
};

// One vocabulary over every document. Throws EmptyCorpus when either side of
// the split or the prompt set ends up empty.
CorpusSplit split_corpus(std::span<const std::string> docs, int judge_every, int prompt_tokens);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// z-score of a text, or 0 when it is too short to score.
double z_or_zero(std::span<const TokenId> text, const Watermark& watermark);

struct SchemeRun {
  Watermark watermark;
  std::vector<std::uint64_t> frequencies;  // empty unless BW
};

struct LiveEvaluation {
  EnvironmentMetrics metrics;
  std::vector<RocCurve> rocs;  // parallel to metrics.schemes
};

/// Trained model, judge and prompts plus every stage of a desk-scale run.
/// Text i of any stage samples from derive_stream(stage_seed(seed, stage), i),
/// so results are independent of the thread count.
class Bench {
 public:
  // Reads config.corpus, splits it and trains both models.
  explicit Bench(RunConfig config);
  Bench(RunConfig config, NGramModel model, NGramModel judge, std::vector<TokenSequence> prompts);

  const RunConfig& config() const noexcept { return config_; }
  const NGramModel& model() const noexcept { return model_; }
  const NGramModel& judge() const noexcept { return judge_; }
  const std::vector<TokenSequence>& prompts() const noexcept { return prompts_; }
  const TokenSequence& prompt(std::size_t i) const { return prompts_[i % prompts_.size()]; }

  SchemeRun make_watermark(std::string_view label) const;

  std::vector<TokenSequence> generate_clean(int n, std::string_view stage) const;
  std::vector<WatermarkedText> generate_marked(const Watermark& watermark, int n, std::string_view stage) const;
  std::vector<TokenSequence> scrub_all(std::span<const TokenSequence> texts, const ScrubConfig& scrub,
                                       std::string_view stage) const;
  std::vector<SpoofedSet> steal(std::span<const TokenSequence> watermarked, std::span<const TokenSequence> clean,
                                std::string_view stage) const;

  std::vector<double> z_scores(const Watermark& watermark, std::span<const TokenSequence> texts) const;
  // Mean over texts of the judge's perplexity, text i conditioned on prompt(i).
  double mean_perplexity(std::span<const TokenSequence> texts) const;

  // All five characteristics for every configured scheme.
  LiveEvaluation evaluate(const std::function<void(std::string_view)>& log = {}) const;

 private:
  struct Trained;
  Bench(RunConfig config, Trained trained);
  static Trained train_from_corpus(const RunConfig& config);

  RunConfig config_;
  NGramModel model_;
  NGramModel judge_;
  std::vector<TokenSequence> prompts_;
};

/// Record of what a run wrote. Loaded and rewritten by each subcommand so one
/// output directory accumulates every stage.
class Manifest {
 public:
  static Manifest load_or_create(const std::filesystem::path& output_dir);

  void set_config(const RunConfig& config);
  void add_stage(std::string_view name, double seconds);
  // Path is stored relative to the output directory; the hash is FNV-1a of the
  // file's bytes.
  void add_file(const std::filesystem::path& file);
  void save() const;

 private:
  std::filesystem::path dir_;
  std::string config_hash_;
  std::string created_;
  std::vector<std::pair<std::string, double>> stages_;
  std::vector<std::pair<std::string, std::pair<std::string, std::uintmax_t>>> files_;
};

}  // namespace wmark
