#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wmark/lm.hpp"

namespace wmark {

// Token-level perturbation rates, each applied independently per token.
struct ScrubConfig {
  double replace_rate = 0.0;
  double delete_rate = 0.0;
  double insert_rate = 0.0;

  void validate() const;
};

// softmax of the model's empty-context logits.
std::vector<double> unigram_distribution(const LanguageModel& model);

// For every token, in this order: replace it with a unigram draw
// (replace_rate), drop it (delete_rate), then insert a unigram draw after it
// (insert_rate). Three uniforms are consumed per token whatever the outcome.
TokenSequence scrub(std::span<const TokenId> text, const ScrubConfig& config, std::span<const double> unigram,
                    Rng& rng);
TokenSequence scrub(std::span<const TokenId> text, const ScrubConfig& config, const LanguageModel& model, Rng& rng);

/// Text-in, text-out rewriting attack. Stands in for learned paraphrasers.
class Paraphraser {
 public:
  virtual ~Paraphraser() = default;
  virtual std::string paraphrase(std::string_view text) = 0;
};

// Runs a shell command per text: the text is written to the command's stdin
// and its stdout (trailing newlines stripped) is the paraphrase.
class CommandParaphraser final : public Paraphraser {
 public:
  explicit CommandParaphraser(std::string command) : command_(std::move(command)) {}
  std::string paraphrase(std::string_view text) override;

 private:
  std::string command_;
};

/// (context of n tokens, next token) -> relative frequency within the context.
class NGramTable {
 public:
  struct Entry {
    std::uint64_t total = 0;
    // Sorted by token id.
    std::vector<std::pair<TokenId, std::uint64_t>> next;
  };

  // Counts every window of n + 1 consecutive tokens in each text.
  static NGramTable build(std::span<const TokenSequence> corpus, int n);

  int n() const noexcept { return n_; }
  const Entry* find(std::span<const TokenId> context) const;
  // 0 when the context or the pair was never observed.
  double frequency(std::span<const TokenId> context, TokenId token) const;
  std::size_t context_count() const noexcept { return table_.size(); }
  std::size_t key_count() const noexcept;

  // Text file: "wmark-ngram-table 1", n, context count, then one context per
  // line in lexicographic order: <n ids> <k> (<token> <count>)*k
  void save(std::ostream& out) const;
  static NGramTable load(std::istream& in);

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::span<const TokenId> ctx) const noexcept;
  };
  struct Eq {
    using is_transparent = void;
    bool operator()(std::span<const TokenId> a, std::span<const TokenId> b) const noexcept {
      return std::equal(a.begin(), a.end(), b.begin(), b.end());
    }
  };

  int n_ = 1;
  std::unordered_map<std::vector<TokenId>, Entry, Hash, Eq> table_;
};

// With r = p_w(token|ctx) / p_b(token|ctx): 0.5 * min(r, 2) when r >= 1,
// otherwise 0. A context missing from either table scores 0; a pair seen only
// in the watermarked table scores the cap, 1.
double spoof_score(const NGramTable& watermarked, const NGramTable& clean, std::span<const TokenId> context,
                   TokenId token);

struct SpoofConfig {
  int n = 1;
  double intensity = 4.0;

  void validate() const;
};

// Key-free forgery: each step adds intensity * spoof_score(ctx, k) to every
// logit k, where ctx is the last n generated tokens. Steps before n tokens
// have been generated are left unbiased.
TokenSequence spoof_generate(const LanguageModel& model, const NGramTable& watermarked, const NGramTable& clean,
                             const SpoofConfig& config, const TokenSequence& prompt, int max_tokens, Rng& rng);

struct SpoofedSet {
  int n = 0;
  std::vector<TokenSequence> texts;
};

// One spoofed set per n = 1..4, each with one text per prompt. Text i of set n
// samples from derive_stream(seed ^ splitmix64_mix(n), i).
std::vector<SpoofedSet> steal_suite(const LanguageModel& model, std::span<const TokenSequence> watermarked_corpus,
                                    std::span<const TokenSequence> clean_corpus, double intensity,
                                    std::span<const TokenSequence> prompts, int max_tokens, std::uint64_t seed);

}  // namespace wmark
