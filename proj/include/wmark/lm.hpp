#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wmark/rng.hpp"

namespace wmark {

using TokenId = std::uint32_t;

// Id 0 is reserved. It pads contexts and stands in for out-of-vocabulary words.
inline constexpr TokenId kSentinelId = 0;
inline constexpr std::string_view kSentinelToken = "<s>";

class Vocabulary {
 public:
  Vocabulary();

  // Returns the id of `token`, appending it if new.
  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  TokenId lookup_or_sentinel(std::string_view token) const {
    return find(token).value_or(kSentinelId);
  }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

enum class SequenceRole { Prompt, Generated, Full };

struct TokenSequence {
  std::vector<TokenId> ids;
  SequenceRole role = SequenceRole::Full;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  std::span<const TokenId> view() const noexcept { return ids; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

enum class VocabPolicy { Build, Frozen };

// Lowercases ASCII letters, splits on Unicode whitespace and peels leading and
// trailing ASCII punctuation off each chunk as one-character tokens. The chunk
// "<s>" is kept whole so the sentinel survives a detokenize/tokenize trip.
std::vector<std::string> split_words(std::string_view text);

TokenSequence tokenize(std::string_view text, Vocabulary& vocab, VocabPolicy policy);
// Frozen-vocabulary tokenization; unknown words map to the sentinel.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

// One unnormalized log-space score per vocabulary id.
using LogitsVector = std::vector<double>;

// Anything that yields next-token logits. The n-gram model below is the
// built-in implementation; perplexity judges and generators only see this.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  // Writes vocab_size() logits for the token following `context` into `out`.
  virtual void logits(std::span<const TokenId> context, std::span<double> out) const = 0;

  LogitsVector logits(std::span<const TokenId> context) const {
    LogitsVector out(vocab_size());
    logits(context, out);
    return out;
  }
};

/// Order-k Laplace-smoothed backoff n-gram model.
///
/// For a context, the model uses the longest suffix (at most k-1 tokens) that
/// was observed during training and returns
///   P(t | c) = (count(c, t) + alpha) / (count(c) + alpha * |V|).
/// The empty context is always observed, so an unseen context falls back to
/// shorter ones and ultimately to the unigram distribution. Tables are
/// immutable after training.
class NGramModel final : public LanguageModel {
 public:
  // Builds the vocabulary from `corpus` (plus the sentinel) and trains on it.
  static NGramModel train(std::span<const std::string> corpus, int order, double alpha);
  // Trains on pre-tokenized documents over an existing vocabulary.
  static NGramModel train(std::span<const TokenSequence> docs, Vocabulary vocab, int order,
                          double alpha);

  int order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::uint64_t token_count() const noexcept { return token_count_; }

  std::size_t vocab_size() const override { return vocab_.size(); }
  void logits(std::span<const TokenId> context, std::span<double> out) const override;
  using LanguageModel::logits;

  double probability(std::span<const TokenId> context, TokenId token) const;
  // Length of the context suffix the model actually conditions on.
  std::size_t matched_context_length(std::span<const TokenId> context) const;

  // Deterministic storage estimate of the count tables and vocabulary.
  std::size_t memory_bytes() const;

  // Text dump: "wmark-ngram 1" header, order, alpha, vocabulary, then one
  // table per context length with contexts in lexicographic order.
  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

  friend bool operator==(const NGramModel& a, const NGramModel& b);

 private:
  struct ContextStats {
    std::uint64_t total = 0;
    // Sorted by token id.
    std::vector<std::pair<TokenId, std::uint32_t>> next;
    friend bool operator==(const ContextStats&, const ContextStats&) = default;
  };

  struct ContextHash {
    using is_transparent = void;
    std::size_t operator()(std::span<const TokenId> ctx) const noexcept;
  };
  struct ContextEq {
    using is_transparent = void;
    bool operator()(std::span<const TokenId> a, std::span<const TokenId> b) const noexcept {
      return std::equal(a.begin(), a.end(), b.begin(), b.end());
    }
  };

  using Table = std::unordered_map<std::vector<TokenId>, ContextStats, ContextHash, ContextEq>;

  NGramModel(Vocabulary vocab, int order, double alpha);
  const ContextStats& stats_for(std::span<const TokenId> context) const;

  Vocabulary vocab_;
  int order_;
  double alpha_;
  std::uint64_t token_count_ = 0;
  std::vector<Table> tables_;  // indexed by context length 0..order-1
};

std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

// Inverse-CDF draw over ids in ascending order. Throws InvalidDistribution if
// an entry is negative or the total deviates from 1 by more than 1e-6.
TokenId sample(std::span<const double> probs, Rng& rng);

// Maps (history, logits) to the next-token distribution. `history` holds the
// prompt followed by everything generated so far.
using StepHook =
    std::function<std::vector<double>(std::span<const TokenId> history, std::span<const double> logits)>;

struct GenerateOptions {
  double temperature = 1.0;
};

// Appends exactly max_tokens sampled tokens (the toy model has no EOS) and
// returns them as a Generated sequence. Without a hook the step distribution
// is softmax(logits / temperature).
TokenSequence generate(const LanguageModel& model, const TokenSequence& prompt, int max_tokens,
                       Rng& rng, const StepHook& hook = {}, GenerateOptions options = {});

// exp(-(1/T) sum log P(token_i | prefix, text[0..i))). Throws EmptyText.
double perplexity(const LanguageModel& model, std::span<const TokenId> text,
                  std::span<const TokenId> prefix = {});

}  // namespace wmark
