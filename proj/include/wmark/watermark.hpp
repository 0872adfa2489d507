#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wmark/lm.hpp"

namespace wmark {

enum class Scheme { Kgw, Uniw, Bw };

std::string_view to_string(Scheme scheme) noexcept;

struct WatermarkConfig {
  static constexpr double kGamma = 0.5;

  Scheme scheme = Scheme::Uniw;
  double delta = 2.0;
  int window = 1;  // ignored by UNIW
  std::uint64_t key = 0;

  // Throws InvalidArgument unless delta >= 0 and window >= 1.
  void validate() const;
  // "UNIW", "KGW<w>", "BW<w>".
  std::string label() const;
  // Inverse of label(); delta and key are left at their defaults.
  static WatermarkConfig from_label(std::string_view label);
};

/// Green/red split of the vocabulary. Lists are kept sorted by id.
class Partition {
 public:
  Partition() = default;
  // Everything not in `green` is red.
  Partition(std::span<const TokenId> green, std::size_t vocab_size);

  bool is_green(TokenId id) const { return mask_[id] != 0; }
  std::span<const std::uint8_t> mask() const noexcept { return mask_; }
  const std::vector<TokenId>& green() const noexcept { return green_; }
  const std::vector<TokenId>& red() const noexcept { return red_; }
  std::size_t vocab_size() const noexcept { return mask_.size(); }

  // Same vocabulary, colours swapped.
  Partition swapped() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<std::uint8_t> mask_;
  std::vector<TokenId> green_;
  std::vector<TokenId> red_;
};

// Fisher-Yates shuffle of 0..|V|-1 from a splitmix64 stream seeded with `key`;
// the first ceil(|V|/2) ids form list A (returned as green), the rest list B.
Partition partition_fixed(std::uint64_t key, std::size_t vocab_size);

// As partition_fixed with seed splitmix64_mix(key ^ (context_token + 1)).
Partition partition_hashed(std::uint64_t key, TokenId context_token, std::size_t vocab_size);

/// Frequency-rank parity map: with ids sorted by descending frequency (ties by
/// ascending id) into t_1..t_|V|, F(t_j) = 1 iff j is even.
class SelectFunction {
 public:
  SelectFunction() = default;
  explicit SelectFunction(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

  bool operator()(TokenId id) const { return bits_.at(id) != 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t size() const noexcept { return bits_.size(); }
  std::size_t count_ones() const noexcept;

  friend bool operator==(const SelectFunction&, const SelectFunction&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// `freq` has one count per id; ids past its end count as zero.
SelectFunction build_select_function(std::span<const std::uint64_t> freq, std::size_t vocab_size);

// Counts every token of n_texts unwatermarked generations. Text i is prompted
// with prompts[i % prompts.size()] and sampled from derive_stream(seed, i).
std::vector<std::uint64_t> count_token_frequencies(const LanguageModel& model,
                                                   std::span<const TokenSequence> prompts, int n_texts,
                                                   int max_tokens, std::uint64_t seed);

// green = A when F(context_token) = 1, otherwise B.
Partition select_green(const SelectFunction& sf, TokenId context_token, const Partition& halves);

// p_k proportional to exp(l_k + delta * [k green]).
std::vector<double> apply_bias(std::span<const double> logits, std::span<const std::uint8_t> green_mask,
                               double delta);

/// A configured scheme plus whatever it needs at run time: nothing for KGW,
/// the fixed A/B halves for UNIW, the halves and a Select Function for BW.
/// Immutable; shared read-only by embedding and detection.
class Watermark {
 public:
  Watermark(WatermarkConfig config, std::size_t vocab_size,
            std::optional<SelectFunction> select_function = std::nullopt);

  const WatermarkConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  // A as green; only meaningful for UNIW and BW.
  const Partition& halves() const noexcept { return a_green_; }
  const SelectFunction* select_function() const noexcept {
    return select_function_ ? &*select_function_ : nullptr;
  }

  // Token whose value keys the step that generates sequence[position]; the
  // sentinel when position - w falls before the start.
  TokenId context_token(std::span<const TokenId> sequence, std::size_t position) const;

  // Partition in force for sequence[position]. `scratch` backs KGW's per-step
  // partition; the returned reference may point into it.
  const Partition& step_partition(std::span<const TokenId> sequence, std::size_t position,
                                  Partition& scratch) const;

  // For BW: whether list A is green at this step. UNIW is always A.
  bool selects_a(std::span<const TokenId> sequence, std::size_t position) const;

  // Deterministic size, in bytes, of the structures the scheme adds on top of
  // the model: one float bias vector, plus for BW a second bias vector and the
  // frequency-rank table behind the Select Function.
  std::size_t auxiliary_bytes() const noexcept;

  // Sidecar: everything detection needs, as JSON (see docs/formats.md).
  void save_sidecar(std::ostream& out, std::span<const std::uint64_t> frequencies = {}) const;
  static Watermark load_sidecar(std::istream& in);

 private:
  WatermarkConfig config_;
  std::size_t vocab_size_;
  Partition a_green_;
  Partition b_green_;
  std::optional<SelectFunction> select_function_;
};

struct WatermarkedText {
  TokenSequence tokens;
  // Tally over the positions detection scores (see count_green).
  std::size_t green_tally = 0;
  std::size_t scored_steps = 0;
  std::size_t steps_selecting_a = 0;
  std::size_t total_steps = 0;
};

// Embeds the watermark while sampling. Each step picks the green list per
// scheme, biases the logits by delta and samples.
WatermarkedText watermarked_generate(const LanguageModel& model, const Watermark& watermark,
                                     const TokenSequence& prompt, int max_tokens, Rng& rng,
                                     GenerateOptions options = {});

}  // namespace wmark
