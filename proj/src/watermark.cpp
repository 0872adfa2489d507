#include "wmark/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <istream>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "wmark/error.hpp"
#include "wmark/rng.hpp"

namespace wmark {

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::Kgw: return "KGW";
    case Scheme::Uniw: return "UNIW";
    case Scheme::Bw: return "BW";
  }
  return "?";
}

void WatermarkConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorKind::InvalidArgument, "watermark delta must be >= 0");
  }
  if (window < 1) throw Error(ErrorKind::InvalidArgument, "watermark window must be >= 1");
}

std::string WatermarkConfig::label() const {
  if (scheme == Scheme::Uniw) return "UNIW";
  return std::string(to_string(scheme)) + std::to_string(window);
}

WatermarkConfig WatermarkConfig::from_label(std::string_view label) {
  WatermarkConfig cfg;
  auto with_window = [&](std::string_view digits) {
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw Error(ErrorKind::Config, "bad scheme label '" + std::string(label) + "'");
    }
    cfg.window = std::stoi(std::string(digits));
  };
  if (label == "UNIW") {
    cfg.scheme = Scheme::Uniw;
  } else if (label.starts_with("KGW")) {
    cfg.scheme = Scheme::Kgw;
    with_window(label.substr(3));
  } else if (label.starts_with("BW")) {
    cfg.scheme = Scheme::Bw;
    with_window(label.substr(2));
  } else {
    throw Error(ErrorKind::Config, "unknown scheme label '" + std::string(label) + "'");
  }
  return cfg;
}

// ---------------------------------------------------------------------------

Partition::Partition(std::span<const TokenId> green, std::size_t vocab_size) : mask_(vocab_size, 0) {
  for (TokenId id : green) {
    if (id >= vocab_size) throw Error(ErrorKind::InvalidArgument, "green id outside vocabulary");
    mask_[id] = 1;
  }
  green_.reserve(green.size());
  red_.reserve(vocab_size - std::min(vocab_size, green.size()));
  for (std::size_t id = 0; id < vocab_size; ++id) {
    (mask_[id] ? green_ : red_).push_back(static_cast<TokenId>(id));
  }
}

Partition Partition::swapped() const { return Partition(red_, mask_.size()); }

namespace {

Partition first_half_partition(std::uint64_t seed, std::size_t vocab_size) {
  if (vocab_size < 2) throw Error(ErrorKind::InvalidArgument, "partition needs |V| >= 2");
  const auto ids = shuffled_ids(vocab_size, seed);
  const std::size_t half = (vocab_size + 1) / 2;
  return Partition(std::span<const TokenId>(ids).first(half), vocab_size);
}

}  // namespace

Partition partition_fixed(std::uint64_t key, std::size_t vocab_size) {
  return first_half_partition(key, vocab_size);
}

Partition partition_hashed(std::uint64_t key, TokenId context_token, std::size_t vocab_size) {
  if (context_token >= vocab_size) throw Error(ErrorKind::InvalidArgument, "context token outside vocabulary");
  return first_half_partition(splitmix64_mix(key ^ (static_cast<std::uint64_t>(context_token) + 1)), vocab_size);
}

std::size_t SelectFunction::count_ones() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

SelectFunction build_select_function(std::span<const std::uint64_t> freq, std::size_t vocab_size) {
  std::vector<TokenId> order(vocab_size);
  std::iota(order.begin(), order.end(), TokenId{0});
  auto count = [&](TokenId id) -> std::uint64_t { return id < freq.size() ? freq[id] : 0; };
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return count(a) > count(b); });
  std::vector<std::uint8_t> bits(vocab_size, 0);
  // order[j] holds t_{j+1}; even 1-based rank maps to 1.
  for (std::size_t j = 0; j < order.size(); ++j) bits[order[j]] = ((j + 1) % 2 == 0) ? 1 : 0;
  return SelectFunction(std::move(bits));
}

std::vector<std::uint64_t> count_token_frequencies(const LanguageModel& model,
                                                   std::span<const TokenSequence> prompts, int n_texts,
                                                   int max_tokens, std::uint64_t seed) {
  if (n_texts < 1) throw Error(ErrorKind::InvalidArgument, "n_texts must be >= 1");
  if (prompts.empty()) throw Error(ErrorKind::InvalidArgument, "frequency counting needs prompts");
  std::vector<std::uint64_t> counts(model.vocab_size(), 0);
  for (int i = 0; i < n_texts; ++i) {
    Rng rng = derive_stream(seed, static_cast<std::uint64_t>(i));
    const auto text = generate(model, prompts[static_cast<std::size_t>(i) % prompts.size()], max_tokens, rng);
    for (TokenId t : text.ids) ++counts[t];
  }
  return counts;
}

Partition select_green(const SelectFunction& sf, TokenId context_token, const Partition& halves) {
  if (context_token >= halves.vocab_size()) {
    throw Error(ErrorKind::InvalidArgument, "context token outside vocabulary");
  }
  return sf(context_token) ? halves : halves.swapped();
}

std::vector<double> apply_bias(std::span<const double> logits, std::span<const std::uint8_t> green_mask,
                               double delta) {
  if (!(delta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be >= 0");
  if (green_mask.size() != logits.size()) {
    throw Error(ErrorKind::InvalidArgument, "green mask and logits differ in length");
  }
  std::vector<double> p(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = logits[k] + (green_mask[k] ? delta : 0.0);
    mx = std::max(mx, p[k]);
  }
  double sum = 0.0;
  for (auto& x : p) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

// ---------------------------------------------------------------------------

Watermark::Watermark(WatermarkConfig config, std::size_t vocab_size, std::optional<SelectFunction> select_function)
    : config_(config), vocab_size_(vocab_size), select_function_(std::move(select_function)) {
  config_.validate();
  if (vocab_size < 2) throw Error(ErrorKind::InvalidArgument, "watermark needs |V| >= 2");
  if (config_.scheme != Scheme::Kgw) {
    a_green_ = partition_fixed(config_.key, vocab_size);
    b_green_ = a_green_.swapped();
  }
  if (config_.scheme == Scheme::Bw) {
    if (!select_function_) throw Error(ErrorKind::InvalidArgument, "BW requires a Select Function");
    if (select_function_->size() != vocab_size) {
      throw Error(ErrorKind::InvalidArgument, "Select Function size differs from vocabulary size");
    }
  }
}

TokenId Watermark::context_token(std::span<const TokenId> sequence, std::size_t position) const {
  const auto w = static_cast<std::size_t>(config_.window);
  if (position < w) return kSentinelId;
  return sequence[position - w];
}

bool Watermark::selects_a(std::span<const TokenId> sequence, std::size_t position) const {
  if (config_.scheme == Scheme::Uniw) return true;
  if (config_.scheme == Scheme::Bw) return (*select_function_)(context_token(sequence, position));
  return false;
}

const Partition& Watermark::step_partition(std::span<const TokenId> sequence, std::size_t position,
                                           Partition& scratch) const {
  switch (config_.scheme) {
    case Scheme::Uniw:
      return a_green_;
    case Scheme::Bw:
      return selects_a(sequence, position) ? a_green_ : b_green_;
    case Scheme::Kgw:
      scratch = partition_hashed(config_.key, context_token(sequence, position), vocab_size_);
      return scratch;
  }
  return a_green_;
}

std::size_t Watermark::auxiliary_bytes() const noexcept {
  const std::size_t bias_vector = vocab_size_ * sizeof(float);
  if (config_.scheme == Scheme::Bw) return 2 * bias_vector + vocab_size_ * sizeof(std::uint32_t);
  return bias_vector;
}

namespace {

std::string bits_to_string(std::span<const std::uint8_t> bits) {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? '1' : '0';
  return s;
}

std::vector<std::uint8_t> bits_from_string(const std::string& s) {
  std::vector<std::uint8_t> bits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw Error(ErrorKind::Format, "sidecar bit table must be 0/1");
    bits[i] = s[i] == '1';
  }
  return bits;
}

std::uint64_t fnv1a(std::span<const std::uint64_t> values) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::uint64_t v : values) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace

void Watermark::save_sidecar(std::ostream& out, std::span<const std::uint64_t> frequencies) const {
  nlohmann::ordered_json j;
  j["format"] = "wmark-sidecar";
  j["version"] = 1;
  j["scheme"] = std::string(to_string(config_.scheme));
  j["label"] = config_.label();
  j["delta"] = config_.delta;
  j["window"] = config_.window;
  j["gamma"] = WatermarkConfig::kGamma;
  j["key"] = config_.key;
  j["vocab_size"] = vocab_size_;
  if (config_.scheme != Scheme::Kgw) j["list_a"] = bits_to_string(a_green_.mask());
  if (select_function_) {
    j["select_function"] = bits_to_string(select_function_->bits());
    if (!frequencies.empty()) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(frequencies)));
      j["frequency_hash"] = buf;
    }
  }
  out << j.dump(2) << '\n';
}

Watermark Watermark::load_sidecar(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("sidecar is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "wmark-sidecar" || j.at("version") != 1) {
      throw Error(ErrorKind::Format, "not a version 1 wmark sidecar");
    }
    WatermarkConfig cfg = WatermarkConfig::from_label(j.at("label").get<std::string>());
    cfg.delta = j.at("delta").get<double>();
    cfg.key = j.at("key").get<std::uint64_t>();
    const auto vocab_size = j.at("vocab_size").get<std::size_t>();
    std::optional<SelectFunction> sf;
    if (cfg.scheme == Scheme::Bw) sf = SelectFunction(bits_from_string(j.at("select_function").get<std::string>()));
    Watermark wm(cfg, vocab_size, std::move(sf));
    if (cfg.scheme != Scheme::Kgw) {
      if (bits_to_string(wm.a_green_.mask()) != j.at("list_a").get<std::string>()) {
        throw Error(ErrorKind::Format, "sidecar list A does not match the key-derived partition");
      }
    }
    return wm;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("sidecar field error: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

WatermarkedText watermarked_generate(const LanguageModel& model, const Watermark& watermark,
                                     const TokenSequence& prompt, int max_tokens, Rng& rng,
                                     GenerateOptions options) {
  if (prompt.empty()) throw Error(ErrorKind::InvalidArgument, "watermarked generation needs a prompt");
  if (model.vocab_size() != watermark.vocab_size()) {
    throw Error(ErrorKind::InvalidArgument, "model and watermark vocabularies differ");
  }
  // Per-step record of the green mask and which half was chosen, kept by the
  // embedder itself so detection can be checked against it.
  std::vector<std::vector<std::uint8_t>> step_masks;
  std::vector<std::uint8_t> step_selected_a;
  step_masks.reserve(static_cast<std::size_t>(max_tokens));
  Partition scratch;
  const double delta = watermark.config().delta;

  StepHook hook = [&](std::span<const TokenId> history, std::span<const double> logits) {
    const std::size_t position = history.size();
    const Partition& green = watermark.step_partition(history, position, scratch);
    step_masks.emplace_back(green.mask().begin(), green.mask().end());
    step_selected_a.push_back(watermark.selects_a(history, position) ? 1 : 0);
    return apply_bias(logits, green.mask(), delta);
  };

  WatermarkedText out;
  out.tokens = generate(model, prompt, max_tokens, rng, hook, options);
  const bool uniw = watermark.config().scheme == Scheme::Uniw;
  const auto w = static_cast<std::size_t>(watermark.config().window);
  for (std::size_t j = 0; j < out.tokens.size(); ++j) {
    ++out.total_steps;
    out.steps_selecting_a += step_selected_a[j];
    if (!uniw && j < w) continue;
    ++out.scored_steps;
    out.green_tally += step_masks[j][out.tokens.ids[j]];
  }
  return out;
}

}  // namespace wmark
