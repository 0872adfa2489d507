#include "wmark/lm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "wmark/error.hpp"

namespace wmark {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

bool is_unicode_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000;
}

// Decodes one code point starting at text[i]; returns its byte length.
std::size_t decode_utf8(std::string_view text, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0) {
    cp = b0 & 0x1F;
    len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = b0 & 0x0F;
    len = 3;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    cp = b0;
    return 1;
  }
  if (i + len > text.size()) {
    cp = b0;
    return 1;
  }
  for (std::size_t k = 1; k < len; ++k) {
    cp = (cp << 6) | (static_cast<unsigned char>(text[i + k]) & 0x3F);
  }
  return len;
}

void emit_chunk(std::string_view chunk, std::vector<std::string>& out) {
  if (chunk.empty()) return;
  if (chunk == kSentinelToken) {
    out.emplace_back(kSentinelToken);
    return;
  }
  std::size_t begin = 0;
  std::size_t end = chunk.size();
  while (begin < end && is_ascii_punct(static_cast<unsigned char>(chunk[begin]))) {
    out.emplace_back(1, chunk[begin]);
    ++begin;
  }
  std::size_t trail = end;
  while (trail > begin && is_ascii_punct(static_cast<unsigned char>(chunk[trail - 1]))) --trail;
  if (trail > begin) {
    std::string word(chunk.substr(begin, trail - begin));
    for (auto& c : word) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    out.push_back(std::move(word));
  }
  for (std::size_t k = trail; k < end; ++k) out.emplace_back(1, chunk[k]);
}

}  // namespace

Vocabulary::Vocabulary() { add(kSentinelToken); }

TokenId Vocabulary::add(std::string_view token) {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t chunk_start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(text, i, cp);
    if (is_unicode_space(cp)) {
      emit_chunk(text.substr(chunk_start, i - chunk_start), out);
      chunk_start = i + len;
    }
    i += len;
  }
  emit_chunk(text.substr(chunk_start), out);
  return out;
}

TokenSequence tokenize(std::string_view text, Vocabulary& vocab, VocabPolicy policy) {
  if (policy == VocabPolicy::Frozen) return tokenize(text, std::as_const(vocab));
  TokenSequence seq;
  for (const auto& word : split_words(text)) seq.ids.push_back(vocab.add(word));
  return seq;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  for (const auto& word : split_words(text)) seq.ids.push_back(vocab.lookup_or_sentinel(word));
  return seq;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// NGramModel

std::size_t NGramModel::ContextHash::operator()(std::span<const TokenId> ctx) const noexcept {
  std::uint64_t h = 0x84222325CBF29CE4ULL ^ ctx.size();
  for (TokenId t : ctx) h = splitmix64_mix(h ^ (static_cast<std::uint64_t>(t) + 0x9E3779B97F4A7C15ULL));
  return static_cast<std::size_t>(h);
}

NGramModel::NGramModel(Vocabulary vocab, int order, double alpha)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha), tables_(static_cast<std::size_t>(order)) {}

NGramModel NGramModel::train(std::span<const std::string> corpus, int order, double alpha) {
  Vocabulary vocab;
  std::vector<TokenSequence> docs;
  docs.reserve(corpus.size());
  for (const auto& line : corpus) docs.push_back(tokenize(line, vocab, VocabPolicy::Build));
  return train(docs, std::move(vocab), order, alpha);
}

NGramModel NGramModel::train(std::span<const TokenSequence> docs, Vocabulary vocab, int order,
                             double alpha) {
  if (order < 1) throw Error(ErrorKind::InvalidArgument, "n-gram order must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::InvalidArgument, "smoothing alpha must be > 0");
  }
  std::size_t tokens = 0;
  for (const auto& d : docs) tokens += d.size();
  if (tokens == 0) throw Error(ErrorKind::EmptyCorpus, "corpus has no tokens");

  NGramModel model(std::move(vocab), order, alpha);
  const std::size_t v = model.vocab_.size();

  // Counting pass in ordered maps keeps the finalized tables independent of
  // hash iteration order.
  std::vector<std::map<std::vector<TokenId>, std::map<TokenId, std::uint32_t>>> raw(
      static_cast<std::size_t>(order));
  for (const auto& doc : docs) {
    const auto& ids = doc.ids;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] >= v) throw Error(ErrorKind::InvalidArgument, "token id outside vocabulary");
      for (std::size_t m = 0; m < static_cast<std::size_t>(order) && m <= i; ++m) {
        std::vector<TokenId> ctx(ids.begin() + static_cast<std::ptrdiff_t>(i - m),
                                 ids.begin() + static_cast<std::ptrdiff_t>(i));
        ++raw[m][std::move(ctx)][ids[i]];
      }
    }
    model.token_count_ += ids.size();
  }

  for (std::size_t m = 0; m < raw.size(); ++m) {
    auto& table = model.tables_[m];
    table.reserve(raw[m].size());
    for (auto& [ctx, nexts] : raw[m]) {
      ContextStats stats;
      stats.next.reserve(nexts.size());
      for (const auto& [tok, c] : nexts) {
        stats.next.emplace_back(tok, c);
        stats.total += c;
      }
      table.emplace(ctx, std::move(stats));
    }
  }
  return model;
}

const NGramModel::ContextStats& NGramModel::stats_for(std::span<const TokenId> context) const {
  const std::size_t max_len = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  for (std::size_t m = max_len; m > 0; --m) {
    const auto& table = tables_[m];
    if (auto it = table.find(context.last(m)); it != table.end()) return it->second;
  }
  return tables_[0].begin()->second;
}

std::size_t NGramModel::matched_context_length(std::span<const TokenId> context) const {
  const std::size_t max_len = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  for (std::size_t m = max_len; m > 0; --m) {
    if (tables_[m].contains(context.last(m))) return m;
  }
  return 0;
}

void NGramModel::logits(std::span<const TokenId> context, std::span<double> out) const {
  if (out.size() != vocab_.size()) {
    throw Error(ErrorKind::InvalidArgument, "logits buffer size must equal vocabulary size");
  }
  const auto& stats = stats_for(context);
  const double log_denom =
      std::log(static_cast<double>(stats.total) + alpha_ * static_cast<double>(vocab_.size()));
  std::fill(out.begin(), out.end(), std::log(alpha_) - log_denom);
  for (const auto& [tok, c] : stats.next) out[tok] = std::log(static_cast<double>(c) + alpha_) - log_denom;
}

double NGramModel::probability(std::span<const TokenId> context, TokenId token) const {
  const auto& stats = stats_for(context);
  auto it = std::lower_bound(stats.next.begin(), stats.next.end(), token,
                             [](const auto& e, TokenId t) { return e.first < t; });
  const double c = (it != stats.next.end() && it->first == token) ? it->second : 0.0;
  return (c + alpha_) / (static_cast<double>(stats.total) + alpha_ * static_cast<double>(vocab_.size()));
}

std::size_t NGramModel::memory_bytes() const {
  std::size_t bytes = 0;
  for (const auto& t : vocab_.tokens()) bytes += t.size() + sizeof(TokenId);
  for (std::size_t m = 0; m < tables_.size(); ++m) {
    for (const auto& [ctx, stats] : tables_[m]) {
      bytes += m * sizeof(TokenId) + sizeof(std::uint64_t);
      bytes += stats.next.size() * (sizeof(TokenId) + sizeof(std::uint32_t));
    }
  }
  return bytes;
}

bool operator==(const NGramModel& a, const NGramModel& b) {
  return a.order_ == b.order_ && a.alpha_ == b.alpha_ && a.vocab_ == b.vocab_ &&
         a.token_count_ == b.token_count_ && a.tables_ == b.tables_;
}

void NGramModel::save(std::ostream& out) const {
  out << "wmark-ngram 1\n";
  out << "order " << order_ << '\n';
  out << "alpha " << std::setprecision(17) << alpha_ << '\n';
  out << "tokens " << token_count_ << '\n';
  out << "vocab " << vocab_.size() << '\n';
  for (const auto& t : vocab_.tokens()) out << t << '\n';
  for (std::size_t m = 0; m < tables_.size(); ++m) {
    std::vector<const Table::value_type*> rows;
    rows.reserve(tables_[m].size());
    for (const auto& kv : tables_[m]) rows.push_back(&kv);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->first < b->first; });
    out << "table " << m << ' ' << rows.size() << '\n';
    for (const auto* row : rows) {
      for (TokenId t : row->first) out << t << ' ';
      out << row->second.next.size();
      for (const auto& [tok, c] : row->second.next) out << ' ' << tok << ' ' << c;
      out << '\n';
    }
  }
}

NGramModel NGramModel::load(std::istream& in) {
  auto fail = [](const std::string& what) { return Error(ErrorKind::Format, "model file: " + what); };
  std::string line;
  if (!std::getline(in, line) || line != "wmark-ngram 1") throw fail("missing 'wmark-ngram 1' header");

  auto read_field = [&](const char* name, auto& value) {
    std::string key;
    if (!(in >> key >> value) || key != name) throw fail(std::string("expected field ") + name);
  };
  int order = 0;
  double alpha = 0.0;
  std::uint64_t tokens = 0;
  std::size_t vocab_size = 0;
  read_field("order", order);
  read_field("alpha", alpha);
  read_field("tokens", tokens);
  read_field("vocab", vocab_size);
  if (order < 1 || !(alpha > 0.0) || vocab_size < 1) throw fail("invalid header values");
  std::getline(in, line);

  Vocabulary vocab;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) throw fail("truncated vocabulary");
    if (i == 0) {
      if (line != kSentinelToken) throw fail("vocabulary must start with the sentinel");
      continue;
    }
    if (vocab.add(line) != i) throw fail("duplicate vocabulary entry '" + line + "'");
  }

  NGramModel model(std::move(vocab), order, alpha);
  model.token_count_ = tokens;
  for (int m = 0; m < order; ++m) {
    std::string key;
    int len = -1;
    std::size_t rows = 0;
    if (!(in >> key >> len >> rows) || key != "table" || len != m) throw fail("bad table header");
    auto& table = model.tables_[static_cast<std::size_t>(m)];
    table.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<TokenId> ctx(static_cast<std::size_t>(m));
      for (auto& t : ctx) in >> t;
      std::size_t k = 0;
      in >> k;
      ContextStats stats;
      stats.next.resize(k);
      for (auto& [tok, c] : stats.next) {
        in >> tok >> c;
        if (tok >= vocab_size) throw fail("token id outside vocabulary");
        stats.total += c;
      }
      if (!in) throw fail("truncated table row");
      table.emplace(std::move(ctx), std::move(stats));
    }
  }
  if (model.tables_[0].empty()) throw fail("empty unigram table");
  return model;
}

// ---------------------------------------------------------------------------
// Sampling and generation

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be > 0");
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return p;
}

TokenId sample(std::span<const double> probs, Rng& rng) {
  double sum = 0.0;
  for (double x : probs) {
    if (!(x >= 0.0)) throw Error(ErrorKind::InvalidDistribution, "negative or NaN probability");
    sum += x;
  }
  if (probs.empty() || std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorKind::InvalidDistribution, "probabilities sum to " + std::to_string(sum));
  }
  const double u = rng.uniform01() * sum;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

TokenSequence generate(const LanguageModel& model, const TokenSequence& prompt, int max_tokens, Rng& rng,
                       const StepHook& hook, GenerateOptions options) {
  if (max_tokens < 1) throw Error(ErrorKind::InvalidArgument, "max_tokens must be >= 1");
  std::vector<TokenId> history = prompt.ids;
  history.reserve(prompt.size() + static_cast<std::size_t>(max_tokens));
  LogitsVector logits(model.vocab_size());
  for (int step = 0; step < max_tokens; ++step) {
    model.logits(history, logits);
    if (options.temperature != 1.0) {
      for (auto& l : logits) l /= options.temperature;
    }
    const auto probs = hook ? hook(history, logits) : softmax(logits);
    history.push_back(sample(probs, rng));
  }
  TokenSequence out;
  out.role = SequenceRole::Generated;
  out.ids.assign(history.begin() + static_cast<std::ptrdiff_t>(prompt.size()), history.end());
  return out;
}

double perplexity(const LanguageModel& model, std::span<const TokenId> text, std::span<const TokenId> prefix) {
  if (text.empty()) throw Error(ErrorKind::EmptyText, "perplexity of an empty text");
  std::vector<TokenId> history(prefix.begin(), prefix.end());
  history.reserve(prefix.size() + text.size());
  LogitsVector logits(model.vocab_size());
  double total = 0.0;
  for (TokenId t : text) {
    model.logits(history, logits);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += logits[t] - mx - std::log(z);
    history.push_back(t);
  }
  return std::exp(-total / static_cast<double>(text.size()));
}

}  // namespace wmark
