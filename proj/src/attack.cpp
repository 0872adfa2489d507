#include "wmark/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <unistd.h>

#include "wmark/error.hpp"

namespace wmark {

namespace {

void check_rate(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::InvalidArgument, std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void ScrubConfig::validate() const {
  check_rate(replace_rate, "replace_rate");
  check_rate(delete_rate, "delete_rate");
  check_rate(insert_rate, "insert_rate");
}

std::vector<double> unigram_distribution(const LanguageModel& model) {
  return softmax(model.logits(std::span<const TokenId>{}));
}

TokenSequence scrub(std::span<const TokenId> text, const ScrubConfig& config, std::span<const double> unigram,
                    Rng& rng) {
  config.validate();
  if (text.empty()) throw Error(ErrorKind::EmptyText, "scrub needs at least one token");
  TokenSequence out;
  out.role = SequenceRole::Generated;
  out.ids.reserve(text.size());
  for (TokenId token : text) {
    const double u_replace = rng.uniform01();
    const double u_delete = rng.uniform01();
    const double u_insert = rng.uniform01();
    if (u_replace < config.replace_rate) token = sample(unigram, rng);
    if (!(u_delete < config.delete_rate)) out.ids.push_back(token);
    if (u_insert < config.insert_rate) out.ids.push_back(sample(unigram, rng));
  }
  return out;
}

TokenSequence scrub(std::span<const TokenId> text, const ScrubConfig& config, const LanguageModel& model, Rng& rng) {
  const auto unigram = unigram_distribution(model);
  return scrub(text, config, unigram, rng);
}

std::string CommandParaphraser::paraphrase(std::string_view text) {
  namespace fs = std::filesystem;
  static int counter = 0;
  const auto base = fs::temp_directory_path() / ("wmark_paraphrase_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter++));
  const auto in_path = base.string() + ".in";
  const auto out_path = base.string() + ".out";
  {
    std::ofstream in(in_path, std::ios::binary);
    in << text << '\n';
  }
  const std::string cmd = "(" + command_ + ") < '" + in_path + "' > '" + out_path + "'";
  const int rc = std::system(cmd.c_str());
  std::ifstream out(out_path, std::ios::binary);
  std::stringstream buf;
  buf << out.rdbuf();
  fs::remove(in_path);
  fs::remove(out_path);
  if (rc != 0) throw Error(ErrorKind::Io, "paraphrase command failed: " + command_);
  std::string result = buf.str();
  while (!result.empty() && (result.back() == '\n' || result.back() == '\r')) result.pop_back();
  return result;
}

// ---------------------------------------------------------------------------

std::size_t NGramTable::Hash::operator()(std::span<const TokenId> ctx) const noexcept {
  std::uint64_t h = 0x6A09E667F3BCC908ULL ^ ctx.size();
  for (TokenId t : ctx) h = splitmix64_mix(h ^ (static_cast<std::uint64_t>(t) + 0x9E3779B97F4A7C15ULL));
  return static_cast<std::size_t>(h);
}

NGramTable NGramTable::build(std::span<const TokenSequence> corpus, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n-gram table needs n >= 1");
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "n-gram table needs at least one text");
  NGramTable table;
  table.n_ = n;
  const auto len = static_cast<std::size_t>(n);
  std::unordered_map<std::vector<TokenId>, std::map<TokenId, std::uint64_t>, Hash, Eq> raw;
  for (const auto& text : corpus) {
    const auto& ids = text.ids;
    for (std::size_t i = len; i < ids.size(); ++i) {
      std::span<const TokenId> ctx(ids.data() + i - len, len);
      auto it = raw.find(ctx);
      if (it == raw.end()) it = raw.emplace(std::vector<TokenId>(ctx.begin(), ctx.end()), std::map<TokenId, std::uint64_t>{}).first;
      ++it->second[ids[i]];
    }
  }
  table.table_.reserve(raw.size());
  for (auto& [ctx, counts] : raw) {
    Entry e;
    e.next.assign(counts.begin(), counts.end());
    for (const auto& [tok, c] : counts) e.total += c;
    table.table_.emplace(ctx, std::move(e));
  }
  return table;
}

const NGramTable::Entry* NGramTable::find(std::span<const TokenId> context) const {
  auto it = table_.find(context);
  return it == table_.end() ? nullptr : &it->second;
}

double NGramTable::frequency(std::span<const TokenId> context, TokenId token) const {
  const Entry* e = find(context);
  if (!e) return 0.0;
  auto it = std::lower_bound(e->next.begin(), e->next.end(), token,
                             [](const auto& p, TokenId t) { return p.first < t; });
  if (it == e->next.end() || it->first != token) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(e->total);
}

std::size_t NGramTable::key_count() const noexcept {
  std::size_t k = 0;
  for (const auto& [ctx, e] : table_) k += e.next.size();
  return k;
}

void NGramTable::save(std::ostream& out) const {
  std::vector<const decltype(table_)::value_type*> rows;
  rows.reserve(table_.size());
  for (const auto& kv : table_) rows.push_back(&kv);
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->first < b->first; });
  out << "wmark-ngram-table 1\n" << "n " << n_ << '\n' << "contexts " << rows.size() << '\n';
  for (const auto* row : rows) {
    for (TokenId t : row->first) out << t << ' ';
    out << row->second.next.size();
    for (const auto& [tok, c] : row->second.next) out << ' ' << tok << ' ' << c;
    out << '\n';
  }
}

NGramTable NGramTable::load(std::istream& in) {
  auto fail = [](const std::string& what) { return Error(ErrorKind::Format, "n-gram table file: " + what); };
  std::string line;
  if (!std::getline(in, line) || line != "wmark-ngram-table 1") throw fail("missing header");
  std::string key;
  NGramTable table;
  std::size_t rows = 0;
  if (!(in >> key >> table.n_) || key != "n" || table.n_ < 1) throw fail("bad n");
  if (!(in >> key >> rows) || key != "contexts") throw fail("bad context count");
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<TokenId> ctx(static_cast<std::size_t>(table.n_));
    for (auto& t : ctx) in >> t;
    std::size_t k = 0;
    in >> k;
    Entry e;
    e.next.resize(k);
    for (auto& [tok, c] : e.next) {
      in >> tok >> c;
      e.total += c;
    }
    if (!in) throw fail("truncated row");
    table.table_.emplace(std::move(ctx), std::move(e));
  }
  return table;
}

double spoof_score(const NGramTable& watermarked, const NGramTable& clean, std::span<const TokenId> context,
                   TokenId token) {
  if (watermarked.n() != clean.n()) throw Error(ErrorKind::InvalidArgument, "tables must share n");
  if (!watermarked.find(context) || !clean.find(context)) return 0.0;
  const double pw = watermarked.frequency(context, token);
  const double pb = clean.frequency(context, token);
  if (pw == 0.0) return 0.0;
  if (pb == 0.0) return 1.0;
  const double r = pw / pb;
  return r >= 1.0 ? 0.5 * std::min(r, 2.0) : 0.0;
}

void SpoofConfig::validate() const {
  if (n < 1 || n > 4) throw Error(ErrorKind::InvalidArgument, "STEAL n must be in 1..4");
  if (!(intensity >= 0.0) || !std::isfinite(intensity)) {
    throw Error(ErrorKind::InvalidArgument, "attack intensity must be finite and >= 0");
  }
}

TokenSequence spoof_generate(const LanguageModel& model, const NGramTable& watermarked, const NGramTable& clean,
                             const SpoofConfig& config, const TokenSequence& prompt, int max_tokens, Rng& rng) {
  config.validate();
  if (watermarked.n() != config.n || clean.n() != config.n) {
    throw Error(ErrorKind::InvalidArgument, "table n differs from the attack's n");
  }
  const std::size_t n = static_cast<std::size_t>(config.n);
  const std::size_t prompt_len = prompt.size();
  std::vector<double> biased;
  StepHook hook = [&](std::span<const TokenId> history, std::span<const double> logits) {
    biased.assign(logits.begin(), logits.end());
    const std::size_t generated = history.size() - prompt_len;
    if (generated >= n && config.intensity > 0.0) {
      const auto ctx = history.last(n);
      if (const auto* entry = watermarked.find(ctx); entry && clean.find(ctx)) {
        for (const auto& [tok, c] : entry->next) {
          biased[tok] += config.intensity * spoof_score(watermarked, clean, ctx, tok);
        }
      }
    }
    return softmax(biased);
  };
  return generate(model, prompt, max_tokens, rng, hook);
}

std::vector<SpoofedSet> steal_suite(const LanguageModel& model, std::span<const TokenSequence> watermarked_corpus,
                                    std::span<const TokenSequence> clean_corpus, double intensity,
                                    std::span<const TokenSequence> prompts, int max_tokens, std::uint64_t seed) {
  if (watermarked_corpus.empty() || clean_corpus.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "STEAL needs watermarked and clean corpora");
  }
  std::vector<SpoofedSet> sets;
  for (int n = 1; n <= 4; ++n) {
    const auto tw = NGramTable::build(watermarked_corpus, n);
    const auto tb = NGramTable::build(clean_corpus, n);
    SpoofedSet set;
    set.n = n;
    set.texts.reserve(prompts.size());
    const std::uint64_t set_seed = seed ^ splitmix64_mix(static_cast<std::uint64_t>(n));
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      Rng rng = derive_stream(set_seed, i);
      set.texts.push_back(spoof_generate(model, tw, tb, SpoofConfig{n, intensity}, prompts[i], max_tokens, rng));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace wmark
