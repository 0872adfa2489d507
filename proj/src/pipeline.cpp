#include "wmark/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wmark/error.hpp"

namespace wmark {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Error config_error(const std::string& what) { return Error(ErrorKind::Config, what); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  if (judge_every < 2) throw config_error("judge_every must be >= 2");
  if (order < 1) throw config_error("order must be >= 1");
  if (!(alpha > 0.0)) throw config_error("alpha must be > 0");
  if (schemes.empty()) throw config_error("schemes must not be empty");
  for (const auto& s : schemes) {
    try {
      (void)WatermarkConfig::from_label(s);
    } catch (const Error& e) {
      throw config_error("bad scheme label '" + s + "'");
    }
  }
  if (!(delta >= 0.0)) throw config_error("delta must be >= 0");
  if (n_texts < 1 || prompt_tokens < 1 || max_tokens < 1 || frequency_texts < 1 || steal_texts < 1) {
    throw config_error("sample counts and token counts must be >= 1");
  }
  if (!(temperature > 0.0)) throw config_error("temperature must be > 0");
  try {
    scrub.validate();
    weights.validate();
  } catch (const Error& e) {
    throw config_error(e.what());
  }
  if (!(steal_intensity >= 0.0)) throw config_error("steal_intensity must be >= 0");
  (void)require_seed();
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw config_error("seed is required (config key \"seed\" or --seed)");
  return *seed;
}

RunConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw config_error("config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [k, v] : root.items()) {
      if (k == "corpus") c.corpus = v.get<std::string>();
      else if (k == "fixture_dir") c.fixture_dir = v.get<std::string>();
      else if (k == "output_dir") c.output_dir = v.get<std::string>();
      else if (k == "judge_every") c.judge_every = v.get<int>();
      else if (k == "order") c.order = v.get<int>();
      else if (k == "alpha") c.alpha = v.get<double>();
      else if (k == "schemes") c.schemes = v.get<std::vector<std::string>>();
      else if (k == "delta") c.delta = v.get<double>();
      else if (k == "key") c.key = v.get<std::uint64_t>();
      else if (k == "n_texts") c.n_texts = v.get<int>();
      else if (k == "prompt_tokens") c.prompt_tokens = v.get<int>();
      else if (k == "max_tokens") c.max_tokens = v.get<int>();
      else if (k == "temperature") c.temperature = v.get<double>();
      else if (k == "frequency_texts") c.frequency_texts = v.get<int>();
      else if (k == "steal_texts") c.steal_texts = v.get<int>();
      else if (k == "steal_intensity") c.steal_intensity = v.get<double>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "threads") c.threads = v.get<unsigned>();
      else if (k == "scenario") {
        const auto s = v.get<std::string>();
        if (s == "A") c.scenario = Scenario::Authorized;
        else if (s == "NA") c.scenario = Scenario::NonAuthorized;
        else throw config_error("scenario must be \"A\" or \"NA\"");
      } else if (k == "scrub") {
        for (const auto& [sk, sv] : v.items()) {
          if (sk == "replace") c.scrub.replace_rate = sv.get<double>();
          else if (sk == "delete") c.scrub.delete_rate = sv.get<double>();
          else if (sk == "insert") c.scrub.insert_rate = sv.get<double>();
          else throw config_error("unknown scrub key '" + sk + "'");
        }
      } else if (k == "weights") {
        for (const auto& [wk, wv] : v.items()) {
          if (wk == "detectability") c.weights.detectability = wv.get<double>();
          else if (wk == "text_quality") c.weights.text_quality = wv.get<double>();
          else if (wk == "usability") c.weights.usability = wv.get<double>();
          else if (wk == "robustness") c.weights.robustness = wv.get<double>();
          else if (wk == "imperceptibility") c.weights.imperceptibility = wv.get<double>();
          else throw config_error("unknown weights key '" + wk + "'");
        }
      } else {
        throw config_error("unknown config key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("config value has the wrong type: ") + e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const RunConfig& c) {
  json j{{"corpus", c.corpus},
         {"fixture_dir", c.fixture_dir},
         {"output_dir", c.output_dir},
         {"judge_every", c.judge_every},
         {"order", c.order},
         {"alpha", c.alpha},
         {"schemes", c.schemes},
         {"delta", c.delta},
         {"key", c.key},
         {"n_texts", c.n_texts},
         {"prompt_tokens", c.prompt_tokens},
         {"max_tokens", c.max_tokens},
         {"temperature", c.temperature},
         {"frequency_texts", c.frequency_texts},
         {"scrub", {{"replace", c.scrub.replace_rate}, {"delete", c.scrub.delete_rate}, {"insert", c.scrub.insert_rate}}},
         {"steal_texts", c.steal_texts},
         {"steal_intensity", c.steal_intensity},
         {"scenario", std::string(to_string(c.scenario))},
         {"weights",
          {{"detectability", c.weights.detectability},
           {"text_quality", c.weights.text_quality},
           {"usability", c.weights.usability},
           {"robustness", c.weights.robustness},
           {"imperceptibility", c.weights.imperceptibility}}},
         {"threads", c.threads}};
  if (c.seed) j["seed"] = *c.seed;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Hashing and files

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) s[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
  return s;
}

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) {
  return splitmix64_mix(seed ^ fnv1a64(stage));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<std::string> read_documents(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    docs.push_back(std::move(line));
  }
  return docs;
}

void write_documents(const fs::path& path, std::span<const std::string> docs) {
  std::string out;
  for (const auto& d : docs) {
    out += d;
    out += '\n';
  }
  write_file(path, out);
}

CorpusSplit split_corpus(std::span<const std::string> docs, int judge_every, int prompt_tokens) {
  if (judge_every < 2) throw Error(ErrorKind::InvalidArgument, "judge_every must be >= 2");
  if (prompt_tokens < 1) throw Error(ErrorKind::InvalidArgument, "prompt_tokens must be >= 1");
  CorpusSplit split;
  const auto every = static_cast<std::size_t>(judge_every);
  const auto plen = static_cast<std::size_t>(prompt_tokens);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto seq = tokenize(docs[i], split.vocab, VocabPolicy::Build);
    if (seq.empty()) continue;
    if (i % every == every - 1) {
      if (seq.size() > plen) {
        TokenSequence p{{seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(plen)}, SequenceRole::Prompt};
        split.prompts.push_back(std::move(p));
      }
      split.judge.push_back(std::move(seq));
    } else {
      split.train.push_back(std::move(seq));
    }
  }
  if (split.train.empty() || split.judge.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "corpus too small to split into model and judge documents");
  }
  if (split.prompts.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "no judge document is longer than the prompt length");
  }
  return split;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

double z_or_zero(std::span<const TokenId> text, const Watermark& watermark) {
  try {
    return detect(text, watermark).z;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::TextTooShort) throw;
    return 0.0;
  }
}

// ---------------------------------------------------------------------------
// Bench

struct Bench::Trained {
  NGramModel model;
  NGramModel judge;
  std::vector<TokenSequence> prompts;
};

Bench::Bench(RunConfig config, Trained trained)
    : config_(std::move(config)),
      model_(std::move(trained.model)),
      judge_(std::move(trained.judge)),
      prompts_(std::move(trained.prompts)) {}

Bench::Bench(RunConfig config, NGramModel model, NGramModel judge, std::vector<TokenSequence> prompts)
    : config_(std::move(config)), model_(std::move(model)), judge_(std::move(judge)), prompts_(std::move(prompts)) {
  config_.validate();
  if (prompts_.empty()) throw Error(ErrorKind::EmptyCorpus, "bench needs at least one prompt");
  if (!(model_.vocab() == judge_.vocab())) {
    throw Error(ErrorKind::InvalidArgument, "model and judge must share a vocabulary");
  }
}

Bench::Bench(RunConfig config) : Bench(config, train_from_corpus(config)) {}

Bench::Trained Bench::train_from_corpus(const RunConfig& c) {
  c.validate();
  const auto docs = read_documents(c.corpus);
  if (docs.empty()) throw Error(ErrorKind::EmptyCorpus, "corpus " + c.corpus + " has no documents");
  auto split = split_corpus(docs, c.judge_every, c.prompt_tokens);
  auto model = NGramModel::train(split.train, split.vocab, c.order, c.alpha);
  auto judge = NGramModel::train(split.judge, split.vocab, c.order, c.alpha);
  return {std::move(model), std::move(judge), std::move(split.prompts)};
}

SchemeRun Bench::make_watermark(std::string_view label) const {
  auto wc = WatermarkConfig::from_label(label);
  wc.delta = config_.delta;
  wc.key = config_.key;
  if (wc.scheme != Scheme::Bw) return {Watermark(wc, model_.vocab_size()), {}};
  auto freq = count_token_frequencies(model_, prompts_, config_.frequency_texts, config_.max_tokens,
                                      stage_seed(config_.require_seed(), "frequencies"));
  auto sf = build_select_function(freq, model_.vocab_size());
  return {Watermark(wc, model_.vocab_size(), std::move(sf)), std::move(freq)};
}

std::vector<TokenSequence> Bench::generate_clean(int n, std::string_view stage) const {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "text count must be >= 1");
  const auto seed = stage_seed(config_.require_seed(), stage);
  std::vector<TokenSequence> out(static_cast<std::size_t>(n));
  parallel_for(out.size(), config_.threads, [&](std::size_t i) {
    Rng rng = derive_stream(seed, i);
    out[i] = generate(model_, prompt(i), config_.max_tokens, rng, {}, {config_.temperature});
  });
  return out;
}

std::vector<WatermarkedText> Bench::generate_marked(const Watermark& watermark, int n, std::string_view stage) const {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "text count must be >= 1");
  const auto seed = stage_seed(config_.require_seed(), stage);
  std::vector<WatermarkedText> out(static_cast<std::size_t>(n));
  parallel_for(out.size(), config_.threads, [&](std::size_t i) {
    Rng rng = derive_stream(seed, i);
    out[i] = watermarked_generate(model_, watermark, prompt(i), config_.max_tokens, rng, {config_.temperature});
  });
  return out;
}

std::vector<TokenSequence> Bench::scrub_all(std::span<const TokenSequence> texts, const ScrubConfig& scrub_config,
                                            std::string_view stage) const {
  const auto unigram = unigram_distribution(model_);
  const auto seed = stage_seed(config_.require_seed(), stage);
  std::vector<TokenSequence> out(texts.size());
  parallel_for(out.size(), config_.threads, [&](std::size_t i) {
    Rng rng = derive_stream(seed, i);
    out[i] = scrub(texts[i].ids, scrub_config, unigram, rng);
  });
  return out;
}

std::vector<SpoofedSet> Bench::steal(std::span<const TokenSequence> watermarked, std::span<const TokenSequence> clean,
                                     std::string_view stage) const {
  std::vector<TokenSequence> spoof_prompts;
  for (int i = 0; i < config_.n_texts; ++i) spoof_prompts.push_back(prompt(static_cast<std::size_t>(i)));
  return steal_suite(model_, watermarked, clean, config_.steal_intensity, spoof_prompts, config_.max_tokens,
                     stage_seed(config_.require_seed(), stage));
}

std::vector<double> Bench::z_scores(const Watermark& watermark, std::span<const TokenSequence> texts) const {
  std::vector<double> z(texts.size());
  parallel_for(z.size(), config_.threads, [&](std::size_t i) { z[i] = z_or_zero(texts[i].ids, watermark); });
  return z;
}

double Bench::mean_perplexity(std::span<const TokenSequence> texts) const {
  if (texts.empty()) throw Error(ErrorKind::EmptyText, "perplexity of an empty text set");
  std::vector<double> ppl(texts.size());
  parallel_for(ppl.size(), config_.threads,
               [&](std::size_t i) { ppl[i] = perplexity(judge_, texts[i].ids, prompt(i).ids); });
  double sum = 0.0;
  for (double p : ppl) sum += p;
  return sum / static_cast<double>(ppl.size());
}

LiveEvaluation Bench::evaluate(const std::function<void(std::string_view)>& log) const {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  auto tokens_of = [](const std::vector<WatermarkedText>& v) {
    std::vector<TokenSequence> out;
    out.reserve(v.size());
    for (const auto& t : v) out.push_back(t.tokens);
    return out;
  };

  LiveEvaluation result;
  result.metrics.model = "ngram-" + std::to_string(config_.order);
  result.metrics.dataset = fs::path(config_.corpus).stem().string();

  say("generating " + std::to_string(config_.n_texts) + " unwatermarked texts");
  auto t0 = std::chrono::steady_clock::now();
  const auto clean = generate_clean(config_.n_texts, "clean");
  const double generate_time_base = seconds_since(t0);
  const double ppl_base = mean_perplexity(clean);
  say("generating " + std::to_string(config_.steal_texts) + " unwatermarked texts for STEAL");
  const auto steal_clean = generate_clean(config_.steal_texts, "steal-clean");
  const double memory_base = static_cast<double>(model_.memory_bytes()) / 1e6;

  for (const auto& label : config_.schemes) {
    say("scheme " + label);
    const auto run = make_watermark(label);
    const auto& wm = run.watermark;
    RawMetrics raw;
    raw.ppl_base = ppl_base;
    raw.generate_time_base = generate_time_base;
    raw.memory_base = memory_base;
    raw.memory_marked = static_cast<double>(model_.memory_bytes() + wm.auxiliary_bytes()) / 1e6;

    t0 = std::chrono::steady_clock::now();
    const auto marked = tokens_of(generate_marked(wm, config_.n_texts, "marked/" + label));
    raw.generate_time_marked = seconds_since(t0);
    raw.ppl_marked = mean_perplexity(marked);

    t0 = std::chrono::steady_clock::now();
    const auto z_marked = z_scores(wm, marked);
    const auto z_clean = z_scores(wm, clean);
    raw.detect_time_total = seconds_since(t0);
    raw.detect_batch_size = marked.size() + clean.size();
    auto roc = roc_auc(z_marked, z_clean);
    raw.auc = roc.auc;

    raw.auc_before_scrub = raw.auc;
    const auto scrubbed = scrub_all(marked, config_.scrub, "scrub/" + label);
    raw.auc_after_scrub = roc_auc(z_scores(wm, scrubbed), z_clean).auc;

    const auto steal_marked = tokens_of(generate_marked(wm, config_.steal_texts, "steal-marked/" + label));
    const auto sets = steal(steal_marked, steal_clean, "steal/" + label);
    for (const auto& set : sets) {
      raw.steal_auc[static_cast<std::size_t>(set.n - 1)] = roc_auc(z_scores(wm, set.texts), z_clean).auc;
    }

    result.metrics.schemes.push_back({label, raw});
    result.rocs.push_back(std::move(roc));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Manifest Manifest::load_or_create(const fs::path& output_dir) {
  Manifest m;
  m.dir_ = output_dir;
  const auto path = output_dir / "manifest.json";
  if (!fs::exists(path)) {
    m.created_ = utc_now();
    return m;
  }
  try {
    const json j = json::parse(read_file(path));
    m.config_hash_ = j.value("config_hash", "");
    m.created_ = j.value("created", utc_now());
    for (const auto& s : j.at("stages")) m.stages_.emplace_back(s.at("name"), s.at("seconds"));
    for (const auto& f : j.at("files")) {
      m.files_.push_back({f.at("path"), {f.at("fnv1a64"), f.at("bytes").get<std::uintmax_t>()}});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("manifest: ") + e.what());
  }
  return m;
}

void Manifest::set_config(const RunConfig& config) { config_hash_ = hex64(fnv1a64(config_to_json(config))); }

void Manifest::add_stage(std::string_view name, double seconds) { stages_.emplace_back(std::string(name), seconds); }

void Manifest::add_file(const fs::path& file) {
  const auto bytes = read_file(file);
  const auto rel = fs::relative(file, dir_).generic_string();
  std::pair<std::string, std::uintmax_t> entry{hex64(fnv1a64(bytes)), bytes.size()};
  for (auto& f : files_) {
    if (f.first == rel) {
      f.second = entry;
      return;
    }
  }
  files_.push_back({rel, entry});
}

void Manifest::save() const {
  json stages = json::array();
  for (const auto& [name, secs] : stages_) stages.push_back({{"name", name}, {"seconds", secs}});
  auto files = files_;
  std::sort(files.begin(), files.end());
  json jf = json::array();
  for (const auto& [path, e] : files) jf.push_back({{"path", path}, {"fnv1a64", e.first}, {"bytes", e.second}});
  const json j{{"tool", "wmark"},   {"version", std::string(kToolVersion)}, {"config_hash", config_hash_},
               {"created", created_}, {"updated", utc_now()},              {"stages", stages},
               {"files", jf}};
  write_file(dir_ / "manifest.json", j.dump(2) + "\n");
}

}  // namespace wmark
