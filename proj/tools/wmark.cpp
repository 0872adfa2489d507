// wmark: train, generate, detect, attack, evaluate, report.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wmark/error.hpp"
#include "wmark/fixtures.hpp"
#include "wmark/pipeline.hpp"
#include "wmark/report.hpp"

namespace fs = std::filesystem;
using namespace wmark;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus, output_dir, fixture_dir, scenario;
  std::optional<int> order, n_texts, max_tokens, steal_texts;
  std::optional<double> delta, alpha, replace_rate, delete_rate, insert_rate, intensity;
  std::optional<unsigned> threads;
  std::vector<double> weights;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run config");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--corpus", o.corpus, "corpus file, one document per line");
  cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
  cmd->add_option("--fixture-dir", o.fixture_dir, "directory of metric CSVs");
  cmd->add_option("--scenario", o.scenario, "A or NA");
  cmd->add_option("--order", o.order, "n-gram order");
  cmd->add_option("--alpha", o.alpha, "Laplace smoothing");
  cmd->add_option("--n-texts", o.n_texts, "texts per population");
  cmd->add_option("--max-tokens", o.max_tokens, "new tokens per text");
  cmd->add_option("--steal-texts", o.steal_texts, "texts per STEAL corpus");
  cmd->add_option("--delta", o.delta, "logit bias");
  cmd->add_option("--replace-rate", o.replace_rate, "scrub replace rate");
  cmd->add_option("--delete-rate", o.delete_rate, "scrub delete rate");
  cmd->add_option("--insert-rate", o.insert_rate, "scrub insert rate");
  cmd->add_option("--intensity", o.intensity, "STEAL attack intensity");
  cmd->add_option("--threads", o.threads, "worker threads, 0 = all");
  cmd->add_option("--weights", o.weights, "five weights: D T U R I")->expected(5);
}

RunConfig resolve_config(const Overrides& o, bool needs_seed) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = o.seed;
  if (o.corpus) c.corpus = *o.corpus;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.fixture_dir) c.fixture_dir = *o.fixture_dir;
  if (o.scenario) {
    if (*o.scenario == "A") c.scenario = Scenario::Authorized;
    else if (*o.scenario == "NA") c.scenario = Scenario::NonAuthorized;
    else throw Error(ErrorKind::Config, "--scenario must be A or NA");
  }
  if (o.order) c.order = *o.order;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.n_texts) c.n_texts = *o.n_texts;
  if (o.max_tokens) c.max_tokens = *o.max_tokens;
  if (o.steal_texts) c.steal_texts = *o.steal_texts;
  if (o.delta) c.delta = *o.delta;
  if (o.replace_rate) c.scrub.replace_rate = *o.replace_rate;
  if (o.delete_rate) c.scrub.delete_rate = *o.delete_rate;
  if (o.insert_rate) c.scrub.insert_rate = *o.insert_rate;
  if (o.intensity) c.steal_intensity = *o.intensity;
  if (o.threads) c.threads = *o.threads;
  if (!o.weights.empty()) c.weights = {o.weights[0], o.weights[1], o.weights[2], o.weights[3], o.weights[4]};
  if (!needs_seed && !c.seed) c.seed = 0;
  c.validate();
  return c;
}

// Generated corpora keep empty lines so text i stays on line i.
std::vector<std::string> read_lines(const fs::path& path) {
  const auto content = read_file(path);
  std::vector<std::string> lines;
  std::stringstream ss(content);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> detok_all(std::span<const TokenSequence> texts, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(detokenize(t.ids, vocab));
  return out;
}

std::vector<TokenSequence> tok_all(std::span<const std::string> lines, const Vocabulary& vocab) {
  std::vector<TokenSequence> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(tokenize(l, vocab));
  return out;
}

NGramModel load_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open model " + path.string() + " (run `wmark train` first)");
  return NGramModel::load(in);
}

struct Workspace {
  RunConfig config;
  fs::path out;
  Manifest manifest;

  explicit Workspace(RunConfig c)
      : config(std::move(c)), out(config.output_dir), manifest(Manifest::load_or_create(config.output_dir)) {
    fs::create_directories(out);
    manifest.set_config(config);
  }

  void emit(const fs::path& rel, std::string_view content) {
    write_file(out / rel, content);
    manifest.add_file(out / rel);
  }

  Bench bench() const {
    auto model = load_model(out / "model.txt");
    auto judge = load_model(out / "judge.txt");
    const auto lines = read_lines(out / "prompts.txt");
    auto prompts = tok_all(lines, model.vocab());
    for (auto& p : prompts) p.role = SequenceRole::Prompt;
    return Bench(config, std::move(model), std::move(judge), std::move(prompts));
  }
};

std::string join_lines(std::span<const std::string> lines) {
  std::string s;
  for (const auto& l : lines) {
    s += l;
    s += '\n';
  }
  return s;
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void cmd_train(const RunConfig& config) {
  Workspace ws(config);
  const auto t0 = std::chrono::steady_clock::now();
  const auto docs = read_documents(config.corpus);
  if (docs.empty()) throw Error(ErrorKind::EmptyCorpus, "corpus " + config.corpus + " has no documents");
  auto split = split_corpus(docs, config.judge_every, config.prompt_tokens);
  const auto model = NGramModel::train(split.train, split.vocab, config.order, config.alpha);
  const auto judge = NGramModel::train(split.judge, split.vocab, config.order, config.alpha);
  std::ostringstream m, j;
  model.save(m);
  judge.save(j);
  ws.emit("model.txt", m.str());
  ws.emit("judge.txt", j.str());
  ws.emit("prompts.txt", join_lines(detok_all(split.prompts, split.vocab)));
  ws.manifest.add_stage("train", since(t0));
  ws.manifest.save();
  std::cout << "vocab " << model.vocab_size() << "\ntokens " << model.token_count() << "\njudge_tokens "
            << judge.token_count() << "\nprompts " << split.prompts.size() << '\n';
}

void cmd_generate(const RunConfig& config, const std::string& scheme, std::optional<int> count) {
  Workspace ws(config);
  const auto bench = ws.bench();
  const int n = count.value_or(config.n_texts);
  const auto& vocab = bench.model().vocab();
  const auto t0 = std::chrono::steady_clock::now();
  if (scheme == "none") {
    const auto texts = bench.generate_clean(n, "clean");
    const double secs = since(t0);
    ws.emit("texts/clean.txt", join_lines(detok_all(texts, vocab)));
    ws.manifest.add_stage("generate/clean", secs);
    std::cout << "clean " << texts.size() << " texts " << secs << " s\n";
  } else {
    const auto run = bench.make_watermark(scheme);
    const auto marked = bench.generate_marked(run.watermark, n, "marked/" + scheme);
    const double secs = since(t0);
    std::vector<TokenSequence> tokens;
    for (const auto& t : marked) tokens.push_back(t.tokens);
    std::ostringstream sidecar;
    run.watermark.save_sidecar(sidecar, run.frequencies);
    ws.emit("sidecars/" + scheme + ".json", sidecar.str());
    ws.emit("texts/" + scheme + ".txt", join_lines(detok_all(tokens, vocab)));
    ws.manifest.add_stage("generate/" + scheme, secs);
    std::cout << scheme << ' ' << tokens.size() << " texts " << secs << " s\n";
  }
  ws.manifest.save();
}

Watermark load_sidecar_for(const Workspace& ws, const std::string& scheme) {
  const auto path = ws.out / "sidecars" / (scheme + ".json");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingSidecar, "no sidecar for " + scheme + " at " + path.string());
  return Watermark::load_sidecar(in);
}

void cmd_detect(const RunConfig& config, const std::string& scheme, const std::string& input,
                const std::string& negative) {
  Workspace ws(config);
  const auto wm = load_sidecar_for(ws, scheme);
  const auto model = load_model(ws.out / "model.txt");
  if (wm.vocab_size() != model.vocab_size()) throw Error(ErrorKind::Format, "sidecar vocabulary differs from model");
  const fs::path pos_path = input.empty() ? ws.out / "texts" / (scheme + ".txt") : fs::path(input);
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream csv;
  csv << "text_id,label,g,T,z\n";
  auto score = [&](const fs::path& path, const char* label) {
    std::vector<double> zs;
    const auto texts = tok_all(read_lines(path), model.vocab());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      DetectionResult r;
      try {
        r = detect(texts[i].ids, wm);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TextTooShort) throw;
      }
      zs.push_back(r.z);
      char z[32];
      std::snprintf(z, sizeof z, "%.10g", r.z);
      csv << i << ',' << label << ',' << r.green << ',' << r.scored << ',' << z << '\n';
    }
    return zs;
  };
  const auto zp = score(pos_path, "watermarked");
  std::optional<RocCurve> roc;
  if (!negative.empty()) roc = roc_auc(zp, score(negative, "clean"));
  const double secs = since(t0);
  const std::string stem = "scores/" + pos_path.stem().string();
  ws.emit(stem + ".csv", csv.str());
  if (roc) {
    std::ostringstream rc;
    rc << "fpr,tpr\n";
    for (const auto& p : roc->points) rc << p.fpr << ',' << p.tpr << '\n';
    ws.emit(stem + ".roc.csv", rc.str());
    const nlohmann::json summary{{"scheme", scheme},
                                 {"watermarked", pos_path.generic_string()},
                                 {"clean", negative},
                                 {"aucroc", roc->auc},
                                 {"texts", zp.size()}};
    ws.emit(stem + ".summary.json", summary.dump(2) + "\n");
  }
  ws.manifest.add_stage("detect/" + scheme, secs);
  ws.manifest.save();
  std::cout << scheme << " scored " << zp.size() << " texts in " << secs << " s";
  if (roc) std::cout << ", aucroc " << roc->auc;
  std::cout << '\n';
}

void cmd_attack(const RunConfig& config, const std::string& kind, const std::string& scheme, const std::string& input,
                const std::string& clean_path) {
  Workspace ws(config);
  const auto bench = ws.bench();
  const auto& vocab = bench.model().vocab();
  const fs::path marked_path = input.empty() ? ws.out / "texts" / (scheme + ".txt") : fs::path(input);
  const auto marked = tok_all(read_lines(marked_path), vocab);
  const auto t0 = std::chrono::steady_clock::now();
  if (kind == "scrub") {
    std::vector<TokenSequence> out;
    const bool noop = config.scrub.replace_rate == 0.0 && config.scrub.delete_rate == 0.0 &&
                      config.scrub.insert_rate == 0.0;
    if (noop) {
      ws.emit("attacks/" + scheme + ".scrub.txt", read_file(marked_path));
    } else {
      out = bench.scrub_all(marked, config.scrub, "scrub/" + scheme);
      ws.emit("attacks/" + scheme + ".scrub.txt", join_lines(detok_all(out, vocab)));
    }
  } else if (kind == "steal") {
    const fs::path cp = clean_path.empty() ? ws.out / "texts" / "clean.txt" : fs::path(clean_path);
    const auto clean = tok_all(read_lines(cp), vocab);
    for (int n = 1; n <= 4; ++n) {
      std::ostringstream tw, tb;
      NGramTable::build(marked, n).save(tw);
      NGramTable::build(clean, n).save(tb);
      ws.emit("tables/" + scheme + ".n" + std::to_string(n) + ".watermarked.txt", tw.str());
      ws.emit("tables/" + scheme + ".n" + std::to_string(n) + ".clean.txt", tb.str());
    }
    for (const auto& set : bench.steal(marked, clean, "steal/" + scheme)) {
      ws.emit("attacks/" + scheme + ".steal" + std::to_string(set.n) + ".txt", join_lines(detok_all(set.texts, vocab)));
    }
  } else {
    throw Error(ErrorKind::Config, "--kind must be scrub or steal");
  }
  ws.manifest.add_stage("attack/" + kind + "/" + scheme, since(t0));
  ws.manifest.save();
  std::cout << kind << " attack on " << scheme << " done\n";
}

void emit_report(Workspace& ws, const EvaluationReport& report) {
  std::ostringstream js, csv;
  write_json(report, js);
  write_csv(report, csv);
  ws.emit("report.json", js.str());
  ws.emit("report.csv", csv.str());
  for (std::size_t i = 0; i < report.environments.size(); ++i) {
    const auto& env = report.environments[i];
    std::string stem = env.name();
    for (auto& ch : stem) {
      if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
    }
    ws.emit("plots/" + stem + ".roc.svg", roc_svg(env));
    ws.emit("plots/" + stem + ".scores.svg", scores_svg(env));
    ws.emit("plots/" + stem + ".ranking.svg", ranking_svg(env));
  }
  for (const auto& env : report.environments) {
    std::cout << env.name() << '\n';
    std::printf("  %-6s %6s %6s %6s %6s %6s %7s\n", "scheme", "S_D", "S_T", "S_U", "S_R", "S_I", "S_CEFW");
    for (const auto& s : env.schemes) {
      const auto& c = s.scores;
      std::printf("  %-6s %6.3f %6.3f %6.3f %6.3f %6.3f %7.3f\n", s.label.c_str(), c.detectability, c.text_quality,
                  c.usability, c.robustness, c.imperceptibility, s.cefw);
    }
  }
}

void cmd_evaluate(const RunConfig& config, const std::string& source) {
  Workspace ws(config);
  const auto t0 = std::chrono::steady_clock::now();
  EvaluationReport report;
  if (source == "fixture") {
    const auto metrics = load_fixture_metrics(config.fixture_dir);
    report = evaluate_metrics(metrics, config.scenario, config.weights, Provenance::Fixture);
  } else if (source == "live") {
    const auto bench = fs::exists(ws.out / "model.txt") ? ws.bench() : Bench(config);
    const auto live = bench.evaluate([](std::string_view msg) { std::cerr << msg << '\n'; });
    const std::vector<EnvironmentMetrics> metrics{live.metrics};
    report = evaluate_metrics(metrics, config.scenario, config.weights, Provenance::Measured);
    for (std::size_t i = 0; i < live.rocs.size(); ++i) report.environments[0].schemes[i].roc = live.rocs[i];
  } else {
    throw Error(ErrorKind::Config, "--source must be live or fixture");
  }
  ws.manifest.add_stage("evaluate/" + source, since(t0));
  emit_report(ws, report);
  ws.manifest.save();
}

void cmd_report(const RunConfig& config, const std::string& input) {
  Workspace ws(config);
  const fs::path path = input.empty() ? ws.out / "report.json" : fs::path(input);
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open report " + path.string());
  const auto report = read_json(in);
  emit_report(ws, report);
  ws.manifest.save();
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidWeights:
    case ErrorKind::InvalidArgument:
      return kExitConfig;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text watermark embedding, detection, attacks and scoring"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Overrides o;
  std::string scheme, input, negative, kind, clean, source = "fixture";
  std::optional<int> count;

  auto* train = app.add_subcommand("train", "train the model and the perplexity judge");
  add_common(train, o);

  auto* gen = app.add_subcommand("generate", "generate watermarked or clean texts");
  add_common(gen, o);
  gen->add_option("-s,--scheme", scheme, "UNIW, KGW<w>, BW<w> or none")->required();
  gen->add_option("--count", count, "number of texts (default n_texts)");

  auto* det = app.add_subcommand("detect", "score texts against a scheme's sidecar");
  add_common(det, o);
  det->add_option("-s,--scheme", scheme, "scheme label")->required();
  det->add_option("-i,--input", input, "watermarked corpus (default texts/<scheme>.txt)");
  det->add_option("-n,--negative", negative, "unwatermarked corpus; adds an AUCROC");

  auto* att = app.add_subcommand("attack", "scrub or STEAL-spoof a corpus");
  add_common(att, o);
  att->add_option("-k,--kind", kind, "scrub or steal")->required()->check(CLI::IsMember({"scrub", "steal"}));
  att->add_option("-s,--scheme", scheme, "scheme label")->required();
  att->add_option("-i,--input", input, "watermarked corpus (default texts/<scheme>.txt)");
  att->add_option("--clean", clean, "clean corpus for STEAL (default texts/clean.txt)");

  auto* eval = app.add_subcommand("evaluate", "score all schemes and write the report");
  add_common(eval, o);
  eval->add_option("--source", source, "live or fixture")->check(CLI::IsMember({"live", "fixture"}));

  auto* rep = app.add_subcommand("report", "re-render CSV and plots from report.json");
  add_common(rep, o);
  rep->add_option("-i,--input", input, "report JSON (default <output>/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    // Scoring-only commands do not sample, so they need no seed.
    const bool needs_seed = !(rep->parsed() || (eval->parsed() && source == "fixture"));
    const RunConfig config = resolve_config(o, needs_seed);
    if (train->parsed()) cmd_train(config);
    else if (gen->parsed()) cmd_generate(config, scheme, count);
    else if (det->parsed()) cmd_detect(config, scheme, input, negative);
    else if (att->parsed()) cmd_attack(config, kind, scheme, input, clean);
    else if (eval->parsed()) cmd_evaluate(config, source);
    else if (rep->parsed()) cmd_report(config, input);
  } catch (const Error& e) {
    std::cerr << "wmark: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "wmark: io: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
