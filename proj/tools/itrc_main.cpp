// itrc: cascaded extractive QA over multi-paragraph documents.
// Subcommands: prep, train, eval, bench, sweep, profile, ask.
// Exit codes: 0 ok, 1 usage, 2 bad input, 3 numeric failure, 4 incompatible
// checkpoint/config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "itrc/corpus.hpp"
#include "itrc/evalbench.hpp"
#include "itrc/kernels.hpp"
#include "itrc/training.hpp"
#include "itrc/triage.hpp"
#include "json.hpp"

namespace {

using namespace itrc;

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIncompatible = 4;

struct Cli {
  // model knobs
  std::size_t d = 64, L = 6, K = 5, lmax = 8, vocab = 4096;
  std::string T_str = "2";  // sweep accepts a comma list
  std::string t_str = "inf";
  std::string variant = "independent";
  bool weight_sharing = false;
  bool shared_norm = false;
  std::uint64_t seed = 0;
  std::string kernels = "auto";

  // io and run knobs
  std::string corpus_path, eval_corpus_path, squad_path, out_path, ckpt_path;
  std::string loss_csv, question, doc_path;
  std::string buckets = "10,20,30,40,50,60,70,80,90,100";
  bool synth = false;
  std::size_t docs = 4, paras_per_doc = 5;
  long long split = -1;
  std::size_t epochs = 30;
  double step = 0.05;
  std::size_t paras = 5;
  std::size_t runs = 1;
  std::size_t jobs = 1;
  bool no_triage = false;
  bool no_timing = false;
  bool golden = false;
};

double parse_threshold(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "Inf")
    return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad threshold: " + s);
  return v;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoull(item)));
  if (out.empty()) throw std::invalid_argument("empty list: " + s);
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("empty list: " + s);
  return out;
}

// nlohmann prints shortest-roundtrip doubles; reports and CSVs share it so
// numbers compare bit-for-bit across commands.
std::string num(double x) { return nlohmann::json(x).dump(); }

ModelConfig config_from_cli(const Cli& cli) {
  ModelConfig c;
  c.d = cli.d;
  c.L = cli.L;
  const auto ts = parse_size_list(cli.T_str);
  if (ts.size() != 1) throw std::invalid_argument("--T wants a single value here");
  c.T = ts[0];
  c.K = cli.K;
  c.l_max = cli.lmax;
  c.t = parse_threshold(cli.t_str);
  c.variant = cli.variant == "conditional" ? OutputVariant::conditional
                                           : OutputVariant::independent;
  c.weight_sharing = cli.weight_sharing;
  c.shared_norm = cli.shared_norm;
  c.seed = cli.seed;
  c.validate();
  return c;
}

std::vector<QASample> load_cache_or_die(const std::string& path) {
  const LoadResult r = load_corpus(path);
  if (r.excluded_unmappable > 0)
    std::cerr << "note: " << r.excluded_unmappable << " samples had unmappable golds\n";
  return r.samples;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CorpusError("cannot write: " + path);
  f << content;
  if (!f) throw CorpusError("write failed: " + path);
}

struct CorpusStats {
  std::size_t samples = 0, documents = 0, paragraphs = 0, sentences = 0;
};

CorpusStats corpus_stats(const std::vector<QASample>& samples) {
  CorpusStats st;
  st.samples = samples.size();
  std::vector<const Document*> seen;
  for (const QASample& s : samples) {
    if (std::find(seen.begin(), seen.end(), s.document.get()) != seen.end()) continue;
    seen.push_back(s.document.get());
    st.paragraphs += s.document->paragraphs.size();
    for (const TokenizedText& p : s.document->paragraphs)
      st.sentences += p.sentence_spans.size();
  }
  st.documents = seen.size();
  return st;
}

int cmd_prep(const Cli& cli) {
  std::vector<QASample> samples;
  std::size_t excluded = 0;
  if (cli.synth) {
    samples = synth_corpus(cli.seed, cli.docs, cli.paras_per_doc);
  } else if (!cli.squad_path.empty()) {
    LoadResult r = load_squad(cli.squad_path);
    samples = std::move(r.samples);
    excluded = r.excluded_unmappable;
  } else {
    std::cerr << "prep: need --synth or --squad FILE\n";
    return kExitUsage;
  }
  if (cli.out_path.empty()) {
    std::cerr << "prep: need --out PATH\n";
    return kExitUsage;
  }

  if (cli.split >= 0) {
    auto [val, test] = split_dev(samples, static_cast<std::size_t>(cli.split));
    save_corpus(val, cli.out_path + "-val");
    save_corpus(test, cli.out_path + "-test");
    const CorpusStats sv = corpus_stats(val), st = corpus_stats(test);
    std::cout << "dev-val: " << sv.samples << " samples, " << sv.documents << " documents, "
              << sv.paragraphs << " paragraphs, " << sv.sentences << " sentences\n";
    std::cout << "dev-test: " << st.samples << " samples, " << st.documents << " documents, "
              << st.paragraphs << " paragraphs, " << st.sentences << " sentences\n";
  } else {
    save_corpus(samples, cli.out_path);
    const CorpusStats st = corpus_stats(samples);
    std::cout << st.samples << " samples, " << st.documents << " documents, "
              << st.paragraphs << " paragraphs, " << st.sentences << " sentences\n";
  }
  if (excluded > 0) std::cout << excluded << " samples excluded (unmappable gold spans)\n";
  return 0;
}

int cmd_train(const Cli& cli) {
  if (cli.corpus_path.empty() || cli.out_path.empty()) {
    std::cerr << "train: need --corpus CACHE and --out CKPT\n";
    return kExitUsage;
  }
  const ModelConfig config = config_from_cli(cli);
  const auto samples = load_cache_or_die(cli.corpus_path);

  Parameters params = init_params(config, cli.vocab);
  std::vector<LossReport> trace;
  params = train(std::move(params), config, samples, cli.epochs, cli.step, &trace);
  save_checkpoint(cli.out_path, config, params);

  if (!cli.loss_csv.empty()) {
    std::string csv = "epoch,nll_tri,nll_model,total\n";
    for (std::size_t e = 0; e < trace.size(); ++e)
      csv += std::to_string(e) + "," + num(trace[e].nll_tri) + "," +
             num(trace[e].nll_model) + "," + num(trace[e].total) + "\n";
    write_text(cli.loss_csv, csv);
  }

  EvalOptions opt;
  opt.golden_paragraph = true;
  opt.latency_runs = 0;
  opt.jobs = cli.jobs;
  const EvalReport r = evaluate(params, config, samples, opt);
  if (!trace.empty())
    std::cout << "final epoch loss: " << num(trace.back().total) << "\n";
  std::cout << "train golden-paragraph EM: " << num(r.em.value_or(0.0))
            << " F1: " << num(r.f1.value_or(0.0)) << "\n";
  std::cout << "checkpoint written to " << cli.out_path << "\n";
  return 0;
}

// Structural fields must match the checkpoint when given explicitly;
// inference knobs (t, K, lmax, shared-norm, paras) override freely.
int apply_checkpoint_overrides(const CLI::App* app, const Cli& cli, ModelConfig& config,
                               const Parameters& params) {
  auto mismatch = [&](const std::string& what) {
    std::cerr << "incompatible with checkpoint: " << what << "\n";
    return kExitIncompatible;
  };
  if (app->count("--d") > 0 && cli.d != config.d) return mismatch("--d");
  if (app->count("--L") > 0 && cli.L != config.L) return mismatch("--L");
  if (app->count("--T") > 0 && parse_size_list(cli.T_str) != std::vector<std::size_t>{config.T})
    return mismatch("--T");
  if (app->count("--vocab") > 0 && cli.vocab != params.vocab_size) return mismatch("--vocab");
  if (app->count("--variant") > 0) {
    const auto v = cli.variant == "conditional" ? OutputVariant::conditional
                                                : OutputVariant::independent;
    if (v != config.variant) return mismatch("--variant");
  }
  if (app->count("--weight-sharing") > 0 && cli.weight_sharing != config.weight_sharing)
    return mismatch("--weight-sharing");

  if (app->count("--t") > 0) config.t = parse_threshold(cli.t_str);
  if (app->count("--K") > 0) config.K = cli.K;
  if (app->count("--lmax") > 0) config.l_max = cli.lmax;
  if (app->count("--shared-norm") > 0) config.shared_norm = cli.shared_norm;
  return 0;
}

int cmd_eval(const CLI::App* app, const Cli& cli, bool bench) {
  if (cli.ckpt_path.empty() || cli.corpus_path.empty()) {
    std::cerr << (bench ? "bench" : "eval") << ": need --ckpt and --corpus\n";
    return kExitUsage;
  }
  auto [config, params] = load_checkpoint(cli.ckpt_path);
  if (const int rc = apply_checkpoint_overrides(app, cli, config, params); rc != 0) return rc;

  const auto samples = load_cache_or_die(cli.corpus_path);
  EvalOptions opt;
  opt.n_paragraphs = cli.paras;
  opt.jobs = cli.jobs;
  opt.no_triage = cli.no_triage;
  opt.golden_paragraph = cli.golden;
  opt.latency_runs = cli.no_timing ? 0 : cli.runs;
  const EvalReport report = evaluate(params, config, samples, opt);

  const std::string json = report.to_json() + "\n";
  if (cli.out_path.empty()) {
    std::cout << json;
  } else {
    write_text(cli.out_path, json);
    std::cout << "report written to " << cli.out_path << "\n";
  }
  return 0;
}

int cmd_sweep(const Cli& cli) {
  if (cli.corpus_path.empty() || cli.eval_corpus_path.empty() || cli.out_path.empty()) {
    std::cerr << "sweep: need --corpus, --eval-corpus and --out\n";
    return kExitUsage;
  }
  Cli base_cli = cli;
  base_cli.T_str = "1";  // placeholder; t_sweep sets T per row
  const ModelConfig base = config_from_cli(base_cli);
  const auto train_set = load_cache_or_die(cli.corpus_path);
  const auto eval_set = load_cache_or_die(cli.eval_corpus_path);
  const auto T_values = parse_size_list(cli.T_str);

  const auto rows = t_sweep(base, cli.vocab, train_set, eval_set, T_values, cli.epochs,
                            cli.step);
  std::string csv = "T,triage_f1\n";
  for (const SweepRow& r : rows) csv += std::to_string(r.T) + "," + num(r.triage_f1) + "\n";
  write_text(cli.out_path, csv);
  std::cout << rows.size() << " rows written to " << cli.out_path << "\n";
  return 0;
}

int cmd_profile(const Cli& cli) {
  if (cli.ckpt_path.empty() || cli.corpus_path.empty() || cli.out_path.empty()) {
    std::cerr << "profile: need --ckpt, --corpus and --out\n";
    return kExitUsage;
  }
  auto [config, params] = load_checkpoint(cli.ckpt_path);
  const auto samples = load_cache_or_die(cli.corpus_path);
  const auto buckets = parse_double_list(cli.buckets);
  const auto profile = confidence_profile(params, config, samples, buckets);
  std::string csv = "top_percent,f1\n";
  for (const auto& [pct, f1] : profile) csv += num(pct) + "," + num(f1) + "\n";
  write_text(cli.out_path, csv);
  std::cout << profile.size() << " rows written to " << cli.out_path << "\n";
  return 0;
}

int cmd_ask(const CLI::App* app, const Cli& cli) {
  if (cli.ckpt_path.empty() || cli.question.empty() || cli.doc_path.empty()) {
    std::cerr << "ask: need --ckpt, --question and --doc\n";
    return kExitUsage;
  }
  auto [config, params] = load_checkpoint(cli.ckpt_path);
  if (const int rc = apply_checkpoint_overrides(app, cli, config, params); rc != 0) return rc;

  std::ifstream f(cli.doc_path, std::ios::binary);
  if (!f) throw CorpusError("cannot open document: " + cli.doc_path);
  const std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());

  // paragraphs split on blank lines
  Document doc;
  std::size_t pos = 0;
  std::int32_t pid = 0;
  while (pos < text.size()) {
    std::size_t sep = text.find("\n\n", pos);
    if (sep == std::string::npos) sep = text.size();
    std::string para = text.substr(pos, sep - pos);
    while (!para.empty() && (para.back() == '\n' || para.back() == '\r')) para.pop_back();
    if (!para.empty()) {
      doc.paragraphs.push_back(tokenize(para));
      for (Token& t : doc.paragraphs.back().tokens) t.paragraph_id = pid;
      ++pid;
    }
    pos = sep + 2;
  }
  if (doc.paragraphs.empty()) throw CorpusError("document is empty: " + cli.doc_path);

  const TokenizedText question = tokenize(cli.question);
  const std::size_t n_paras = std::min(cli.paras, doc.paragraphs.size());
  const DocAnswer a =
      answer_document(params, config, question, doc, n_paras, cli.no_triage);

  const double kept_pct =
      a.stats.exited ? 100.0
                     : 100.0 * static_cast<double>(a.stats.kept_tokens) /
                           static_cast<double>(a.stats.total_tokens);
  std::cout << "answer: " << a.text << "\n";
  std::cout << "origin: " << (a.origin == AnswerOrigin::triage ? "triage" : "model") << "\n";
  std::cout << "confidence: " << num(a.stats.confidence) << "\n";
  std::cout << "kept tokens: " << num(kept_pct) << "%\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"integrated triaging for extractive question answering"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config")->description("key=value config file");
  app.allow_config_extras(false);

  Cli cli;
  app.add_option("--seed", cli.seed, "rng seed");
  app.add_option("--d", cli.d, "feature width");
  app.add_option("--L", cli.L, "encoder layers");
  app.add_option("--T", cli.T_str, "triage layer (sweep: comma list)");
  app.add_option("--K", cli.K, "pruning candidate count");
  app.add_option("--t", cli.t_str, "early-exit threshold (number or inf)");
  app.add_option("--lmax", cli.lmax, "max answer span length");
  app.add_option("--vocab", cli.vocab, "embedding hash buckets");
  app.add_option("--variant", cli.variant, "output layer kind")
      ->check(CLI::IsMember({"independent", "conditional"}));
  app.add_flag("--weight-sharing,!--no-weight-sharing", cli.weight_sharing,
               "triage head shares the model head weights");
  app.add_flag("--shared-norm,!--no-shared-norm", cli.shared_norm,
               "normalize span logits jointly across paragraphs");
  app.add_option("--jobs", cli.jobs, "accuracy-pass worker threads");
  app.add_option("--kernels", cli.kernels, "math backend")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  CLI::App* prep = app.add_subcommand("prep", "build a corpus cache");
  prep->add_flag("--synth", cli.synth, "generate the synthetic corpus");
  prep->add_option("--docs", cli.docs, "synthetic documents");
  prep->add_option("--paras-per-doc", cli.paras_per_doc, "paragraphs per document");
  prep->add_option("--squad", cli.squad_path, "SQuAD v1.1 JSON file");
  prep->add_option("--split", cli.split, "first N articles to dev-val, rest to dev-test");
  prep->add_option("--out", cli.out_path, "cache path (suffixed -val/-test with --split)");

  CLI::App* train_cmd = app.add_subcommand("train", "train a checkpoint");
  train_cmd->add_option("--corpus", cli.corpus_path, "corpus cache");
  train_cmd->add_option("--out", cli.out_path, "checkpoint output path");
  train_cmd->add_option("--epochs", cli.epochs, "training epochs");
  train_cmd->add_option("--step", cli.step, "gradient step size");
  train_cmd->add_option("--loss-csv", cli.loss_csv, "per-epoch loss trace CSV");

  auto add_eval_opts = [&](CLI::App* cmd, std::size_t default_runs) {
    cmd->add_option("--ckpt", cli.ckpt_path, "checkpoint");
    cmd->add_option("--corpus", cli.corpus_path, "corpus cache");
    cmd->add_option("--paras", cli.paras, "paragraphs selected by TF-IDF");
    cmd->add_option("--runs", cli.runs, "latency passes")->default_val(default_runs);
    cmd->add_option("--out", cli.out_path, "report JSON path (stdout when absent)");
    cmd->add_flag("--no-triage", cli.no_triage, "skip the triage module entirely");
  };
  CLI::App* eval_cmd = app.add_subcommand("eval", "accuracy report");
  add_eval_opts(eval_cmd, 1);
  eval_cmd->add_flag("--golden", cli.golden, "evaluate on golden paragraphs only");
  eval_cmd->add_flag("--no-timing", cli.no_timing, "skip latency measurement");
  CLI::App* bench_cmd = app.add_subcommand("bench", "latency benchmark (5 passes)");
  add_eval_opts(bench_cmd, 5);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "triage F1 across T values");
  sweep_cmd->add_option("--corpus", cli.corpus_path, "training corpus cache");
  sweep_cmd->add_option("--eval-corpus", cli.eval_corpus_path, "held-out corpus cache");
  sweep_cmd->add_option("--epochs", cli.epochs, "training epochs per T");
  sweep_cmd->add_option("--step", cli.step, "gradient step size");
  sweep_cmd->add_option("--out", cli.out_path, "CSV output path");

  CLI::App* profile_cmd = app.add_subcommand("profile", "confidence-stratified triage F1");
  profile_cmd->add_option("--ckpt", cli.ckpt_path, "checkpoint");
  profile_cmd->add_option("--corpus", cli.corpus_path, "corpus cache");
  profile_cmd->add_option("--buckets", cli.buckets, "top-N%% buckets, comma list");
  profile_cmd->add_option("--out", cli.out_path, "CSV output path");

  CLI::App* ask_cmd = app.add_subcommand("ask", "answer one question about a document");
  ask_cmd->add_option("--ckpt", cli.ckpt_path, "checkpoint");
  ask_cmd->add_option("--question", cli.question, "question text");
  ask_cmd->add_option("--doc", cli.doc_path, "document text file (blank-line paragraphs)");
  ask_cmd->add_option("--paras", cli.paras, "paragraphs selected by TF-IDF");
  ask_cmd->add_flag("--no-triage", cli.no_triage, "skip the triage module entirely");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cli.kernels == "scalar") kernels::force(kernels::Backend::scalar);
    if (cli.kernels == "avx2") kernels::force(kernels::Backend::avx2);

    if (prep->parsed()) return cmd_prep(cli);
    if (train_cmd->parsed()) return cmd_train(cli);
    if (eval_cmd->parsed()) return cmd_eval(&app, cli, false);
    if (bench_cmd->parsed()) return cmd_eval(&app, cli, true);
    if (sweep_cmd->parsed()) return cmd_sweep(cli);
    if (profile_cmd->parsed()) return cmd_profile(cli);
    if (ask_cmd->parsed()) return cmd_ask(&app, cli);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
