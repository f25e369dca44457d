#include "itrc/evalbench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "itrc/encoder.hpp"
#include "itrc/spanner.hpp"
#include "itrc/training.hpp"
#include "itrc/triage.hpp"
#include "json.hpp"

namespace itrc {

std::string normalize_answer(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u >= 'A' && u <= 'Z') u = static_cast<unsigned char>(u - 'A' + 'a');
    const bool punct = u < 0x80 && ((u >= '!' && u <= '/') || (u >= ':' && u <= '@') ||
                                    (u >= '[' && u <= '`') || (u >= '{' && u <= '~'));
    if (!punct) lowered.push_back(static_cast<char>(u));
  }

  std::string out;
  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && std::isspace(static_cast<unsigned char>(lowered[i]))) ++i;
    std::size_t j = i;
    while (j < lowered.size() && !std::isspace(static_cast<unsigned char>(lowered[j]))) ++j;
    if (j > i) {
      const std::string tok = lowered.substr(i, j - i);
      if (tok != "a" && tok != "an" && tok != "the") {
        if (!out.empty()) out.push_back(' ');
        out += tok;
      }
    }
    i = j;
  }
  return out;
}

namespace {

std::map<std::string, int> token_bag(const std::string& normalized) {
  std::map<std::string, int> bag;
  std::size_t i = 0;
  while (i < normalized.size()) {
    std::size_t j = normalized.find(' ', i);
    if (j == std::string::npos) j = normalized.size();
    if (j > i) ++bag[normalized.substr(i, j - i)];
    i = j + 1;
  }
  return bag;
}

double bag_f1(const std::map<std::string, int>& pred, const std::map<std::string, int>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  int overlap = 0, pred_n = 0, gold_n = 0;
  for (const auto& [tok, cnt] : pred) {
    pred_n += cnt;
    const auto it = gold.find(tok);
    if (it != gold.end()) overlap += std::min(cnt, it->second);
  }
  for (const auto& [tok, cnt] : gold) gold_n += cnt;
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / pred_n;
  const double r = static_cast<double>(overlap) / gold_n;
  return 2.0 * p * r / (p + r);
}

}  // namespace

std::pair<int, double> em_f1(const std::string& prediction,
                             const std::vector<std::string>& golds) {
  const std::string pred_norm = normalize_answer(prediction);
  const auto pred_bag = token_bag(pred_norm);
  int em = 0;
  double f1 = 0.0;
  for (const std::string& gold : golds) {
    const std::string gold_norm = normalize_answer(gold);
    if (gold_norm == pred_norm) em = 1;
    f1 = std::max(f1, bag_f1(pred_bag, token_bag(gold_norm)));
  }
  return {em, f1};
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

namespace {

std::vector<std::string> gold_texts(const QASample& s) {
  std::vector<std::string> out;
  out.reserve(s.gold_answers.size());
  for (const GoldSpan& g : s.gold_answers) out.push_back(g.answer_text);
  return out;
}

std::string paragraph_answer_text(const TokenizedText& para, const SpanScore& span) {
  const Token& tb = para.tokens[static_cast<std::size_t>(span.b)];
  const Token& te = para.tokens[static_cast<std::size_t>(span.e)];
  return para.original.substr(tb.char_start, te.char_end - tb.char_start);
}

struct SampleResult {
  int em = 0;
  double f1 = 0.0;
  AnswerStats stats;
};

// One sample through the configured pipeline (document-level by default,
// golden paragraph only when requested).
SampleResult eval_one(const Parameters& params, const ModelConfig& config,
                      const QASample& sample, const TfidfIndex* index,
                      const EvalOptions& options) {
  SampleResult r;
  if (options.golden_paragraph) {
    const auto pid = static_cast<std::size_t>(sample.golden_paragraph_id.value());
    const TokenizedText& para = sample.document->paragraphs.at(pid);
    const Answer a = answer_question(params, config, sample.question, para,
                                     options.no_triage);
    const auto [em, f1] = em_f1(paragraph_answer_text(para, a.span), gold_texts(sample));
    r.em = em;
    r.f1 = f1;
    r.stats = a.stats;
  } else {
    const DocAnswer a = answer_document_with_index(params, config, sample.question,
                                                   *sample.document, *index,
                                                   options.n_paragraphs, options.no_triage);
    const auto [em, f1] = em_f1(a.text, gold_texts(sample));
    r.em = em;
    r.f1 = f1;
    r.stats = a.stats;
  }
  return r;
}

}  // namespace

EvalReport evaluate(const Parameters& params, const ModelConfig& config,
                    const std::vector<QASample>& dataset, const EvalOptions& options) {
  EvalReport report;
  report.n = dataset.size();
  if (dataset.empty()) return report;

  // One ranker index per distinct document.
  std::map<const Document*, TfidfIndex> indexes;
  if (!options.golden_paragraph)
    for (const QASample& s : dataset)
      if (indexes.find(s.document.get()) == indexes.end())
        indexes.emplace(s.document.get(), build_index(s.document->paragraphs));

  auto run_pass = [&](std::vector<SampleResult>& out, std::size_t jobs) {
    out.resize(dataset.size());
    auto worker = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const TfidfIndex* index = options.golden_paragraph
                                      ? nullptr
                                      : &indexes.at(dataset[i].document.get());
        out[i] = eval_one(params, config, dataset[i], index, options);
      }
    };
    if (jobs <= 1) {
      worker(0, dataset.size());
    } else {
      std::vector<std::thread> threads;
      const std::size_t chunk = (dataset.size() + jobs - 1) / jobs;
      for (std::size_t j = 0; j < jobs; ++j) {
        const std::size_t begin = j * chunk;
        if (begin >= dataset.size()) break;
        threads.emplace_back(worker, begin, std::min(begin + chunk, dataset.size()));
      }
      for (std::thread& t : threads) t.join();
    }
  };

  // Accuracy pass; doubles as the first latency run when it is sequential.
  std::vector<SampleResult> results;
  run_pass(results, options.jobs);

  double em_sum = 0.0, f1_sum = 0.0, pruned_sum = 0.0, pruned_nonexit_sum = 0.0;
  std::size_t exits = 0, nonexits = 0;
  for (const SampleResult& r : results) {
    em_sum += r.em;
    f1_sum += r.f1;
    if (r.stats.exited) {
      ++exits;
      pruned_sum += 1.0;
    } else {
      ++nonexits;
      pruned_sum += r.stats.pruned_portion;
      pruned_nonexit_sum += r.stats.pruned_portion;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(dataset.size());
  report.em = 100.0 * em_sum * inv_n;
  report.f1 = 100.0 * f1_sum * inv_n;
  report.pruned_portion = 100.0 * pruned_sum * inv_n;
  if (nonexits > 0)
    report.pruned_portion_nonexit =
        100.0 * pruned_nonexit_sum / static_cast<double>(nonexits);
  report.exit_rate = 100.0 * static_cast<double>(exits) * inv_n;

  if (options.latency_runs == 0) return report;

  // Latency runs are strictly sequential regardless of the jobs setting.
  std::vector<double> run_means, run_p90s, run_p99s;
  for (std::size_t run = 0; run < options.latency_runs; ++run) {
    std::vector<SampleResult> pass;
    if (run == 0 && options.jobs <= 1) {
      pass = results;  // the accuracy pass already ran sequentially
    } else {
      run_pass(pass, 1);
    }
    std::vector<double> lat(pass.size());
    for (std::size_t i = 0; i < pass.size(); ++i) lat[i] = pass[i].stats.model_ms;
    run_means.push_back(std::accumulate(lat.begin(), lat.end(), 0.0) /
                        static_cast<double>(lat.size()));
    run_p90s.push_back(percentile_nearest_rank(lat, 90.0));
    run_p99s.push_back(percentile_nearest_rank(lat, 99.0));
  }
  auto mean_of = [](const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  };
  report.latency_mean_ms = mean_of(run_means);
  report.latency_p90_ms = mean_of(run_p90s);
  report.latency_p99_ms = mean_of(run_p99s);
  if (run_means.size() > 1) {
    const double mu = *report.latency_mean_ms;
    double ss = 0.0;
    for (double x : run_means) ss += (x - mu) * (x - mu);
    report.latency_std_over_runs_ms =
        std::sqrt(ss / static_cast<double>(run_means.size() - 1));
  } else {
    report.latency_std_over_runs_ms = 0.0;
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;
  };
  put("em", em);
  put("f1", f1);
  put("latency_mean_ms", latency_mean_ms);
  put("latency_p90_ms", latency_p90_ms);
  put("latency_p99_ms", latency_p99_ms);
  put("latency_std_over_runs_ms", latency_std_over_runs_ms);
  put("pruned_portion", pruned_portion);
  put("pruned_portion_nonexit", pruned_portion_nonexit);
  put("exit_rate", exit_rate);
  return j.dump(2);
}

namespace {

struct TriageOutcome {
  double confidence = 0.0;
  double f1 = 0.0;
};

// Triage answer on the golden paragraph: prefix layers + triage head only.
TriageOutcome triage_on_golden(const Parameters& params, const ModelConfig& config,
                               const QASample& sample) {
  const auto pid = static_cast<std::size_t>(sample.golden_paragraph_id.value());
  const TokenizedText& para = sample.document->paragraphs.at(pid);
  auto [qT, cT] = forward_prefix(params, config, sample.question, para);
  const SpanDistribution dist = triage_answer(params, config, qT, cT);
  const SpanScore best = decode_span(dist, config.l_max);
  const auto [em, f1] = em_f1(paragraph_answer_text(para, best), gold_texts(sample));
  (void)em;
  return {best.score, f1};
}

}  // namespace

std::vector<std::pair<double, double>> confidence_profile(
    const Parameters& params, const ModelConfig& config,
    const std::vector<QASample>& dataset, const std::vector<double>& buckets) {
  std::vector<TriageOutcome> outcomes;
  outcomes.reserve(dataset.size());
  for (const QASample& s : dataset) outcomes.push_back(triage_on_golden(params, config, s));

  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const TriageOutcome& a, const TriageOutcome& b) {
                     return a.confidence > b.confidence;
                   });

  std::vector<std::pair<double, double>> profile;
  for (const double pct : buckets) {
    std::size_t count = static_cast<std::size_t>(
        std::floor(pct / 100.0 * static_cast<double>(outcomes.size())));
    if (count < 1) count = 1;
    if (count > outcomes.size()) count = outcomes.size();
    double f1_sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) f1_sum += outcomes[i].f1;
    profile.emplace_back(pct, 100.0 * f1_sum / static_cast<double>(count));
  }
  return profile;
}

std::vector<SweepRow> t_sweep(const ModelConfig& base, std::size_t vocab_size,
                              const std::vector<QASample>& train_set,
                              const std::vector<QASample>& eval_set,
                              const std::vector<std::size_t>& T_values,
                              std::size_t epochs, double step_size) {
  std::vector<std::size_t> ts = T_values;
  std::sort(ts.begin(), ts.end());

  std::vector<SweepRow> rows;
  for (const std::size_t T : ts) {
    ModelConfig config = base;
    config.T = T;
    config.validate();
    Parameters params = init_params(config, vocab_size);
    params = train(std::move(params), config, train_set, epochs, step_size);

    double f1_sum = 0.0;
    for (const QASample& s : eval_set)
      f1_sum += triage_on_golden(params, config, s).f1;
    rows.push_back(SweepRow{
        T, eval_set.empty() ? 0.0 : 100.0 * f1_sum / static_cast<double>(eval_set.size())});
  }
  return rows;
}

}  // namespace itrc
