#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "itrc/corpus.hpp"
#include "itrc/model.hpp"

namespace itrc {

// SQuAD-style normalization: lowercase, strip punctuation characters,
// drop the articles a/an/the as whole tokens, collapse whitespace.
std::string normalize_answer(const std::string& text);

// EM is exact string match against any gold after normalization; F1 is the
// best token-bag overlap. Both bags empty -> 1, exactly one empty -> 0.
std::pair<int, double> em_f1(const std::string& prediction,
                             const std::vector<std::string>& golds);

struct EvalReport {
  std::size_t n = 0;
  std::optional<double> em;            // percent
  std::optional<double> f1;            // percent
  std::optional<double> latency_mean_ms;
  std::optional<double> latency_p90_ms;
  std::optional<double> latency_p99_ms;
  std::optional<double> latency_std_over_runs_ms;
  std::optional<double> pruned_portion;         // percent, exits count as 100
  std::optional<double> pruned_portion_nonexit; // percent over non-exited only
  std::optional<double> exit_rate;              // percent

  std::string to_json() const;
};

struct EvalOptions {
  std::size_t n_paragraphs = 5;
  std::size_t latency_runs = 5;  // 0 = skip latency measurement
  std::size_t jobs = 1;          // accuracy pass parallelism
  bool no_triage = false;
  bool golden_paragraph = false;  // evaluate on the golden paragraph only
};

// Accuracy over answer_document per sample plus nearest-rank latency
// percentiles; latency statistics are averaged over latency_runs strictly
// sequential full passes.
EvalReport evaluate(const Parameters& params, const ModelConfig& config,
                    const std::vector<QASample>& dataset, const EvalOptions& options);

// (top-N%, mean triage F1) rows: samples sorted by triage confidence
// descending, evaluated on their golden paragraphs.
std::vector<std::pair<double, double>> confidence_profile(
    const Parameters& params, const ModelConfig& config,
    const std::vector<QASample>& dataset, const std::vector<double>& buckets);

struct SweepRow {
  std::size_t T = 0;
  double triage_f1 = 0.0;  // percent
};

// Trains one model per T on train_set and reports the triage head's
// golden-paragraph F1 on eval_set. Rows come back sorted by T.
std::vector<SweepRow> t_sweep(const ModelConfig& base, std::size_t vocab_size,
                              const std::vector<QASample>& train_set,
                              const std::vector<QASample>& eval_set,
                              const std::vector<std::size_t>& T_values,
                              std::size_t epochs, double step_size);

// Nearest-rank percentile of an unsorted sample list, p in (0, 100].
double percentile_nearest_rank(std::vector<double> values, double p);

}  // namespace itrc
