#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "itrc/corpus.hpp"
#include "itrc/encoder.hpp"
#include "itrc/ranker.hpp"
#include "itrc/spanner.hpp"

namespace itrc {

struct PruneResult {
  std::vector<std::int32_t> kept_positions;   // strictly increasing
  std::vector<std::int32_t> kept_sentences;   // ascending sentence ids
  FeatureSequence pruned;
};

struct TriageDecision {
  bool exited = false;
  SpanScore exit_span;     // valid when exited
  double confidence = 0.0; // best triage-span score
  PruneResult prune;       // valid when !exited
};

// The replicated output layer applied to layer-T features (the model head
// itself when weight sharing is on).
SpanDistribution triage_answer(const Parameters& params, const ModelConfig& config,
                               const FeatureSequence& q_feat_T,
                               const FeatureSequence& c_feat_T,
                               HeadTape* tape = nullptr);

// Returns the best span iff its score strictly exceeds t. t = inf never
// exits.
std::optional<SpanScore> should_exit(const SpanDistribution& dist, double t,
                                     std::size_t l_max);

// Keeps every sentence containing any token of any top-K candidate; kept
// rows stay in original order.
PruneResult context_prune(const FeatureSequence& c_feat_T, const SpanDistribution& dist,
                          std::size_t K, std::size_t l_max,
                          const std::vector<SentenceSpan>& sentence_spans);

enum class AnswerOrigin : std::uint8_t { triage, model };

struct AnswerStats {
  bool exited = false;
  double confidence = 0.0;     // triage confidence (0 when triage skipped)
  std::size_t kept_tokens = 0;
  std::size_t total_tokens = 0;
  // 1 - kept/total for pruned runs, 1.0 for exits (suffix layers saw
  // nothing), 0.0 when triaging is off.
  double pruned_portion = 0.0;
  double model_ms = 0.0;       // wall clock of the neural region
};

struct Answer {
  SpanScore span;  // original context token indices
  AnswerOrigin origin = AnswerOrigin::model;
  AnswerStats stats;
};

// Full single-context pipeline: prefix -> triage -> (exit | prune ->
// suffix -> model head) -> decode. no_triage skips the triage module and
// runs all layers on the full context.
Answer answer_question(const Parameters& params, const ModelConfig& config,
                       const TokenizedText& question, const TokenizedText& context,
                       bool no_triage = false);

// Selected paragraphs concatenated in document order. Sentence ids are
// renumbered to stay distinct across paragraph boundaries; char offsets are
// shifted into the combined original string.
TokenizedText combine_paragraphs(const Document& doc,
                                 const std::vector<std::int32_t>& paragraph_ids);

struct DocAnswer {
  std::string text;
  SpanScore span;              // token indices within the combined context
  std::int32_t paragraph_id = 0;
  AnswerOrigin origin = AnswerOrigin::model;
  AnswerStats stats;
};

// TF-IDF paragraph selection, combined-context pipeline, answer text
// recovery from the original character offsets. When config.shared_norm is
// set and no early-exit fires, the final logits are normalized jointly
// across the surviving paragraph segments.
DocAnswer answer_document(const Parameters& params, const ModelConfig& config,
                          const TokenizedText& question, const Document& doc,
                          std::size_t n_paragraphs, bool no_triage = false);

// Same, with a prebuilt ranker index for the document (eval reuses one
// index across all questions of an article).
DocAnswer answer_document_with_index(const Parameters& params, const ModelConfig& config,
                                     const TokenizedText& question, const Document& doc,
                                     const TfidfIndex& index, std::size_t n_paragraphs,
                                     bool no_triage = false);

}  // namespace itrc
