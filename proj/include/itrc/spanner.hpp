#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "itrc/mat.hpp"
#include "itrc/model.hpp"

namespace itrc {

// Start/end distributions over context positions. Raw logits are kept
// alongside the probabilities because shared-norm decoding re-normalizes
// across paragraphs from the logits.
struct SpanDistribution {
  VecD start, end;                // probabilities
  VecD start_logits, end_logits;  // pre-softmax
  std::vector<std::int32_t> positions;  // original token index per row
};

struct SpanScore {
  std::int32_t b = 0;  // original token indices
  std::int32_t e = 0;
  double score = 0.0;
};

// Intermediate values the backward pass needs; filled when non-null.
struct HeadTape {
  VecD alpha;            // conditional: question attention weights
  VecD qtilde, u1, v, qprime, u2;  // conditional intermediates
};

// start/end logits are C.ws / C.we, softmaxed independently.
SpanDistribution output_independent(const HeadParams& head, const Mat& c_feat,
                                    std::span<const std::int32_t> positions,
                                    HeadTape* tape = nullptr);

// Bilinear-attention head: a question summary scores the start; the summary
// is updated with the expected start context vector before scoring the end.
SpanDistribution output_conditional(const HeadParams& head, const Mat& q_feat,
                                    const Mat& c_feat,
                                    std::span<const std::int32_t> positions,
                                    HeadTape* tape = nullptr);

SpanDistribution run_head(const HeadParams& head, OutputVariant variant,
                          const Mat& q_feat, const Mat& c_feat,
                          std::span<const std::int32_t> positions,
                          HeadTape* tape = nullptr);

// Highest start[b]*end[e] over b <= e, e - b < l_max; ties prefer the
// lexicographically smaller local (b, e). Returned indices are original
// positions.
SpanScore decode_span(const SpanDistribution& dist, std::size_t l_max);

// The K best valid spans, descending by score (ties by ascending b then e).
std::vector<SpanScore> top_k_candidates(const SpanDistribution& dist, std::size_t K,
                                        std::size_t l_max);

struct DocSpan {
  std::size_t paragraph = 0;  // index into the input list
  SpanScore span;
};

// Joint softmax of start (and end) logits across all paragraphs, then the
// best within-paragraph span. The list must be in ascending paragraph
// order; ties prefer (paragraph, b, e) ascending.
DocSpan shared_norm_decode(std::span<const SpanDistribution> dists, std::size_t l_max);

}  // namespace itrc
