#include "itrc/triage.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

namespace itrc {

SpanDistribution triage_answer(const Parameters& params, const ModelConfig& config,
                               const FeatureSequence& q_feat_T,
                               const FeatureSequence& c_feat_T, HeadTape* tape) {
  const HeadParams& head = config.weight_sharing ? params.model_head : params.tri_head;
  return run_head(head, config.variant, q_feat_T.feat, c_feat_T.feat,
                  c_feat_T.positions, tape);
}

std::optional<SpanScore> should_exit(const SpanDistribution& dist, double t,
                                     std::size_t l_max) {
  const SpanScore best = decode_span(dist, l_max);
  if (best.score > t) return best;
  return std::nullopt;
}

PruneResult context_prune(const FeatureSequence& c_feat_T, const SpanDistribution& dist,
                          std::size_t K, std::size_t l_max,
                          const std::vector<SentenceSpan>& sentence_spans) {
  const auto candidates = top_k_candidates(dist, K, l_max);

  std::set<std::size_t> kept;
  for (const SpanScore& cand : candidates) {
    for (std::size_t s = 0; s < sentence_spans.size(); ++s) {
      const auto [first, last] = sentence_spans[s];
      if (cand.b <= last && cand.e >= first) kept.insert(s);
    }
  }

  PruneResult out;
  for (std::size_t s : kept) {
    out.kept_sentences.push_back(static_cast<std::int32_t>(s));
    for (std::int32_t p = sentence_spans[s].first; p <= sentence_spans[s].second; ++p)
      out.kept_positions.push_back(p);
  }
  // std::set iteration is ascending and sentence spans partition the token
  // range, so kept_positions is already strictly increasing.

  const std::size_t d = c_feat_T.feat.cols;
  out.pruned.feat = Mat(out.kept_positions.size(), d);
  out.pruned.positions.resize(out.kept_positions.size());
  for (std::size_t i = 0; i < out.kept_positions.size(); ++i) {
    // kept positions refer to original token indices; map them back to
    // local rows (identity before pruning, but stay general)
    const auto it = std::lower_bound(c_feat_T.positions.begin(), c_feat_T.positions.end(),
                                     out.kept_positions[i]);
    const auto row = static_cast<std::size_t>(it - c_feat_T.positions.begin());
    const double* src = c_feat_T.feat.row(row);
    std::copy(src, src + d, out.pruned.feat.row(i));
    out.pruned.positions[i] = out.kept_positions[i];
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

Answer answer_question(const Parameters& params, const ModelConfig& config,
                       const TokenizedText& question, const TokenizedText& context,
                       bool no_triage) {
  if (context.tokens.empty())
    throw std::invalid_argument("answer_question: empty context");

  Answer out;
  out.stats.total_tokens = context.tokens.size();

  const auto start = Clock::now();

  if (no_triage) {
    auto [q, c] = forward_full(params, config, question, context);
    const SpanDistribution dist =
        run_head(params.model_head, config.variant, q.feat, c.feat, c.positions);
    out.span = decode_span(dist, config.l_max);
    out.origin = AnswerOrigin::model;
    out.stats.kept_tokens = context.tokens.size();
    out.stats.pruned_portion = 0.0;
    out.stats.model_ms = ms_since(start);
    return out;
  }

  auto [qT, cT] = forward_prefix(params, config, question, context);
  const SpanDistribution tri_dist = triage_answer(params, config, qT, cT);
  const SpanScore tri_best = decode_span(tri_dist, config.l_max);
  out.stats.confidence = tri_best.score;

  if (tri_best.score > config.t) {
    out.span = tri_best;
    out.origin = AnswerOrigin::triage;
    out.stats.exited = true;
    out.stats.kept_tokens = 0;
    out.stats.pruned_portion = 1.0;  // suffix layers processed nothing
    out.stats.model_ms = ms_since(start);
    return out;
  }

  PruneResult prune =
      context_prune(cT, tri_dist, config.K, config.l_max, context.sentence_spans);
  auto [qL, cL] = forward_suffix(params, config, qT, prune.pruned);
  const SpanDistribution dist =
      run_head(params.model_head, config.variant, qL.feat, cL.feat, cL.positions);
  out.span = decode_span(dist, config.l_max);
  out.origin = AnswerOrigin::model;
  out.stats.kept_tokens = prune.kept_positions.size();
  out.stats.pruned_portion =
      1.0 - static_cast<double>(out.stats.kept_tokens) /
                static_cast<double>(out.stats.total_tokens);
  out.stats.model_ms = ms_since(start);
  return out;
}

TokenizedText combine_paragraphs(const Document& doc,
                                 const std::vector<std::int32_t>& paragraph_ids) {
  TokenizedText out;
  std::int32_t sentence_base = 0;
  for (const std::int32_t pid : paragraph_ids) {
    const TokenizedText& para = doc.paragraphs.at(static_cast<std::size_t>(pid));
    if (!out.original.empty()) out.original += "\n\n";
    const auto char_base = static_cast<std::uint32_t>(out.original.size());
    const auto token_base = static_cast<std::int32_t>(out.tokens.size());
    out.original += para.original;

    for (const Token& t : para.tokens) {
      Token shifted = t;
      shifted.char_start += char_base;
      shifted.char_end += char_base;
      shifted.sentence_id += sentence_base;
      shifted.paragraph_id = pid;
      out.tokens.push_back(std::move(shifted));
    }
    for (const SentenceSpan& s : para.sentence_spans)
      out.sentence_spans.emplace_back(s.first + token_base, s.second + token_base);
    sentence_base += static_cast<std::int32_t>(para.sentence_spans.size());
  }
  return out;
}

DocAnswer answer_document_with_index(const Parameters& params, const ModelConfig& config,
                                     const TokenizedText& question, const Document& doc,
                                     const TfidfIndex& index, std::size_t n_paragraphs,
                                     bool no_triage) {
  if (doc.paragraphs.empty())
    throw std::invalid_argument("answer_document: empty document");
  if (n_paragraphs < 1)
    throw std::invalid_argument("answer_document: n_paragraphs must be >= 1");

  std::vector<std::int32_t> selected = rank_paragraphs(index, question, n_paragraphs);
  std::sort(selected.begin(), selected.end());  // back to document order

  const TokenizedText context = combine_paragraphs(doc, selected);
  if (context.tokens.empty())
    throw std::invalid_argument("answer_document: selected paragraphs have no tokens");

  DocAnswer out;
  out.stats.total_tokens = context.tokens.size();

  if (!config.shared_norm) {
    const Answer a = answer_question(params, config, question, context, no_triage);
    out.span = a.span;
    out.origin = a.origin;
    out.stats = a.stats;
  } else {
    // Shared-norm path: identical pipeline, but the final decode jointly
    // normalizes logits across surviving paragraph segments.
    const auto start = std::chrono::steady_clock::now();
    auto [qT, cT] = forward_prefix(params, config, question, context);

    bool exited = false;
    SpanDistribution final_dist;
    FeatureSequence final_c;
    if (no_triage) {
      auto [qL, cL] = forward_suffix(params, config, qT, cT);
      final_dist =
          run_head(params.model_head, config.variant, qL.feat, cL.feat, cL.positions);
      final_c = std::move(cL);
      out.stats.kept_tokens = context.tokens.size();
      out.stats.pruned_portion = 0.0;
    } else {
      const SpanDistribution tri_dist = triage_answer(params, config, qT, cT);
      const SpanScore tri_best = decode_span(tri_dist, config.l_max);
      out.stats.confidence = tri_best.score;
      if (tri_best.score > config.t) {
        exited = true;
        out.span = tri_best;
        out.origin = AnswerOrigin::triage;
        out.stats.exited = true;
        out.stats.kept_tokens = 0;
        out.stats.pruned_portion = 1.0;
      } else {
        PruneResult prune =
            context_prune(cT, tri_dist, config.K, config.l_max, context.sentence_spans);
        auto [qL, cL] = forward_suffix(params, config, qT, prune.pruned);
        final_dist =
            run_head(params.model_head, config.variant, qL.feat, cL.feat, cL.positions);
        final_c = std::move(cL);
        out.stats.kept_tokens = prune.kept_positions.size();
        out.stats.pruned_portion =
            1.0 - static_cast<double>(out.stats.kept_tokens) /
                      static_cast<double>(out.stats.total_tokens);
      }
    }

    if (!exited) {
      // split the surviving rows into per-paragraph segments
      std::vector<SpanDistribution> segments;
      std::size_t row = 0;
      while (row < final_c.positions.size()) {
        const std::int32_t pid =
            context.tokens[static_cast<std::size_t>(final_c.positions[row])].paragraph_id;
        SpanDistribution seg;
        while (row < final_c.positions.size() &&
               context.tokens[static_cast<std::size_t>(final_c.positions[row])].paragraph_id ==
                   pid) {
          seg.start_logits.push_back(final_dist.start_logits[row]);
          seg.end_logits.push_back(final_dist.end_logits[row]);
          seg.positions.push_back(final_dist.positions[row]);
          ++row;
        }
        segments.push_back(std::move(seg));
      }
      const DocSpan best = shared_norm_decode(segments, config.l_max);
      out.span = best.span;
      out.origin = AnswerOrigin::model;
    }
    out.stats.model_ms = ms_since(start);
  }

  const Token& tb = context.tokens[static_cast<std::size_t>(out.span.b)];
  const Token& te = context.tokens[static_cast<std::size_t>(out.span.e)];
  out.text = context.original.substr(tb.char_start, te.char_end - tb.char_start);
  out.paragraph_id = tb.paragraph_id;
  return out;
}

DocAnswer answer_document(const Parameters& params, const ModelConfig& config,
                          const TokenizedText& question, const Document& doc,
                          std::size_t n_paragraphs, bool no_triage) {
  const TfidfIndex index = build_index(doc.paragraphs);
  return answer_document_with_index(params, config, question, doc, index, n_paragraphs,
                                    no_triage);
}

}  // namespace itrc
