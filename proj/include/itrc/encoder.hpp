#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "itrc/mat.hpp"
#include "itrc/model.hpp"
#include "itrc/text.hpp"

namespace itrc {

// Per-token feature matrix plus the original token index of each row.
// positions stay the identity until context pruning gathers a subset.
struct FeatureSequence {
  Mat feat;
  std::vector<std::int32_t> positions;

  std::size_t size() const { return feat.rows; }
};

// ---- forward caches (only filled when a tape is supplied) ----

struct DirTape {
  Mat f, r, g, c, tc;  // n x d each; tc = tanh(c)
};

struct LayerTape {
  Mat x;  // layer input (for the context stream at layer T: post-interaction)
  DirTape fwd, bwd;
  Mat concat;  // n x 2d, [h_fwd ; h_bwd]
};

struct InteractionTape {
  Mat cin;     // pre-interaction context input
  Mat attn;    // n x m, post-softmax rows
  Mat mix;     // n x d, attn * Q
  Mat concat;  // n x 2d, [C ; mix]
};

struct EncoderTape {
  std::vector<std::uint32_t> q_buckets, c_buckets;
  std::vector<LayerTape> q_layers, c_layers;  // indexed by layer
  InteractionTape interaction;
  Mat qT, cT;  // features at the triage layer
  Mat qL, cL;  // features at the final layer
};

// Embedding lookup by hash bucket; positions = identity.
FeatureSequence embed(const Parameters& params, const TokenizedText& text);

// One gated bidirectional recurrent block (both directions share the input,
// outputs are concatenated and projected back to width d).
Mat recurrent_block(const RecurrentLayer& layer, const Mat& x, LayerTape* tape = nullptr);

// Context-to-question attention, applied to the context stream just before
// layer T's recurrent block. Throws on an empty question.
Mat interaction_block(const Mat& attn_proj, const Mat& c_feat, const Mat& q_feat,
                      InteractionTape* tape = nullptr);

// Layers 1..T (with the interaction block before layer T).
std::pair<FeatureSequence, FeatureSequence> forward_prefix(
    const Parameters& params, const ModelConfig& config,
    const TokenizedText& question, const TokenizedText& context,
    EncoderTape* tape = nullptr);

// Layers T+1..L. The context may be pruned; the recurrence runs over the
// kept rows in their original order.
std::pair<FeatureSequence, FeatureSequence> forward_suffix(
    const Parameters& params, const ModelConfig& config, const FeatureSequence& q_feat,
    const FeatureSequence& c_feat, EncoderTape* tape = nullptr);

// prefix then suffix with no pruning in between.
std::pair<FeatureSequence, FeatureSequence> forward_full(
    const Parameters& params, const ModelConfig& config,
    const TokenizedText& question, const TokenizedText& context,
    EncoderTape* tape = nullptr);

}  // namespace itrc
