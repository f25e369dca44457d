#include "itrc/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "itrc/kernels.hpp"

namespace itrc {

namespace k = kernels;

FeatureSequence embed(const Parameters& params, const TokenizedText& text) {
  FeatureSequence out;
  const std::size_t n = text.tokens.size();
  out.feat = Mat(n, params.d);
  out.positions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bucket =
        static_cast<std::size_t>(token_hash(text.tokens[i].norm) % params.vocab_size);
    const double* src = params.embedding.row(bucket);
    std::copy(src, src + params.d, out.feat.row(i));
    out.positions[i] = static_cast<std::int32_t>(i);
  }
  return out;
}

namespace {

// One direction of the gated recurrence. All matvecs depend only on the
// input, so the sequential part is the elementwise cell-state scan.
//   f_t = sigmoid(Wf x_t + bf); r_t = sigmoid(Wr x_t + br); g_t = W x_t
//   c_t = f_t * c_{t-1} + (1 - f_t) * g_t          (c_{-1} = 0)
//   h_t = r_t * tanh(c_t) + (1 - r_t) * x_t
Mat run_direction(const RecurrentDir& p, const Mat& x, bool reverse, DirTape* tape) {
  const std::size_t n = x.rows, d = x.cols;
  Mat f(n, d), r(n, d), g(n, d), c(n, d), tc(n, d), h(n, d);
  VecD pre(d);
  for (std::size_t t = 0; t < n; ++t) {
    k::matvec(p.Wf.v.data(), d, d, x.row(t), pre.data());
    for (std::size_t j = 0; j < d; ++j) pre[j] += p.bf[j];
    k::sigmoid(pre.data(), f.row(t), d);
    k::matvec(p.Wr.v.data(), d, d, x.row(t), pre.data());
    for (std::size_t j = 0; j < d; ++j) pre[j] += p.br[j];
    k::sigmoid(pre.data(), r.row(t), d);
    k::matvec(p.W.v.data(), d, d, x.row(t), g.row(t));
  }

  const VecD zero(d, 0.0);
  if (!reverse) {
    for (std::size_t t = 0; t < n; ++t) {
      const double* cprev = (t == 0) ? zero.data() : c.row(t - 1);
      k::cell_state(f.row(t), g.row(t), cprev, c.row(t), d);
      k::tanh(c.row(t), tc.row(t), d);
      k::highway(r.row(t), tc.row(t), x.row(t), h.row(t), d);
    }
  } else {
    for (std::size_t ti = n; ti-- > 0;) {
      const double* cprev = (ti + 1 == n) ? zero.data() : c.row(ti + 1);
      k::cell_state(f.row(ti), g.row(ti), cprev, c.row(ti), d);
      k::tanh(c.row(ti), tc.row(ti), d);
      k::highway(r.row(ti), tc.row(ti), x.row(ti), h.row(ti), d);
    }
  }

  if (tape != nullptr) {
    tape->f = std::move(f);
    tape->r = std::move(r);
    tape->g = std::move(g);
    tape->c = std::move(c);
    tape->tc = std::move(tc);
  }
  return h;
}

}  // namespace

Mat recurrent_block(const RecurrentLayer& layer, const Mat& x, LayerTape* tape) {
  if (x.cols != layer.proj.rows)
    throw std::invalid_argument("recurrent_block: input width mismatch");
  const std::size_t n = x.rows, d = x.cols;

  Mat hf = run_direction(layer.fwd, x, /*reverse=*/false, tape ? &tape->fwd : nullptr);
  Mat hb = run_direction(layer.bwd, x, /*reverse=*/true, tape ? &tape->bwd : nullptr);

  Mat concat(n, 2 * d);
  for (std::size_t t = 0; t < n; ++t) {
    std::copy(hf.row(t), hf.row(t) + d, concat.row(t));
    std::copy(hb.row(t), hb.row(t) + d, concat.row(t) + d);
  }
  Mat out(n, d);
  for (std::size_t t = 0; t < n; ++t)
    k::matvec(layer.proj.v.data(), d, 2 * d, concat.row(t), out.row(t));

  if (tape != nullptr) {
    tape->x = x;
    tape->concat = std::move(concat);
  }
  return out;
}

Mat interaction_block(const Mat& attn_proj, const Mat& c_feat, const Mat& q_feat,
                      InteractionTape* tape) {
  if (q_feat.rows == 0)
    throw std::invalid_argument("interaction_block: empty question");
  const std::size_t n = c_feat.rows, m = q_feat.rows, d = c_feat.cols;
  if (q_feat.cols != d) throw std::invalid_argument("interaction_block: width mismatch");

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Mat attn(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    k::matvec(q_feat.v.data(), m, d, c_feat.row(i), attn.row(i));
    for (std::size_t j = 0; j < m; ++j) attn.row(i)[j] *= inv_sqrt_d;
    k::softmax_inplace(attn.row(i), m);
  }

  Mat mix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double* out = mix.row(i);
    std::fill(out, out + d, 0.0);
    for (std::size_t j = 0; j < m; ++j) k::axpy(attn.at(i, j), q_feat.row(j), out, d);
  }

  Mat concat(n, 2 * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(c_feat.row(i), c_feat.row(i) + d, concat.row(i));
    std::copy(mix.row(i), mix.row(i) + d, concat.row(i) + d);
  }
  Mat out(n, d);
  for (std::size_t i = 0; i < n; ++i)
    k::matvec(attn_proj.v.data(), d, 2 * d, concat.row(i), out.row(i));

  if (tape != nullptr) {
    tape->cin = c_feat;
    tape->attn = std::move(attn);
    tape->mix = std::move(mix);
    tape->concat = std::move(concat);
  }
  return out;
}

std::pair<FeatureSequence, FeatureSequence> forward_prefix(
    const Parameters& params, const ModelConfig& config,
    const TokenizedText& question, const TokenizedText& context, EncoderTape* tape) {
  config.validate();
  FeatureSequence q = embed(params, question);
  FeatureSequence c = embed(params, context);

  if (tape != nullptr) {
    tape->q_layers.assign(config.L, LayerTape{});
    tape->c_layers.assign(config.L, LayerTape{});
    tape->q_buckets.resize(q.size());
    tape->c_buckets.resize(c.size());
    for (std::size_t i = 0; i < q.size(); ++i)
      tape->q_buckets[i] = static_cast<std::uint32_t>(
          token_hash(question.tokens[i].norm) % params.vocab_size);
    for (std::size_t i = 0; i < c.size(); ++i)
      tape->c_buckets[i] = static_cast<std::uint32_t>(
          token_hash(context.tokens[i].norm) % params.vocab_size);
  }

  for (std::size_t layer = 0; layer < config.T; ++layer) {
    if (layer + 1 == config.T)
      c.feat = interaction_block(params.attn_proj, c.feat, q.feat,
                                 tape ? &tape->interaction : nullptr);
    Mat q_next = recurrent_block(params.q_layers[layer], q.feat,
                                 tape ? &tape->q_layers[layer] : nullptr);
    c.feat = recurrent_block(params.c_layers[layer], c.feat,
                             tape ? &tape->c_layers[layer] : nullptr);
    q.feat = std::move(q_next);
  }

  if (tape != nullptr) {
    tape->qT = q.feat;
    tape->cT = c.feat;
  }
  return {std::move(q), std::move(c)};
}

std::pair<FeatureSequence, FeatureSequence> forward_suffix(
    const Parameters& params, const ModelConfig& config, const FeatureSequence& q_feat,
    const FeatureSequence& c_feat, EncoderTape* tape) {
  FeatureSequence q = q_feat;
  FeatureSequence c = c_feat;
  if (tape != nullptr && tape->q_layers.size() != config.L) {
    tape->q_layers.assign(config.L, LayerTape{});
    tape->c_layers.assign(config.L, LayerTape{});
  }
  for (std::size_t layer = config.T; layer < config.L; ++layer) {
    q.feat = recurrent_block(params.q_layers[layer], q.feat,
                             tape ? &tape->q_layers[layer] : nullptr);
    c.feat = recurrent_block(params.c_layers[layer], c.feat,
                             tape ? &tape->c_layers[layer] : nullptr);
  }
  if (tape != nullptr) {
    tape->qL = q.feat;
    tape->cL = c.feat;
  }
  return {std::move(q), std::move(c)};
}

std::pair<FeatureSequence, FeatureSequence> forward_full(
    const Parameters& params, const ModelConfig& config,
    const TokenizedText& question, const TokenizedText& context, EncoderTape* tape) {
  auto [q, c] = forward_prefix(params, config, question, context, tape);
  return forward_suffix(params, config, q, c, tape);
}

}  // namespace itrc
