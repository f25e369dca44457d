#include "itrc/training.hpp"

#include <cmath>
#include <random>

#include "itrc/encoder.hpp"
#include "itrc/kernels.hpp"
#include "itrc/spanner.hpp"
#include "itrc/triage.hpp"

namespace itrc {

namespace k = kernels;

namespace {

// grad_m += x (outer) y, m is rows x cols row-major, x has rows entries.
void add_outer(Mat& grad_m, const double* x, const double* y) {
  for (std::size_t r = 0; r < grad_m.rows; ++r)
    k::axpy(x[r], y, grad_m.row(r), grad_m.cols);
}

// y += m^T x, m is rows x cols; x has rows entries, y has cols.
void matvec_t_acc(const Mat& m, const double* x, double* y) {
  for (std::size_t r = 0; r < m.rows; ++r) k::axpy(x[r], m.row(r), y, m.cols);
}

// Softmax Jacobian-transpose product: dlogits = p * (dp - <p, dp>).
void softmax_backward(const VecD& p, const VecD& dp, VecD& dlogits) {
  const double inner = k::dot(p.data(), dp.data(), p.size());
  dlogits.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dlogits[i] = p[i] * (dp[i] - inner);
}

struct GoldTarget {
  const TokenizedText* context;
  std::size_t b, e;
};

GoldTarget training_target(const QASample& sample) {
  if (!sample.golden_paragraph_id)
    throw TrainingError("sample " + sample.id + ": no golden paragraph");
  const auto pid = static_cast<std::size_t>(*sample.golden_paragraph_id);
  const GoldSpan* gold = nullptr;
  for (const GoldSpan& g : sample.gold_answers)
    if (g.paragraph_id == *sample.golden_paragraph_id) {
      gold = &g;
      break;
    }
  if (gold == nullptr)
    throw TrainingError("sample " + sample.id + ": no gold span in golden paragraph");
  const TokenizedText& context = sample.document->paragraphs.at(pid);
  if (gold->token_start < 0 || gold->token_end < gold->token_start ||
      static_cast<std::size_t>(gold->token_end) >= context.tokens.size())
    throw TrainingError("sample " + sample.id + ": gold span out of range");
  return {&context, static_cast<std::size_t>(gold->token_start),
          static_cast<std::size_t>(gold->token_end)};
}

double head_nll(const SpanDistribution& dist, std::size_t b, std::size_t e) {
  return -std::log(dist.start[b]) - std::log(dist.end[e]);
}

// Backward through one output head. Accumulates parameter gradients into
// ghead and feature gradients into dq/dc. For the independent variant dq is
// untouched.
void head_backward(const HeadParams& head, OutputVariant variant, const Mat& q_feat,
                   const Mat& c_feat, const SpanDistribution& dist, const HeadTape& tape,
                   std::size_t gold_b, std::size_t gold_e, HeadParams& ghead, Mat& dq,
                   Mat& dc) {
  const std::size_t n = c_feat.rows;
  const std::size_t d = c_feat.cols;

  // d(NLL)/dlogits for a softmax-NLL pair is p - onehot.
  VecD dsl(dist.start);
  VecD del(dist.end);
  del[gold_e] -= 1.0;

  if (variant == OutputVariant::independent) {
    dsl[gold_b] -= 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      k::axpy(dsl[i], c_feat.row(i), ghead.ws.data(), d);
      k::axpy(del[i], c_feat.row(i), ghead.we.data(), d);
      k::axpy(dsl[i], head.ws.data(), dc.row(i), d);
      k::axpy(del[i], head.we.data(), dc.row(i), d);
    }
    return;
  }

  // conditional variant
  const std::size_t m = q_feat.rows;
  VecD dqtilde(d, 0.0);

  // end branch
  VecD du2(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    k::axpy(del[i], c_feat.row(i), du2.data(), d);
    k::axpy(del[i], tape.u2.data(), dc.row(i), d);
  }
  add_outer(ghead.W2, du2.data(), tape.qprime.data());
  VecD dqprime(d, 0.0);
  matvec_t_acc(head.W2, du2.data(), dqprime.data());
  VecD dz(d);
  for (std::size_t j = 0; j < d; ++j)
    dz[j] = dqprime[j] * (1.0 - tape.qprime[j] * tape.qprime[j]);
  VecD qv(2 * d);
  std::copy(tape.qtilde.begin(), tape.qtilde.end(), qv.begin());
  std::copy(tape.v.begin(), tape.v.end(), qv.begin() + static_cast<std::ptrdiff_t>(d));
  add_outer(ghead.Wu, dz.data(), qv.data());
  VecD dqv(2 * d, 0.0);
  matvec_t_acc(head.Wu, dz.data(), dqv.data());
  for (std::size_t j = 0; j < d; ++j) dqtilde[j] += dqv[j];
  const double* dv = dqv.data() + d;

  // v = sum_i start[i] c_i feeds the end branch, so the end loss reaches
  // the start probabilities too.
  VecD dstart(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    dstart[i] = k::dot(c_feat.row(i), dv, d);
    k::axpy(dist.start[i], dv, dc.row(i), d);
  }
  dstart[gold_b] += -1.0 / dist.start[gold_b];
  softmax_backward(dist.start, dstart, dsl);

  VecD du1(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    k::axpy(dsl[i], c_feat.row(i), du1.data(), d);
    k::axpy(dsl[i], tape.u1.data(), dc.row(i), d);
  }
  add_outer(ghead.W1, du1.data(), tape.qtilde.data());
  matvec_t_acc(head.W1, du1.data(), dqtilde.data());

  // qtilde = sum_j alpha_j q_j
  VecD dalpha(m);
  for (std::size_t j = 0; j < m; ++j) {
    dalpha[j] = k::dot(q_feat.row(j), dqtilde.data(), d);
    k::axpy(tape.alpha[j], dqtilde.data(), dq.row(j), d);
  }
  VecD dalpha_pre;
  softmax_backward(tape.alpha, dalpha, dalpha_pre);
  for (std::size_t j = 0; j < m; ++j) {
    k::axpy(dalpha_pre[j], q_feat.row(j), ghead.wq.data(), d);
    k::axpy(dalpha_pre[j], head.wq.data(), dq.row(j), d);
  }
}

// Backward through one recurrent direction; returns nothing but accumulates
// into dx and the direction gradients.
void direction_backward(const RecurrentDir& p, const DirTape& tape, const Mat& x,
                        bool reverse, const Mat& dh, RecurrentDir& gp, Mat& dx) {
  const std::size_t n = x.rows, d = x.cols;
  if (n == 0) return;

  VecD carry(d, 0.0);  // dc flowing to the earlier-processed timestep
  VecD dct(d), df(d), dg(d), dpre(d), dr(d);

  // iterate in reverse of the forward processing order
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? step : n - 1 - step;
    const double* ht = dh.row(t);
    const double* ft = tape.f.row(t);
    const double* rt = tape.r.row(t);
    const double* gt = tape.g.row(t);
    const double* tct = tape.tc.row(t);
    const double* xt = x.row(t);

    // h_t = r_t*tanh(c_t) + (1-r_t)*x_t
    for (std::size_t j = 0; j < d; ++j) {
      dr[j] = ht[j] * (tct[j] - xt[j]);
      dct[j] = ht[j] * rt[j] * (1.0 - tct[j] * tct[j]) + carry[j];
      dx.row(t)[j] += ht[j] * (1.0 - rt[j]);
    }

    // c_t = f_t*c_prev + (1-f_t)*g_t
    const bool has_prev = reverse ? (t + 1 < n) : (t > 0);
    const double* cprev = nullptr;
    if (has_prev) cprev = reverse ? tape.c.row(t + 1) : tape.c.row(t - 1);
    for (std::size_t j = 0; j < d; ++j) {
      const double cp = has_prev ? cprev[j] : 0.0;
      df[j] = dct[j] * (cp - gt[j]);
      dg[j] = dct[j] * (1.0 - ft[j]);
      carry[j] = dct[j] * ft[j];
    }

    // gates
    for (std::size_t j = 0; j < d; ++j) dpre[j] = df[j] * ft[j] * (1.0 - ft[j]);
    add_outer(gp.Wf, dpre.data(), xt);
    for (std::size_t j = 0; j < d; ++j) gp.bf[j] += dpre[j];
    matvec_t_acc(p.Wf, dpre.data(), dx.row(t));

    for (std::size_t j = 0; j < d; ++j) dpre[j] = dr[j] * rt[j] * (1.0 - rt[j]);
    add_outer(gp.Wr, dpre.data(), xt);
    for (std::size_t j = 0; j < d; ++j) gp.br[j] += dpre[j];
    matvec_t_acc(p.Wr, dpre.data(), dx.row(t));

    add_outer(gp.W, dg.data(), xt);
    matvec_t_acc(p.W, dg.data(), dx.row(t));
  }
}

// Backward through a full bidirectional block. Returns the gradient w.r.t.
// the block input.
Mat block_backward(const RecurrentLayer& layer, const LayerTape& tape, const Mat& dy,
                   RecurrentLayer& glayer) {
  const std::size_t n = tape.x.rows, d = tape.x.cols;

  Mat dconcat(n, 2 * d);
  for (std::size_t t = 0; t < n; ++t) {
    add_outer(glayer.proj, dy.row(t), tape.concat.row(t));
    matvec_t_acc(layer.proj, dy.row(t), dconcat.row(t));  // dconcat_t = proj^T dy_t
  }

  Mat dhf(n, d), dhb(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    std::copy(dconcat.row(t), dconcat.row(t) + d, dhf.row(t));
    std::copy(dconcat.row(t) + d, dconcat.row(t) + 2 * d, dhb.row(t));
  }

  Mat dx(n, d);
  direction_backward(layer.fwd, tape.fwd, tape.x, false, dhf, glayer.fwd, dx);
  direction_backward(layer.bwd, tape.bwd, tape.x, true, dhb, glayer.bwd, dx);
  return dx;
}

// Backward through the interaction block: splits the incoming gradient into
// the pre-interaction context and a question contribution.
std::pair<Mat, Mat> interaction_backward(const Mat& attn_proj, const InteractionTape& tape,
                                         const Mat& q_feat, const Mat& dout,
                                         Mat& gattn_proj) {
  const std::size_t n = tape.cin.rows, d = tape.cin.cols, m = q_feat.rows;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Mat dcin(n, d), dq(m, d);
  VecD dconcat(2 * d), dattn_row(m), dscore_row;
  for (std::size_t t = 0; t < n; ++t) {
    add_outer(gattn_proj, dout.row(t), tape.concat.row(t));
    std::fill(dconcat.begin(), dconcat.end(), 0.0);
    matvec_t_acc(attn_proj, dout.row(t), dconcat.data());
    // first half: direct context passthrough
    for (std::size_t j = 0; j < d; ++j) dcin.row(t)[j] += dconcat[j];
    const double* dmix = dconcat.data() + d;

    // mix_t = sum_j attn[t][j] q_j
    for (std::size_t j = 0; j < m; ++j) {
      dattn_row[j] = k::dot(q_feat.row(j), dmix, d);
      k::axpy(tape.attn.at(t, j), dmix, dq.row(j), d);
    }
    VecD arow(tape.attn.row(t), tape.attn.row(t) + m);
    softmax_backward(arow, dattn_row, dscore_row);
    // scores = (C Q^T) / sqrt(d)
    for (std::size_t j = 0; j < m; ++j) {
      const double w = dscore_row[j] * inv_sqrt_d;
      k::axpy(w, q_feat.row(j), dcin.row(t), d);
      k::axpy(w, tape.cin.row(t), dq.row(j), d);
    }
  }
  return {std::move(dcin), std::move(dq)};
}

}  // namespace

LossReport joint_loss(const Parameters& params, const ModelConfig& config,
                      const QASample& sample) {
  const GoldTarget target = training_target(sample);

  EncoderTape tape;
  forward_full(params, config, sample.question, *target.context, &tape);

  const HeadParams& tri_head = config.weight_sharing ? params.model_head : params.tri_head;
  const SpanDistribution tri =
      run_head(tri_head, config.variant, tape.qT, tape.cT, {});
  const SpanDistribution model =
      run_head(params.model_head, config.variant, tape.qL, tape.cL, {});

  LossReport report;
  report.nll_tri = head_nll(tri, target.b, target.e);
  report.nll_model = head_nll(model, target.b, target.e);
  report.total = report.nll_tri + report.nll_model;
  return report;
}

LossReport grad(const Parameters& params, const ModelConfig& config,
                const QASample& sample, Parameters& grad_out) {
  const GoldTarget target = training_target(sample);

  EncoderTape tape;
  forward_full(params, config, sample.question, *target.context, &tape);

  const HeadParams& tri_head = config.weight_sharing ? params.model_head : params.tri_head;
  HeadParams& tri_grad = config.weight_sharing ? grad_out.model_head : grad_out.tri_head;
  HeadTape tri_tape, model_tape;
  const SpanDistribution tri =
      run_head(tri_head, config.variant, tape.qT, tape.cT, {}, &tri_tape);
  const SpanDistribution model =
      run_head(params.model_head, config.variant, tape.qL, tape.cL, {}, &model_tape);

  LossReport report;
  report.nll_tri = head_nll(tri, target.b, target.e);
  report.nll_model = head_nll(model, target.b, target.e);
  report.total = report.nll_tri + report.nll_model;

  const std::size_t n = tape.cL.rows, m = tape.qL.rows, d = config.d;

  // model head feeds layer-L features
  Mat dqL(m, d), dcL(n, d);
  head_backward(params.model_head, config.variant, tape.qL, tape.cL, model, model_tape,
                target.b, target.e, grad_out.model_head, dqL, dcL);

  // suffix layers L-1 .. T (0-based)
  Mat dq = std::move(dqL), dc = std::move(dcL);
  for (std::size_t layer = config.L; layer-- > config.T;) {
    dq = block_backward(params.q_layers[layer], tape.q_layers[layer], dq,
                        grad_out.q_layers[layer]);
    dc = block_backward(params.c_layers[layer], tape.c_layers[layer], dc,
                        grad_out.c_layers[layer]);
  }

  // triage head feeds layer-T features
  head_backward(tri_head, config.variant, tape.qT, tape.cT, tri, tri_tape, target.b,
                target.e, tri_grad, dq, dc);

  // prefix layers T-1 .. 0, with the interaction block before layer T-1's
  // context recurrence
  for (std::size_t layer = config.T; layer-- > 0;) {
    dq = block_backward(params.q_layers[layer], tape.q_layers[layer], dq,
                        grad_out.q_layers[layer]);
    dc = block_backward(params.c_layers[layer], tape.c_layers[layer], dc,
                        grad_out.c_layers[layer]);
    if (layer + 1 == config.T) {
      // dc is now the gradient w.r.t. the interaction output; the block
      // consumed the same-level question features Q^{T-1}.
      auto [dcin, dq_inter] = interaction_backward(params.attn_proj, tape.interaction,
                                                   tape.q_layers[layer].x, dc,
                                                   grad_out.attn_proj);
      dc = std::move(dcin);
      for (std::size_t j = 0; j < dq.rows; ++j)
        k::axpy(1.0, dq_inter.row(j), dq.row(j), d);
    }
  }

  // embeddings
  for (std::size_t i = 0; i < tape.q_buckets.size(); ++i)
    k::axpy(1.0, dq.row(i), grad_out.embedding.row(tape.q_buckets[i]), d);
  for (std::size_t i = 0; i < tape.c_buckets.size(); ++i)
    k::axpy(1.0, dc.row(i), grad_out.embedding.row(tape.c_buckets[i]), d);

  return report;
}

Parameters train(Parameters params, const ModelConfig& config,
                 const std::vector<QASample>& corpus, std::size_t epochs,
                 double step_size, std::vector<LossReport>* epoch_trace) {
  std::mt19937_64 order_gen(config.seed);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_below(order_gen, i)]);

    LossReport mean;
    for (const std::size_t idx : order) {
      Parameters g = params.zeros_like();
      const LossReport loss = grad(params, config, corpus[idx], g);
      if (!std::isfinite(loss.total))
        throw TrainingError("non-finite loss at sample " + corpus[idx].id + " (epoch " +
                            std::to_string(epoch) + ")");
      params.axpy_inplace(-step_size, g);
      mean.nll_tri += loss.nll_tri;
      mean.nll_model += loss.nll_model;
      mean.total += loss.total;
    }
    if (!corpus.empty()) {
      const double inv = 1.0 / static_cast<double>(corpus.size());
      mean.nll_tri *= inv;
      mean.nll_model *= inv;
      mean.total *= inv;
    }
    if (epoch_trace != nullptr) epoch_trace->push_back(mean);
  }
  return params;
}

}  // namespace itrc
