#include "itrc/spanner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "itrc/kernels.hpp"

namespace itrc {

namespace k = kernels;

namespace {

VecD softmaxed(const VecD& logits) {
  VecD p = logits;
  k::softmax_inplace(p.data(), p.size());
  return p;
}

std::vector<std::int32_t> identity_or_copy(std::span<const std::int32_t> positions,
                                           std::size_t n) {
  if (!positions.empty()) return {positions.begin(), positions.end()};
  std::vector<std::int32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int32_t>(i);
  return ids;
}

}  // namespace

SpanDistribution output_independent(const HeadParams& head, const Mat& c_feat,
                                    std::span<const std::int32_t> positions,
                                    HeadTape*) {
  if (c_feat.rows == 0) throw std::invalid_argument("output layer: empty context");
  const std::size_t n = c_feat.rows;

  SpanDistribution dist;
  dist.positions = identity_or_copy(positions, n);
  dist.start_logits.resize(n);
  dist.end_logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist.start_logits[i] = k::dot(c_feat.row(i), head.ws.data(), c_feat.cols);
    dist.end_logits[i] = k::dot(c_feat.row(i), head.we.data(), c_feat.cols);
  }
  dist.start = softmaxed(dist.start_logits);
  dist.end = softmaxed(dist.end_logits);
  return dist;
}

SpanDistribution output_conditional(const HeadParams& head, const Mat& q_feat,
                                    const Mat& c_feat,
                                    std::span<const std::int32_t> positions,
                                    HeadTape* tape) {
  if (q_feat.rows == 0) throw std::invalid_argument("output layer: empty question");
  if (c_feat.rows == 0) throw std::invalid_argument("output layer: empty context");
  const std::size_t n = c_feat.rows;
  const std::size_t m = q_feat.rows;
  const std::size_t d = c_feat.cols;

  // question summary
  VecD alpha(m);
  for (std::size_t j = 0; j < m; ++j) alpha[j] = k::dot(q_feat.row(j), head.wq.data(), d);
  k::softmax_inplace(alpha.data(), m);
  VecD qtilde(d, 0.0);
  for (std::size_t j = 0; j < m; ++j) k::axpy(alpha[j], q_feat.row(j), qtilde.data(), d);

  SpanDistribution dist;
  dist.positions = identity_or_copy(positions, n);

  VecD u1(d);
  k::matvec(head.W1.v.data(), d, d, qtilde.data(), u1.data());
  dist.start_logits.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    dist.start_logits[i] = k::dot(c_feat.row(i), u1.data(), d);
  dist.start = softmaxed(dist.start_logits);

  // expected start context vector, then the updated summary
  VecD v(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) k::axpy(dist.start[i], c_feat.row(i), v.data(), d);
  VecD qv(2 * d);
  std::copy(qtilde.begin(), qtilde.end(), qv.begin());
  std::copy(v.begin(), v.end(), qv.begin() + static_cast<std::ptrdiff_t>(d));
  VecD z(d), qprime(d);
  k::matvec(head.Wu.v.data(), d, 2 * d, qv.data(), z.data());
  k::tanh(z.data(), qprime.data(), d);

  VecD u2(d);
  k::matvec(head.W2.v.data(), d, d, qprime.data(), u2.data());
  dist.end_logits.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    dist.end_logits[i] = k::dot(c_feat.row(i), u2.data(), d);
  dist.end = softmaxed(dist.end_logits);

  if (tape != nullptr) {
    tape->alpha = std::move(alpha);
    tape->qtilde = std::move(qtilde);
    tape->u1 = std::move(u1);
    tape->v = std::move(v);
    tape->qprime = std::move(qprime);
    tape->u2 = std::move(u2);
  }
  return dist;
}

SpanDistribution run_head(const HeadParams& head, OutputVariant variant,
                          const Mat& q_feat, const Mat& c_feat,
                          std::span<const std::int32_t> positions, HeadTape* tape) {
  if (variant == OutputVariant::independent)
    return output_independent(head, c_feat, positions, tape);
  return output_conditional(head, q_feat, c_feat, positions, tape);
}

SpanScore decode_span(const SpanDistribution& dist, std::size_t l_max) {
  if (l_max < 1) throw std::invalid_argument("decode_span: l_max must be >= 1");
  const std::size_t n = dist.start.size();
  if (n == 0) throw std::invalid_argument("decode_span: empty distribution");

  std::size_t best_b = 0, best_e = 0;
  double best = -1.0;
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t e_hi = std::min(n - 1, b + l_max - 1);
    for (std::size_t e = b; e <= e_hi; ++e) {
      const double s = dist.start[b] * dist.end[e];
      if (s > best) {
        best = s;
        best_b = b;
        best_e = e;
      }
    }
  }
  return SpanScore{dist.positions[best_b], dist.positions[best_e], best};
}

std::vector<SpanScore> top_k_candidates(const SpanDistribution& dist, std::size_t K,
                                        std::size_t l_max) {
  if (K < 1) throw std::invalid_argument("top_k_candidates: K must be >= 1");
  const std::size_t n = dist.start.size();

  struct Local {
    std::size_t b, e;
    double score;
  };
  std::vector<Local> all;
  all.reserve(n * std::min(l_max, n));
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t e_hi = std::min(n - 1, b + l_max - 1);
    for (std::size_t e = b; e <= e_hi; ++e)
      all.push_back({b, e, dist.start[b] * dist.end[e]});
  }
  auto better = [](const Local& x, const Local& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.b != y.b) return x.b < y.b;
    return x.e < y.e;
  };
  const std::size_t keep = std::min(K, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep),
                    all.end(), better);

  std::vector<SpanScore> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i)
    out.push_back(SpanScore{dist.positions[all[i].b], dist.positions[all[i].e],
                            all[i].score});
  return out;
}

DocSpan shared_norm_decode(std::span<const SpanDistribution> dists, std::size_t l_max) {
  std::size_t total = 0;
  for (const SpanDistribution& d : dists) total += d.start_logits.size();
  if (total == 0) throw std::invalid_argument("shared_norm_decode: all paragraphs empty");

  // Joint softmax across the union of positions, same max/exp/sum/divide
  // sequence as softmax_inplace so the single-paragraph case is bit-equal.
  auto joint = [&](auto logits_of) {
    double m = -std::numeric_limits<double>::infinity();
    for (const SpanDistribution& d : dists) {
      const VecD& l = logits_of(d);
      if (!l.empty()) m = std::max(m, k::reduce_max(l.data(), l.size()));
    }
    std::vector<VecD> probs(dists.size());
    double sum = 0.0;
    for (std::size_t p = 0; p < dists.size(); ++p) {
      const VecD& l = logits_of(dists[p]);
      probs[p].resize(l.size());
      for (std::size_t i = 0; i < l.size(); ++i) probs[p][i] = std::exp(l[i] - m);
      if (!probs[p].empty()) sum += k::reduce_sum(probs[p].data(), probs[p].size());
    }
    for (VecD& pv : probs)
      for (double& x : pv) x /= sum;
    return probs;
  };
  auto start_probs = joint([](const SpanDistribution& d) -> const VecD& { return d.start_logits; });
  auto end_probs = joint([](const SpanDistribution& d) -> const VecD& { return d.end_logits; });

  DocSpan best;
  double best_score = -1.0;
  for (std::size_t p = 0; p < dists.size(); ++p) {
    const std::size_t n = start_probs[p].size();
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t e_hi = std::min(n != 0 ? n - 1 : 0, b + l_max - 1);
      for (std::size_t e = b; e <= e_hi && e < n; ++e) {
        const double s = start_probs[p][b] * end_probs[p][e];
        if (s > best_score) {
          best_score = s;
          best.paragraph = p;
          best.span = SpanScore{dists[p].positions[b], dists[p].positions[e], s};
        }
      }
    }
  }
  return best;
}

}  // namespace itrc
