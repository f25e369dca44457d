#include <algorithm>
#include <random>
#include <vector>

#include "doctest.h"
#include "itrc/kernels.hpp"
#include "itrc/mat.hpp"
#include "itrc/spanner.hpp"

using namespace itrc;

namespace {

SpanDistribution make_dist(const VecD& start, const VecD& end) {
  SpanDistribution d;
  d.start = start;
  d.end = end;
  d.start_logits.assign(start.size(), 0.0);
  d.end_logits.assign(end.size(), 0.0);
  for (std::size_t i = 0; i < start.size(); ++i) d.start_logits[i] = std::log(start[i]);
  for (std::size_t i = 0; i < end.size(); ++i) d.end_logits[i] = std::log(end[i]);
  d.positions.resize(start.size());
  for (std::size_t i = 0; i < start.size(); ++i) d.positions[i] = static_cast<std::int32_t>(i);
  return d;
}

// Independent oracle: enumerate every (b, e) pair, filter by the validity
// predicate, pick by explicit (score, -b, -e) ordering.
struct OracleSpan {
  std::size_t b, e;
  double score;
};

std::vector<OracleSpan> oracle_all_valid(const VecD& start, const VecD& end,
                                         std::size_t l_max) {
  std::vector<OracleSpan> out;
  for (std::size_t b = 0; b < start.size(); ++b)
    for (std::size_t e = 0; e < end.size(); ++e)
      if (b <= e && e - b < l_max) out.push_back({b, e, start[b] * end[e]});
  std::sort(out.begin(), out.end(), [](const OracleSpan& x, const OracleSpan& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.b != y.b) return x.b < y.b;
    return x.e < y.e;
  });
  return out;
}

VecD random_simplex(std::mt19937_64& gen, std::size_t n) {
  VecD v(n);
  double sum = 0.0;
  for (double& x : v) {
    x = uniform01(gen) + 1e-9;
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

}  // namespace

TEST_CASE("decode matches the worked example") {
  const auto dist = make_dist({0.7, 0.2, 0.1}, {0.1, 0.6, 0.3});
  const SpanScore s = decode_span(dist, 2);
  CHECK(s.b == 0);
  CHECK(s.e == 1);
  CHECK(s.score == doctest::Approx(0.42));
}

TEST_CASE("l_max 1 collapses to the best single token") {
  const auto dist = make_dist({0.5, 0.3, 0.2}, {0.1, 0.2, 0.7});
  const SpanScore s = decode_span(dist, 1);
  // single-token scores: 0.05, 0.06, 0.14
  CHECK(s.b == 2);
  CHECK(s.e == 2);
  CHECK(s.score == doctest::Approx(0.14));
}

TEST_CASE("exact ties resolve to the lexicographically smaller span") {
  const auto dist = make_dist({0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25});
  const SpanScore s = decode_span(dist, 4);
  CHECK(s.b == 0);
  CHECK(s.e == 0);
}

TEST_CASE("top-k matches the worked example") {
  const auto dist = make_dist({0.7, 0.2, 0.1}, {0.1, 0.6, 0.3});
  const auto top = top_k_candidates(dist, 2, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].b == 0);
  CHECK(top[0].e == 1);
  CHECK(top[0].score == doctest::Approx(0.42));
  CHECK(top[1].b == 1);
  CHECK(top[1].e == 1);
  CHECK(top[1].score == doctest::Approx(0.12));
}

TEST_CASE("top-k clamps to the number of valid spans") {
  const auto dist = make_dist({0.6, 0.4}, {0.5, 0.5});
  const auto top = top_k_candidates(dist, 100, 2);
  CHECK(top.size() == 3);  // (0,0) (0,1) (1,1)
}

TEST_CASE("k=1 equals decode_span") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + uniform_below(gen, 12);
    const std::size_t l_max = 1 + uniform_below(gen, n);
    const auto dist = make_dist(random_simplex(gen, n), random_simplex(gen, n));
    const auto top = top_k_candidates(dist, 1, l_max);
    const SpanScore d = decode_span(dist, l_max);
    REQUIRE(top.size() == 1);
    CHECK(top[0].b == d.b);
    CHECK(top[0].e == d.e);
    CHECK(top[0].score == d.score);
  }
}

TEST_CASE("decode and top-k agree with the enumeration oracle on random inputs") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + uniform_below(gen, 30);
    const std::size_t l_max = 1 + uniform_below(gen, n);
    const VecD start = random_simplex(gen, n);
    const VecD end = random_simplex(gen, n);
    const auto dist = make_dist(start, end);

    const auto oracle = oracle_all_valid(start, end, l_max);
    const SpanScore got = decode_span(dist, l_max);
    REQUIRE(!oracle.empty());
    CHECK(static_cast<std::size_t>(got.b) == oracle[0].b);
    CHECK(static_cast<std::size_t>(got.e) == oracle[0].e);
    CHECK(got.score == oracle[0].score);

    const std::size_t k = 1 + uniform_below(gen, 8);
    const auto top = top_k_candidates(dist, k, l_max);
    REQUIRE(top.size() == std::min(k, oracle.size()));
    for (std::size_t i = 0; i < top.size(); ++i) {
      CHECK(static_cast<std::size_t>(top[i].b) == oracle[i].b);
      CHECK(static_cast<std::size_t>(top[i].e) == oracle[i].e);
    }
    // sorted and unique
    for (std::size_t i = 1; i < top.size(); ++i) {
      CHECK(top[i - 1].score >= top[i].score);
      CHECK((top[i - 1].b != top[i].b || top[i - 1].e != top[i].e));
    }
  }
}

TEST_CASE("monotone transforms of start logits keep the argmax start") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + uniform_below(gen, 10);
    VecD logits(n);
    for (double& x : logits) x = 4.0 * (uniform01(gen) - 0.5);
    VecD p = logits, p2 = logits;
    for (double& x : p2) x = 3.0 * x + 1.0;  // strictly increasing transform
    kernels::softmax_inplace(p.data(), n);
    kernels::softmax_inplace(p2.data(), n);
    const auto argmax = [](const VecD& v) {
      return std::max_element(v.begin(), v.end()) - v.begin();
    };
    CHECK(argmax(p) == argmax(p2));
  }
}

TEST_CASE("positions metadata maps local rows to original indices") {
  auto dist = make_dist({0.1, 0.8, 0.1}, {0.1, 0.8, 0.1});
  dist.positions = {4, 9, 17};
  const SpanScore s = decode_span(dist, 2);
  CHECK(s.b == 9);
  CHECK(s.e == 9);
}

TEST_CASE("shared-norm over one paragraph is bit-identical to decode_span") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + uniform_below(gen, 15);
    SpanDistribution d;
    d.start_logits.resize(n);
    d.end_logits.resize(n);
    for (double& x : d.start_logits) x = 6.0 * (uniform01(gen) - 0.5);
    for (double& x : d.end_logits) x = 6.0 * (uniform01(gen) - 0.5);
    d.start = d.start_logits;
    d.end = d.end_logits;
    kernels::softmax_inplace(d.start.data(), n);
    kernels::softmax_inplace(d.end.data(), n);
    d.positions.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.positions[i] = static_cast<std::int32_t>(i);

    const std::size_t l_max = 1 + uniform_below(gen, n);
    const SpanScore plain = decode_span(d, l_max);
    const DocSpan shared = shared_norm_decode(std::vector<SpanDistribution>{d}, l_max);
    CHECK(shared.paragraph == 0);
    CHECK(shared.span.b == plain.b);
    CHECK(shared.span.e == plain.e);
    CHECK(shared.span.score == plain.score);  // bit-identical
  }
}

TEST_CASE("a dominating paragraph always wins shared-norm") {
  SpanDistribution lo, hi;
  lo.start_logits = {0.0, 0.1};
  lo.end_logits = {0.0, 0.1};
  hi.start_logits = {100.0, 99.0};
  hi.end_logits = {100.0, 99.0};
  for (SpanDistribution* d : {&lo, &hi}) {
    d->positions = {0, 1};
    d->start = d->start_logits;
    d->end = d->end_logits;
    kernels::softmax_inplace(d->start.data(), 2);
    kernels::softmax_inplace(d->end.data(), 2);
  }
  const DocSpan best = shared_norm_decode(std::vector<SpanDistribution>{lo, hi}, 2);
  CHECK(best.paragraph == 1);
}

TEST_CASE("all-equal logits tie-break by paragraph then span") {
  SpanDistribution a, b;
  for (SpanDistribution* d : {&a, &b}) {
    d->start_logits = {1.0, 1.0};
    d->end_logits = {1.0, 1.0};
    d->positions = {0, 1};
    d->start = {0.5, 0.5};
    d->end = {0.5, 0.5};
  }
  // 6 valid spans across 2 paragraphs of 2 tokens; all score equally
  const DocSpan best = shared_norm_decode(std::vector<SpanDistribution>{a, b}, 2);
  CHECK(best.paragraph == 0);
  CHECK(best.span.b == 0);
  CHECK(best.span.e == 0);
}

TEST_CASE("empty paragraphs are rejected") {
  CHECK_THROWS(shared_norm_decode(std::vector<SpanDistribution>{}, 2));
  SpanDistribution empty;
  CHECK_THROWS(shared_norm_decode(std::vector<SpanDistribution>{empty}, 2));
}

namespace {

HeadParams random_head(OutputVariant variant, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto fill = [&](VecD& v, std::size_t n) {
    v.resize(n);
    for (double& x : v) x = 2.0 * uniform01(gen) - 1.0;
  };
  HeadParams h;
  if (variant == OutputVariant::independent) {
    fill(h.ws, d);
    fill(h.we, d);
  } else {
    fill(h.wq, d);
    h.W1 = Mat(d, d);
    fill(h.W1.v, d * d);
    h.Wu = Mat(d, 2 * d);
    fill(h.Wu.v, 2 * d * d);
    h.W2 = Mat(d, d);
    fill(h.W2.v, d * d);
  }
  return h;
}

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Mat m(r, c);
  for (double& x : m.v) x = 2.0 * uniform01(gen) - 1.0;
  return m;
}

}  // namespace

TEST_CASE("independent head: single-token context is certain") {
  const auto head = random_head(OutputVariant::independent, 6, 1);
  const auto dist = output_independent(head, random_mat(1, 6, 2), {});
  CHECK(dist.start == VecD{1.0});
  CHECK(dist.end == VecD{1.0});
}

TEST_CASE("independent head: zero weights give uniform distributions") {
  HeadParams head;
  head.ws.assign(6, 0.0);
  head.we.assign(6, 0.0);
  const auto dist = output_independent(head, random_mat(4, 6, 3), {});
  for (double p : dist.start) CHECK(p == doctest::Approx(0.25));
  for (double p : dist.end) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("independent head: shifting logits leaves probabilities unchanged") {
  const auto head = random_head(OutputVariant::independent, 6, 4);
  const Mat c = random_mat(5, 6, 5);
  auto base = output_independent(head, c, {});
  VecD shifted = base.start_logits;
  for (double& x : shifted) x += 5.0;
  kernels::softmax_inplace(shifted.data(), shifted.size());
  for (std::size_t i = 0; i < shifted.size(); ++i)
    CHECK(shifted[i] == doctest::Approx(base.start[i]).epsilon(1e-12));
}

TEST_CASE("conditional head: distributions are normalized and end reacts to start") {
  const std::size_t d = 8;
  const auto head = random_head(OutputVariant::conditional, d, 6);
  const Mat q = random_mat(3, d, 7);
  const Mat c = random_mat(3, d, 8);
  const auto dist = output_conditional(head, q, c, {});
  double ssum = 0.0, esum = 0.0;
  for (double p : dist.start) ssum += p;
  for (double p : dist.end) esum += p;
  CHECK(ssum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(esum == doctest::Approx(1.0).epsilon(1e-6));

  // Same context features, different start distribution (via a different
  // W1) must move the end distribution: the summary update feeds on the
  // expected start vector.
  auto head2 = head;
  for (double& x : head2.W1.v) x = -x;
  const auto dist2 = output_conditional(head2, q, c, {});
  REQUIRE(dist2.start != dist.start);
  CHECK(dist2.end != dist.end);
}

TEST_CASE("conditional head: single-token question and context") {
  const auto head = random_head(OutputVariant::conditional, 4, 9);
  const auto dist = output_conditional(head, random_mat(1, 4, 10), random_mat(1, 4, 11), {});
  CHECK(dist.start == VecD{1.0});
  CHECK(dist.end == VecD{1.0});
}

TEST_CASE("heads reject empty inputs") {
  const auto head = random_head(OutputVariant::conditional, 4, 12);
  const Mat empty(0, 4);
  const Mat some = random_mat(2, 4, 13);
  CHECK_THROWS(output_conditional(head, empty, some, {}));
  CHECK_THROWS(output_conditional(head, some, empty, {}));
  const auto ihead = random_head(OutputVariant::independent, 4, 14);
  CHECK_THROWS(output_independent(ihead, empty, {}));
}
