#include <cmath>
#include <random>

#include "doctest.h"
#include "itrc/evalbench.hpp"
#include "itrc/mat.hpp"
#include "itrc/training.hpp"
#include "itrc/triage.hpp"

using namespace itrc;

TEST_CASE("normalization applies the four rules") {
  CHECK(normalize_answer("The Cat!") == "cat");
  CHECK(normalize_answer("a an the") == "");
  CHECK(normalize_answer("42") == "42");
  CHECK(normalize_answer("  An   Old   Harbor. ") == "old harbor");
  CHECK(normalize_answer("state-of-the-art") == "stateoftheart");
}

TEST_CASE("em_f1 worked examples") {
  {
    const auto [em, f1] = em_f1("the cat", {"cat"});
    CHECK(em == 1);
    CHECK(f1 == 1.0);
  }
  {
    const auto [em, f1] = em_f1("black cat", {"cat"});
    CHECK(em == 0);
    CHECK(f1 == doctest::Approx(2.0 / 3.0));
  }
  {
    const auto [em, f1] = em_f1("Kepler Lyra", {"Kepler Lyra"});
    CHECK(em == 1);
    CHECK(f1 == 1.0);
  }
}

TEST_CASE("em_f1 edge cases and invariances") {
  {
    // prediction normalizes to empty, gold does not
    const auto [em, f1] = em_f1("the", {"cat"});
    CHECK(em == 0);
    CHECK(f1 == 0.0);
  }
  {
    // both normalize to empty
    const auto [em, f1] = em_f1("a", {"the"});
    CHECK(em == 1);
    CHECK(f1 == 1.0);
  }
  {
    // gold order and duplicates do not matter
    const auto a = em_f1("north gate", {"north", "north gate", "north"});
    const auto b = em_f1("north gate", {"north gate", "north"});
    CHECK(a == b);
  }
}

TEST_CASE("EM=1 implies F1=1 on fuzzed inputs") {
  std::mt19937_64 gen(123);
  const char* words[] = {"river", "the", "Kepler", "42", "a-b", "storm!", "an"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const std::size_t len = 1 + uniform_below(gen, 5);
    for (std::size_t i = 0; i < len; ++i) {
      if (!s.empty()) s += ' ';
      s += words[uniform_below(gen, 7)];
    }
    std::string gold = s;
    if (uniform_below(gen, 2) == 0) gold = "The " + gold;  // same after normalization
    const auto [em, f1] = em_f1(s, {gold});
    if (em == 1) CHECK(f1 == 1.0);
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);
  }
}

TEST_CASE("nearest-rank percentiles") {
  std::vector<double> v = {5.0, 1.0, 4.0, 2.0, 3.0};
  CHECK(percentile_nearest_rank(v, 50.0) == 3.0);   // ceil(2.5) = 3rd
  CHECK(percentile_nearest_rank(v, 90.0) == 5.0);   // ceil(4.5) = 5th
  CHECK(percentile_nearest_rank(v, 99.0) == 5.0);
  CHECK(percentile_nearest_rank(v, 100.0) == 5.0);
  CHECK(percentile_nearest_rank({7.0}, 1.0) == 7.0);
}

namespace {

ModelConfig eval_config() {
  ModelConfig c;
  c.d = 8;
  c.L = 3;
  c.T = 1;
  c.l_max = 4;
  c.K = 3;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("empty dataset yields an empty report") {
  const ModelConfig c = eval_config();
  const Parameters p = init_params(c, 64);
  const EvalReport r = evaluate(p, c, {}, EvalOptions{});
  CHECK(r.n == 0);
  CHECK_FALSE(r.em.has_value());
  CHECK_FALSE(r.latency_mean_ms.has_value());
  const std::string json = r.to_json();
  CHECK(json.find("\"em\": null") != std::string::npos);
}

TEST_CASE("disabled mechanisms: t=inf with huge K prunes nothing and never exits") {
  ModelConfig c = eval_config();
  c.t = std::numeric_limits<double>::infinity();
  c.K = 1000000;
  const Parameters p = init_params(c, 256);
  const auto corpus = synth_corpus(8, 2, 2);
  EvalOptions opt;
  opt.n_paragraphs = 2;
  opt.latency_runs = 0;
  const EvalReport r = evaluate(p, c, corpus, opt);
  CHECK(r.exit_rate == 0.0);
  CHECK(r.pruned_portion == 0.0);
}

TEST_CASE("t=0 exits every sample") {
  ModelConfig c = eval_config();
  c.t = 0.0;
  const Parameters p = init_params(c, 256);
  const auto corpus = synth_corpus(8, 2, 2);
  EvalOptions opt;
  opt.n_paragraphs = 2;
  opt.latency_runs = 0;
  const EvalReport r = evaluate(p, c, corpus, opt);
  CHECK(r.exit_rate == 100.0);
  CHECK(r.pruned_portion == 100.0);
  CHECK_FALSE(r.pruned_portion_nonexit.has_value());
}

TEST_CASE("t=inf with huge K matches the untriaged pipeline in EM and F1") {
  ModelConfig c = eval_config();
  c.t = std::numeric_limits<double>::infinity();
  c.K = 1000000;
  const Parameters p = init_params(c, 256);
  const auto corpus = synth_corpus(12, 2, 3);
  EvalOptions opt;
  opt.n_paragraphs = 3;
  opt.latency_runs = 0;
  const EvalReport a = evaluate(p, c, corpus, opt);
  EvalOptions no_triage = opt;
  no_triage.no_triage = true;
  const EvalReport b = evaluate(p, c, corpus, no_triage);
  CHECK(*a.em == *b.em);
  CHECK(*a.f1 == *b.f1);
}

TEST_CASE("latency fields are ordered and reproducible in shape") {
  ModelConfig c = eval_config();
  c.t = std::numeric_limits<double>::infinity();
  const Parameters p = init_params(c, 128);
  const auto corpus = synth_corpus(3, 1, 2);
  EvalOptions opt;
  opt.n_paragraphs = 2;
  opt.latency_runs = 2;
  const EvalReport r = evaluate(p, c, corpus, opt);
  REQUIRE(r.latency_mean_ms.has_value());
  REQUIRE(r.latency_p90_ms.has_value());
  REQUIRE(r.latency_p99_ms.has_value());
  REQUIRE(r.latency_std_over_runs_ms.has_value());
  CHECK(*r.latency_p90_ms <= *r.latency_p99_ms);
  CHECK(*r.latency_mean_ms > 0.0);
}

TEST_CASE("accuracy results do not depend on the worker count") {
  ModelConfig c = eval_config();
  c.t = 0.3;
  const Parameters p = init_params(c, 256);
  const auto corpus = synth_corpus(21, 2, 2);
  EvalOptions opt;
  opt.n_paragraphs = 2;
  opt.latency_runs = 0;
  const EvalReport serial = evaluate(p, c, corpus, opt);
  opt.jobs = 3;
  const EvalReport parallel = evaluate(p, c, corpus, opt);
  CHECK(*serial.em == *parallel.em);
  CHECK(*serial.f1 == *parallel.f1);
  CHECK(*serial.exit_rate == *parallel.exit_rate);
  CHECK(*serial.pruned_portion == *parallel.pruned_portion);
}

TEST_CASE("confidence profile: perfect triage answers give a flat 100 profile") {
  ModelConfig c = eval_config();
  const Parameters p = init_params(c, 64);
  // single-token golden paragraphs: the triage answer is always the gold
  std::vector<QASample> samples;
  const char* words[] = {"kepler", "lyra", "vega", "rigel"};
  for (int i = 0; i < 4; ++i) {
    auto doc = std::make_shared<Document>();
    doc->paragraphs.push_back(tokenize(words[i]));
    QASample s;
    s.id = "p" + std::to_string(i);
    s.question = tokenize("which name is this");
    s.document = doc;
    s.golden_paragraph_id = 0;
    s.gold_answers.push_back(GoldSpan{0, 0, 0, words[i]});
    samples.push_back(std::move(s));
  }
  const auto profile = confidence_profile(p, c, samples, {25.0, 50.0, 100.0});
  REQUIRE(profile.size() == 3);
  for (const auto& [pct, f1] : profile) CHECK(f1 == 100.0);
}

TEST_CASE("the 100% bucket equals the overall triage F1") {
  ModelConfig c = eval_config();
  const Parameters p = init_params(c, 256);
  const auto corpus = synth_corpus(31, 2, 2);
  const auto profile = confidence_profile(p, c, corpus, {100.0});
  REQUIRE(profile.size() == 1);

  // overall triage F1 by hand: mean per-sample triage-answer F1
  double f1_sum = 0.0;
  for (const QASample& s : corpus) {
    const auto pid = static_cast<std::size_t>(*s.golden_paragraph_id);
    const auto& para = s.document->paragraphs[pid];
    auto [qT, cT] = forward_prefix(p, c, s.question, para);
    const auto dist = triage_answer(p, c, qT, cT);
    const SpanScore best = decode_span(dist, c.l_max);
    const Token& tb = para.tokens[static_cast<std::size_t>(best.b)];
    const Token& te = para.tokens[static_cast<std::size_t>(best.e)];
    std::vector<std::string> golds;
    for (const GoldSpan& g : s.gold_answers) golds.push_back(g.answer_text);
    f1_sum += em_f1(para.original.substr(tb.char_start, te.char_end - tb.char_start), golds)
                  .second;
  }
  CHECK(profile[0].second ==
        doctest::Approx(100.0 * f1_sum / static_cast<double>(corpus.size())));
}

TEST_CASE("t_sweep trains per T, sorts rows, and deeper triage holds up") {
  ModelConfig base = eval_config();
  base.d = 32;
  base.L = 3;
  base.seed = 3;
  const auto corpus = synth_corpus(2, 6, 2);
  const auto train_set = std::vector<QASample>(corpus.begin(), corpus.begin() + 16);
  const auto eval_set = std::vector<QASample>(corpus.begin() + 16, corpus.end());

  const auto rows = t_sweep(base, 512, train_set, eval_set, {2, 1}, 40, 0.05);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].T == 1);
  CHECK(rows[1].T == 2);
  CHECK(rows[1].triage_f1 >= rows[0].triage_f1);  // deeper features help (ties allowed)

  const auto single = t_sweep(base, 512, train_set, eval_set, {1}, 1, 0.05);
  CHECK(single.size() == 1);
}
