#include <cmath>

#include "doctest.h"
#include "itrc/ranker.hpp"
#include "itrc/text.hpp"

using namespace itrc;

TEST_CASE("single paragraph tf-idf weights are hand-checkable") {
  // "a a b": tf(a)=2, tf(b)=1, idf identical for both, vector ~ (2,1)/sqrt(5)
  const auto index = build_index({tokenize("a a b")});
  REQUIRE(index.paragraph_vectors.size() == 1);
  const auto& vec = index.paragraph_vectors[0];
  REQUIRE(vec.size() == 2);
  const double idf = std::log(2.0 / 2.0) + 1.0;
  CHECK(index.idf[0] == doctest::Approx(idf));
  CHECK(index.idf[1] == doctest::Approx(idf));
  CHECK(vec[0].second == doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(vec[1].second == doctest::Approx(1.0 / std::sqrt(5.0)));
}

TEST_CASE("identical paragraphs get identical vectors") {
  const auto index = build_index({tokenize("green tower light"), tokenize("green tower light")});
  CHECK(index.paragraph_vectors[0] == index.paragraph_vectors[1]);
}

TEST_CASE("empty paragraph is a zero vector") {
  const auto index = build_index({tokenize("words here"), tokenize("")});
  CHECK(index.paragraph_vectors[1].empty());
}

TEST_CASE("the paragraph sharing all question terms ranks first") {
  const auto index = build_index({tokenize("river mountain road"),
                                  tokenize("storm cloud harbor"),
                                  tokenize("quantum relay cipher")});
  const auto ids = rank_paragraphs(index, tokenize("quantum relay cipher"), 3);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == 2);
}

TEST_CASE("no overlap means id-order ties") {
  const auto index = build_index({tokenize("river road"), tokenize("storm cloud"),
                                  tokenize("lamp paper")});
  const auto ids = rank_paragraphs(index, tokenize("zeppelin"), 3);
  CHECK(ids == std::vector<std::int32_t>{0, 1, 2});
}

TEST_CASE("k larger than N clamps") {
  const auto index = build_index({tokenize("one"), tokenize("two")});
  CHECK(rank_paragraphs(index, tokenize("one"), 10).size() == 2);
}

TEST_CASE("duplicating every question token leaves the ranking unchanged") {
  const auto index = build_index({tokenize("river mountain road green"),
                                  tokenize("storm harbor road"),
                                  tokenize("quantum relay")});
  const auto a = rank_paragraphs(index, tokenize("road green storm"), 3);
  const auto b = rank_paragraphs(index, tokenize("road green storm road green storm"), 3);
  CHECK(a == b);
}

TEST_CASE("a question equal to a paragraph retrieves it weakly first") {
  const std::vector<TokenizedText> paras = {tokenize("river mountain green old"),
                                            tokenize("storm cloud harbor window"),
                                            tokenize("quantum relay cipher pylon")};
  const auto index = build_index(paras);
  for (std::size_t p = 0; p < paras.size(); ++p) {
    const auto ids = rank_paragraphs(index, paras[p], paras.size());
    CHECK(ids[0] == static_cast<std::int32_t>(p));
  }
}

TEST_CASE("output ids are distinct and in range") {
  const auto index = build_index({tokenize("a b c"), tokenize("b c d"), tokenize("c d e"),
                                  tokenize("x y z")});
  const auto ids = rank_paragraphs(index, tokenize("c d"), 4);
  REQUIRE(ids.size() == 4);
  std::vector<bool> seen(4, false);
  for (const std::int32_t id : ids) {
    REQUIRE(id >= 0);
    REQUIRE(id < 4);
    CHECK_FALSE(seen[static_cast<std::size_t>(id)]);
    seen[static_cast<std::size_t>(id)] = true;
  }
}
