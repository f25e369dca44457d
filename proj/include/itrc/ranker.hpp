#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "itrc/text.hpp"

namespace itrc {

// TF-IDF cosine-similarity paragraph pre-screening.
// tf is the raw term count, idf = ln((1+N)/(1+df)) + 1, vectors L2-normed.
struct TfidfIndex {
  std::unordered_map<std::string, std::int32_t> vocabulary;  // term -> column
  std::vector<double> idf;
  // one sparse vector per paragraph, (column, weight) sorted by column
  std::vector<std::vector<std::pair<std::int32_t, double>>> paragraph_vectors;
};

TfidfIndex build_index(const std::vector<TokenizedText>& paragraphs);

// Paragraph ids by descending cosine similarity to the question, ties by
// ascending id; returns min(k, N) ids.
std::vector<std::int32_t> rank_paragraphs(const TfidfIndex& index,
                                          const TokenizedText& question,
                                          std::size_t k);

}  // namespace itrc
