#include "itrc/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace itrc {

TfidfIndex build_index(const std::vector<TokenizedText>& paragraphs) {
  if (paragraphs.empty()) throw std::invalid_argument("build_index: no paragraphs");

  TfidfIndex index;
  // Column ids follow first-appearance order across paragraphs.
  std::vector<std::int32_t> df;
  std::vector<std::map<std::int32_t, std::int32_t>> tf(paragraphs.size());

  for (std::size_t p = 0; p < paragraphs.size(); ++p) {
    for (const Token& t : paragraphs[p].tokens) {
      auto [it, inserted] = index.vocabulary.try_emplace(
          t.norm, static_cast<std::int32_t>(index.vocabulary.size()));
      if (inserted) df.push_back(0);
      auto [tf_it, first_in_para] = tf[p].try_emplace(it->second, 0);
      if (first_in_para) ++df[static_cast<std::size_t>(it->second)];
      ++tf_it->second;
    }
  }

  const double n = static_cast<double>(paragraphs.size());
  index.idf.resize(df.size());
  for (std::size_t c = 0; c < df.size(); ++c)
    index.idf[c] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[c]))) + 1.0;

  index.paragraph_vectors.resize(paragraphs.size());
  for (std::size_t p = 0; p < paragraphs.size(); ++p) {
    auto& vec = index.paragraph_vectors[p];
    double norm_sq = 0.0;
    for (const auto& [col, count] : tf[p]) {
      const double w = static_cast<double>(count) * index.idf[static_cast<std::size_t>(col)];
      vec.emplace_back(col, w);
      norm_sq += w * w;
    }
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (auto& [col, w] : vec) w *= inv;
    }
  }
  return index;
}

std::vector<std::int32_t> rank_paragraphs(const TfidfIndex& index,
                                          const TokenizedText& question,
                                          std::size_t k) {
  if (k == 0) throw std::invalid_argument("rank_paragraphs: k must be >= 1");

  std::map<std::int32_t, std::int32_t> tf;
  for (const Token& t : question.tokens) {
    const auto it = index.vocabulary.find(t.norm);
    if (it != index.vocabulary.end()) ++tf[it->second];
  }
  std::vector<std::pair<std::int32_t, double>> qvec;
  double norm_sq = 0.0;
  for (const auto& [col, count] : tf) {
    const double w = static_cast<double>(count) * index.idf[static_cast<std::size_t>(col)];
    qvec.emplace_back(col, w);
    norm_sq += w * w;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [col, w] : qvec) w *= inv;
  }

  const std::size_t n = index.paragraph_vectors.size();
  std::vector<std::pair<double, std::int32_t>> scored(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& pv = index.paragraph_vectors[p];
    double dotv = 0.0;
    std::size_t a = 0, b = 0;
    while (a < qvec.size() && b < pv.size()) {
      if (qvec[a].first == pv[b].first)
        dotv += qvec[a++].second * pv[b++].second;
      else if (qvec[a].first < pv[b].first)
        ++a;
      else
        ++b;
    }
    scored[p] = {dotv, static_cast<std::int32_t>(p)};
  }

  std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });

  std::vector<std::int32_t> ids;
  ids.reserve(std::min(k, n));
  for (std::size_t i = 0; i < std::min(k, n); ++i) ids.push_back(scored[i].second);
  return ids;
}

}  // namespace itrc
