#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "itrc/text.hpp"

namespace itrc {

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One source article: the full multi-paragraph context a question is asked
// against. Shared by every question of the article.
struct Document {
  std::vector<TokenizedText> paragraphs;
};

struct GoldSpan {
  std::int32_t paragraph_id = 0;
  std::int32_t token_start = 0;  // within the paragraph
  std::int32_t token_end = 0;    // inclusive
  std::string answer_text;
};

struct QASample {
  std::string id;
  TokenizedText question;
  std::shared_ptr<const Document> document;
  std::vector<GoldSpan> gold_answers;
  std::optional<std::int32_t> golden_paragraph_id;
  std::int32_t article_index = 0;  // file-order index of the source article
};

struct LoadResult {
  std::vector<QASample> samples;
  std::size_t excluded_unmappable = 0;  // gold spans that fit no token span
};

// Smallest token span covering [char_start, char_end) by containment, or
// nullopt when the range touches no token.
std::optional<std::pair<std::int32_t, std::int32_t>> map_char_span(
    const TokenizedText& text, std::uint32_t char_start, std::uint32_t char_end);

// SQuAD v1.1 JSON. Throws CorpusError naming the offending record on
// malformed input; unmappable gold spans drop the sample and are counted.
LoadResult load_squad(const std::string& path);

// First n_docs articles (file order) vs the rest. Throws when n_docs
// exceeds the article count.
std::pair<std::vector<QASample>, std::vector<QASample>> split_dev(
    const std::vector<QASample>& samples, std::size_t n_docs);

// Deterministic synthetic corpus: every paragraph carries two fact
// sentences of the form "<key1> <key2> <answer...>" with a corpus-unique
// key pair, and each question embeds its key pair. Same seed, same bytes.
std::vector<QASample> synth_corpus(std::uint64_t seed, std::size_t n_docs,
                                   std::size_t paras_per_doc);

// Line-delimited cache, version header "ITRC-CORPUS-1", one JSON record per
// sample. Loading re-tokenizes and re-maps gold spans.
void save_corpus(const std::vector<QASample>& samples, const std::string& path);
LoadResult load_corpus(const std::string& path);

}  // namespace itrc
