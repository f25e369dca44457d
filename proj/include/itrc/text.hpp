#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace itrc {

struct Token {
  std::string surface;
  std::string norm;            // lowercased surface
  std::uint32_t char_start = 0;  // byte offset into the original text
  std::uint32_t char_end = 0;    // exclusive
  std::int32_t sentence_id = 0;
  std::int32_t paragraph_id = 0;
};

// first/last token index per sentence, inclusive on both ends.
using SentenceSpan = std::pair<std::int32_t, std::int32_t>;

struct TokenizedText {
  std::string original;
  std::vector<Token> tokens;
  std::vector<SentenceSpan> sentence_spans;

  std::size_t size() const { return tokens.size(); }
};

// Rule-based tokenizer: split on whitespace, then peel leading/trailing
// punctuation into separate tokens. A sentence ends after ".", "!" or "?"
// when the next non-space character is uppercase or the text ends there.
// Lowercasing is ASCII-only; non-ASCII bytes pass through unchanged.
TokenizedText tokenize(const std::string& text);

}  // namespace itrc
