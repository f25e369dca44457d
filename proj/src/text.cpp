#include "itrc/text.hpp"

namespace itrc {

namespace {

bool is_ws(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_punct(unsigned char c) {
  if (c >= 0x80) return false;
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }

std::string lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// True when the char stream after a terminator ends the sentence: either
// nothing but whitespace remains, or at least one whitespace char is
// followed by an uppercase letter.
bool sentence_break_after(const std::string& text, std::size_t pos) {
  const std::size_t n = text.size();
  if (pos >= n) return true;
  if (!is_ws(static_cast<unsigned char>(text[pos]))) return false;
  while (pos < n && is_ws(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos >= n) return true;
  return is_upper(static_cast<unsigned char>(text[pos]));
}

}  // namespace

TokenizedText tokenize(const std::string& text) {
  TokenizedText out;
  out.original = text;

  std::int32_t sentence = 0;
  const std::size_t n = text.size();

  auto emit = [&](std::size_t b, std::size_t e) {
    Token t;
    t.surface = text.substr(b, e - b);
    t.norm = lower_ascii(t.surface);
    t.char_start = static_cast<std::uint32_t>(b);
    t.char_end = static_cast<std::uint32_t>(e);
    t.sentence_id = sentence;
    out.tokens.push_back(std::move(t));
    const char c = text[b];
    if (e - b == 1 && (c == '.' || c == '!' || c == '?') &&
        sentence_break_after(text, e))
      ++sentence;
  };

  std::size_t i = 0;
  while (i < n) {
    while (i < n && is_ws(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !is_ws(static_cast<unsigned char>(text[j]))) ++j;

    std::size_t core_b = i, core_e = j;
    while (core_b < core_e && is_punct(static_cast<unsigned char>(text[core_b]))) ++core_b;
    while (core_e > core_b && is_punct(static_cast<unsigned char>(text[core_e - 1]))) --core_e;

    for (std::size_t k = i; k < core_b; ++k) emit(k, k + 1);
    if (core_b < core_e) emit(core_b, core_e);
    for (std::size_t k = core_e; k < j; ++k) emit(k, k + 1);

    i = j;
  }

  for (std::size_t t = 0; t < out.tokens.size(); ++t) {
    const std::int32_t sid = out.tokens[t].sentence_id;
    if (out.sentence_spans.empty() ||
        out.tokens[static_cast<std::size_t>(out.sentence_spans.back().first)].sentence_id != sid)
      out.sentence_spans.emplace_back(static_cast<std::int32_t>(t),
                                      static_cast<std::int32_t>(t));
    else
      out.sentence_spans.back().second = static_cast<std::int32_t>(t);
  }

  // Sentence ids are made dense so span index == sentence_id.
  for (std::size_t s = 0; s < out.sentence_spans.size(); ++s)
    for (std::int32_t t = out.sentence_spans[s].first; t <= out.sentence_spans[s].second; ++t)
      out.tokens[static_cast<std::size_t>(t)].sentence_id = static_cast<std::int32_t>(s);

  return out;
}

}  // namespace itrc
