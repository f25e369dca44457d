#include "itrc/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <sstream>

#include "itrc/mat.hpp"
#include "json.hpp"

namespace itrc {

using nlohmann::json;

std::optional<std::pair<std::int32_t, std::int32_t>> map_char_span(
    const TokenizedText& text, std::uint32_t char_start, std::uint32_t char_end) {
  std::int32_t first = -1, last = -1;
  for (std::size_t i = 0; i < text.tokens.size(); ++i) {
    const Token& t = text.tokens[i];
    if (t.char_end > char_start && t.char_start < char_end) {
      if (first < 0) first = static_cast<std::int32_t>(i);
      last = static_cast<std::int32_t>(i);
    }
  }
  if (first < 0) return std::nullopt;
  return std::make_pair(first, last);
}

namespace {

// Re-maps raw gold char ranges onto token spans; drops the sample (and
// counts it) when any range covers no token.
struct RawGold {
  std::int32_t paragraph_id;
  std::uint32_t char_start;
  std::string text;
};

bool attach_golds(QASample& sample, const std::vector<RawGold>& raw) {
  for (const RawGold& g : raw) {
    const auto& para = sample.document->paragraphs.at(static_cast<std::size_t>(g.paragraph_id));
    const auto span = map_char_span(para, g.char_start,
                                    g.char_start + static_cast<std::uint32_t>(g.text.size()));
    if (!span) return false;
    sample.gold_answers.push_back(
        GoldSpan{g.paragraph_id, span->first, span->second, g.text});
  }
  if (sample.gold_answers.empty()) return false;
  sample.golden_paragraph_id = sample.gold_answers.front().paragraph_id;
  return true;
}

}  // namespace

LoadResult load_squad(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open SQuAD file: " + path);

  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw CorpusError("malformed SQuAD JSON in " + path + ": " + e.what());
  }

  LoadResult out;
  if (!root.contains("data") || !root["data"].is_array())
    throw CorpusError("malformed SQuAD JSON in " + path + ": missing \"data\" array");

  std::int32_t article_index = 0;
  for (const json& article : root["data"]) {
    const std::string where = "article " + std::to_string(article_index);
    if (!article.contains("paragraphs") || !article["paragraphs"].is_array())
      throw CorpusError(where + ": missing \"paragraphs\"");

    auto doc = std::make_shared<Document>();
    // qas are collected per paragraph first so the document is complete
    // before samples reference it.
    struct PendingQA {
      std::string id;
      std::string question;
      std::vector<RawGold> golds;
    };
    std::vector<PendingQA> pending;

    std::int32_t para_id = 0;
    for (const json& para : article["paragraphs"]) {
      const std::string pwhere = where + " paragraph " + std::to_string(para_id);
      if (!para.contains("context") || !para["context"].is_string())
        throw CorpusError(pwhere + ": missing \"context\"");
      doc->paragraphs.push_back(tokenize(para["context"].get<std::string>()));
      for (Token& t : doc->paragraphs.back().tokens) t.paragraph_id = para_id;

      if (!para.contains("qas") || !para["qas"].is_array())
        throw CorpusError(pwhere + ": missing \"qas\"");
      for (const json& qa : para["qas"]) {
        PendingQA p;
        try {
          p.id = qa.at("id").get<std::string>();
          p.question = qa.at("question").get<std::string>();
          for (const json& ans : qa.at("answers")) {
            RawGold g;
            g.paragraph_id = para_id;
            g.char_start = ans.at("answer_start").get<std::uint32_t>();
            g.text = ans.at("text").get<std::string>();
            p.golds.push_back(std::move(g));
          }
        } catch (const json::exception& e) {
          throw CorpusError(pwhere + " qa: " + std::string(e.what()));
        }
        if (p.golds.empty()) throw CorpusError(pwhere + " qa " + p.id + ": no answers");
        pending.push_back(std::move(p));
      }
      ++para_id;
    }

    for (PendingQA& p : pending) {
      QASample s;
      s.id = std::move(p.id);
      s.question = tokenize(p.question);
      s.document = doc;
      s.article_index = article_index;
      if (attach_golds(s, p.golds))
        out.samples.push_back(std::move(s));
      else
        ++out.excluded_unmappable;
    }
    ++article_index;
  }
  return out;
}

std::pair<std::vector<QASample>, std::vector<QASample>> split_dev(
    const std::vector<QASample>& samples, std::size_t n_docs) {
  std::vector<std::int32_t> order;  // article indices by first appearance
  for (const QASample& s : samples)
    if (std::find(order.begin(), order.end(), s.article_index) == order.end())
      order.push_back(s.article_index);
  if (n_docs > order.size())
    throw CorpusError("split requests " + std::to_string(n_docs) + " documents but corpus has " +
                      std::to_string(order.size()));

  std::pair<std::vector<QASample>, std::vector<QASample>> out;
  for (const QASample& s : samples) {
    const auto rank = static_cast<std::size_t>(
        std::find(order.begin(), order.end(), s.article_index) - order.begin());
    (rank < n_docs ? out.first : out.second).push_back(s);
  }
  return out;
}

namespace {

const std::array<const char*, 48> kFiller = {
    "river",  "mountain", "green",  "old",     "system", "tower",  "garden",
    "music",  "winter",   "stone",  "light",   "market", "valley", "storm",
    "quiet",  "bridge",   "harbor", "window",  "road",   "cloud",  "forest",
    "meadow", "lamp",     "paper",  "crystal", "amber",  "silver", "copper",
    "velvet", "cedar",    "maple",  "orchid",  "falcon", "badger", "otter",
    "heron",  "willow",   "thunder", "ember",  "frost",  "dawn",   "dusk",
    "mist",   "pearl",    "coral",  "ivory",   "slate",  "ridge"};

const std::array<const char*, 24> kKeywords = {
    "kalor",  "zenith", "orbital", "quantum", "relay",  "cipher",
    "triton", "nebula", "pylon",   "vortex",  "axiom",  "beacon",
    "cobalt", "fathom", "glyph",   "helix",   "jasper", "krypton",
    "lumen",  "matrix", "nadir",   "onyx",    "prism",  "rotor"};

const std::array<const char*, 40> kAnswers = {
    "Avalon",   "Borealis",   "Cascadia", "Dorado",    "Elysium",  "Fornax",
    "Galatea",  "Hyperion",   "Icarus",   "Juno",      "Kepler",   "Lyra",
    "Meridian", "Nautilus",   "Oberon",   "Polaris",   "Quasar",   "Rigel",
    "Sirius",   "Titania",    "Umbriel",  "Vega",      "Wexford",  "Xanadu",
    "Yukon",    "Zephyr",     "Arcturus", "Betelgeuse", "Capella", "Deneb",
    "Electra",  "Fomalhaut",  "Gemma",    "Hadar",     "Izar",     "Kochab",
    "Maia",     "Naos",       "Procyon",  "Spica"};

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

}  // namespace

std::vector<QASample> synth_corpus(std::uint64_t seed, std::size_t n_docs,
                                   std::size_t paras_per_doc) {
  std::mt19937_64 gen(seed);

  // Key phrases are ordered keyword pairs, handed out sequentially from a
  // seed-shuffled keyword order so every question's phrase is unique.
  std::vector<std::string> kw(kKeywords.begin(), kKeywords.end());
  for (std::size_t i = kw.size() - 1; i > 0; --i)
    std::swap(kw[i], kw[uniform_below(gen, i + 1)]);
  std::size_t pair_counter = 0;
  const std::size_t v = kw.size();
  auto next_phrase = [&]() -> std::pair<std::string, std::string> {
    const std::size_t c = pair_counter++ % (v * (v - 1));
    const std::size_t a = c / (v - 1);
    std::size_t b = c % (v - 1);
    if (b >= a) ++b;
    return {kw[a], kw[b]};
  };

  auto filler = [&] { return std::string(kFiller[uniform_below(gen, kFiller.size())]); };

  std::vector<QASample> out;
  for (std::size_t d = 0; d < n_docs; ++d) {
    auto doc = std::make_shared<Document>();
    struct Fact {
      std::string q_id;
      std::string question;
      RawGold gold;
    };
    std::vector<Fact> facts;

    for (std::size_t p = 0; p < paras_per_doc; ++p) {
      // 5 sentences: one filler, four facts. Dense facts make the key
      // phrase, not sentence position, the only way to locate an answer.
      const std::size_t n_sentences = 5;
      const std::size_t filler_slot = uniform_below(gen, n_sentences);

      std::string para_text;
      for (std::size_t s = 0; s < n_sentences; ++s) {
        if (!para_text.empty()) para_text += ' ';
        if (s != filler_slot) {
          const auto [k1, k2] = next_phrase();
          const std::size_t ans_len = 1 + uniform_below(gen, 2);
          std::string answer(kAnswers[uniform_below(gen, kAnswers.size())]);
          for (std::size_t a = 1; a < ans_len; ++a)
            answer += ' ' + std::string(kAnswers[uniform_below(gen, kAnswers.size())]);

          std::string head = capitalize(filler());
          const std::size_t lead = 1 + uniform_below(gen, 2);
          for (std::size_t w = 0; w < lead; ++w) head += ' ' + filler();

          std::string sentence = head + ' ' + k1 + ' ' + k2 + ' ';
          const std::uint32_t ans_start =
              static_cast<std::uint32_t>(para_text.size() + sentence.size());
          sentence += answer;
          const std::size_t tail = 1 + uniform_below(gen, 2);
          for (std::size_t w = 0; w < tail; ++w) sentence += ' ' + filler();
          sentence += '.';
          para_text += sentence;

          Fact f;
          f.q_id = "synth-" + std::to_string(seed) + "-" + std::to_string(d) + "-" +
                   std::to_string(facts.size());
          f.question = "After " + k1 + " " + k2 + "?";
          f.gold = RawGold{static_cast<std::int32_t>(p), ans_start, answer};
          facts.push_back(std::move(f));
        } else {
          std::string sentence = capitalize(filler());
          const std::size_t len = 5 + uniform_below(gen, 4);
          for (std::size_t w = 0; w < len; ++w) sentence += ' ' + filler();
          sentence += '.';
          para_text += sentence;
        }
      }
      doc->paragraphs.push_back(tokenize(para_text));
      for (Token& t : doc->paragraphs.back().tokens)
        t.paragraph_id = static_cast<std::int32_t>(p);
    }

    for (Fact& f : facts) {
      QASample s;
      s.id = std::move(f.q_id);
      s.question = tokenize(f.question);
      s.document = doc;
      s.article_index = static_cast<std::int32_t>(d);
      if (!attach_golds(s, {f.gold}))
        throw CorpusError("synth fact failed to map onto tokens (generator bug)");
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {
constexpr const char* kCacheHeader = "ITRC-CORPUS-1";
}

void save_corpus(const std::vector<QASample>& samples, const std::string& path) {
  std::ofstream outf(path, std::ios::binary);
  if (!outf) throw CorpusError("cannot write corpus cache: " + path);
  outf << kCacheHeader << '\n';

  // Documents are deduplicated: a "doc" record per distinct document, then
  // a "qa" record per sample referencing it.
  std::vector<const Document*> docs;
  auto doc_index = [&](const Document* d) -> std::size_t {
    for (std::size_t i = 0; i < docs.size(); ++i)
      if (docs[i] == d) return i;
    docs.push_back(d);
    json rec;
    rec["type"] = "doc";
    rec["index"] = docs.size() - 1;
    json paras = json::array();
    for (const TokenizedText& p : d->paragraphs) paras.push_back(p.original);
    rec["paragraphs"] = std::move(paras);
    outf << rec.dump() << '\n';
    return docs.size() - 1;
  };

  for (const QASample& s : samples) {
    const std::size_t di = doc_index(s.document.get());
    json rec;
    rec["type"] = "qa";
    rec["id"] = s.id;
    rec["doc"] = di;
    rec["article"] = s.article_index;
    rec["question"] = s.question.original;
    json golds = json::array();
    for (const GoldSpan& g : s.gold_answers) {
      const auto& para = s.document->paragraphs[static_cast<std::size_t>(g.paragraph_id)];
      golds.push_back(json{
          {"para", g.paragraph_id},
          {"start", para.tokens[static_cast<std::size_t>(g.token_start)].char_start},
          {"text", g.answer_text}});
    }
    rec["golds"] = std::move(golds);
    outf << rec.dump() << '\n';
  }
  if (!outf) throw CorpusError("write failed for corpus cache: " + path);
}

LoadResult load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus cache: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCacheHeader)
    throw CorpusError(path + ": not an " + std::string(kCacheHeader) + " cache");

  LoadResult out;
  std::vector<std::shared_ptr<const Document>> docs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      const std::string type = rec.at("type").get<std::string>();
      if (type == "doc") {
        auto doc = std::make_shared<Document>();
        std::int32_t pid = 0;
        for (const json& p : rec.at("paragraphs")) {
          doc->paragraphs.push_back(tokenize(p.get<std::string>()));
          for (Token& t : doc->paragraphs.back().tokens) t.paragraph_id = pid;
          ++pid;
        }
        if (rec.at("index").get<std::size_t>() != docs.size())
          throw CorpusError(path + ":" + std::to_string(line_no) + ": doc records out of order");
        docs.push_back(std::move(doc));
      } else if (type == "qa") {
        QASample s;
        s.id = rec.at("id").get<std::string>();
        s.article_index = rec.at("article").get<std::int32_t>();
        s.question = tokenize(rec.at("question").get<std::string>());
        const std::size_t di = rec.at("doc").get<std::size_t>();
        if (di >= docs.size())
          throw CorpusError(path + ":" + std::to_string(line_no) + ": qa references unknown doc");
        s.document = docs[di];
        std::vector<RawGold> raw;
        for (const json& g : rec.at("golds"))
          raw.push_back(RawGold{g.at("para").get<std::int32_t>(),
                                g.at("start").get<std::uint32_t>(),
                                g.at("text").get<std::string>()});
        if (attach_golds(s, raw))
          out.samples.push_back(std::move(s));
        else
          ++out.excluded_unmappable;
      } else {
        throw CorpusError(path + ":" + std::to_string(line_no) + ": unknown record type");
      }
    } catch (const json::exception& e) {
      throw CorpusError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace itrc
