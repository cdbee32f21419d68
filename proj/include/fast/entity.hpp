#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fast/error.hpp"
#include "fast/text.hpp"

namespace fast {

/// Entity mention over document tokens [token_start, token_end) inside one sentence.
struct EntityMention {
  std::size_t sentence_idx = 0;
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::string surface;
  std::string normalized;
  std::optional<std::string> ner_type;

  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

/// Lowercase, strip leading/trailing punctuation, collapse internal whitespace.
inline std::string normalize(std::string_view surface) {
  std::size_t b = 0;
  std::size_t e = surface.size();
  while (b < e && (detail::is_punct(surface[b]) || detail::is_space(surface[b]))) ++b;
  while (e > b && (detail::is_punct(surface[e - 1]) || detail::is_space(surface[e - 1]))) --e;
  std::string out;
  bool pending_space = false;
  for (std::size_t i = b; i < e; ++i) {
    const char c = surface[i];
    if (detail::is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

namespace detail {

inline std::set<std::string> word_set(const std::string& normalized) {
  std::set<std::string> words;
  std::istringstream in(normalized);
  for (std::string w; in >> w;) words.insert(w);
  return words;
}

inline bool is_capitalized(const std::string& token) {
  return !token.empty() && std::isupper(static_cast<unsigned char>(token.front())) != 0;
}

inline EntityMention make_mention(const Document& doc, std::size_t sentence, std::size_t begin,
                                  std::size_t end, std::optional<std::string> type = {}) {
  EntityMention m;
  m.sentence_idx = sentence;
  m.token_start = begin;
  m.token_end = end;
  const std::size_t cs = doc.tokens[begin].char_start;
  m.surface = doc.raw_text.substr(cs, doc.tokens[end - 1].char_end - cs);
  m.normalized = normalize(m.surface);
  m.ner_type = std::move(type);
  return m;
}

}  // namespace detail

/// 1.0 for equal normalized forms, otherwise Jaccard overlap of their word sets.
inline double literal_similarity(const EntityMention& a, const EntityMention& b) {
  if (a.normalized == b.normalized) return 1.0;
  const auto wa = detail::word_set(a.normalized);
  const auto wb = detail::word_set(b.normalized);
  std::size_t inter = 0;
  for (const auto& w : wa) inter += wb.count(w);
  const std::size_t uni = wa.size() + wb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Capitalized-run rule: maximal runs of capitalized tokens, except that a run
/// starting the sentence needs at least two tokens.
inline std::vector<EntityMention> extract_rule_based(const Document& doc) {
  std::vector<EntityMention> out;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const SentenceSpan span = doc.sentences[s];
    std::size_t t = span.token_start;
    while (t < span.token_end) {
      if (!detail::is_capitalized(doc.tokens[t].text)) {
        ++t;
        continue;
      }
      std::size_t end = t + 1;
      while (end < span.token_end && detail::is_capitalized(doc.tokens[end].text)) ++end;
      const bool initial = t == span.token_start;
      if (!initial || end - t >= 2) {
        EntityMention m = detail::make_mention(doc, s, t, end);
        if (!m.normalized.empty()) out.push_back(std::move(m));
      }
      t = end;
    }
  }
  return out;
}

/// Converts char-span annotations into token-aligned mentions.
inline std::vector<EntityMention> mentions_from_annotations(const Document& doc,
                                                            const std::vector<EntityAnnotation>& anns) {
  std::vector<EntityMention> out;
  for (const auto& a : anns) {
    auto fail = [&](const std::string& why) {
      return Error("document " + doc.id + ": entity [" + std::to_string(a.char_start) + "," +
                   std::to_string(a.char_end) + ") " + why);
    };
    if (a.sentence >= doc.sentences.size()) throw fail("references missing sentence " + std::to_string(a.sentence));
    auto first = std::find_if(doc.tokens.begin(), doc.tokens.end(),
                              [&](const Token& t) { return t.char_start == a.char_start; });
    auto last = std::find_if(doc.tokens.begin(), doc.tokens.end(),
                             [&](const Token& t) { return t.char_end == a.char_end; });
    if (first == doc.tokens.end() || last == doc.tokens.end() || last < first) {
      throw fail("is not aligned to token boundaries");
    }
    const std::size_t begin = static_cast<std::size_t>(first - doc.tokens.begin());
    const std::size_t end = static_cast<std::size_t>(last - doc.tokens.begin()) + 1;
    const SentenceSpan& span = doc.sentences[a.sentence];
    if (begin < span.token_start || end > span.token_end) {
      throw fail("lies outside sentence " + std::to_string(a.sentence));
    }
    EntityMention m = detail::make_mention(doc, a.sentence, begin, end,
                                           a.type.empty() ? std::nullopt : std::optional<std::string>(a.type));
    if (!m.normalized.empty()) out.push_back(std::move(m));
  }
  return out;
}

/// Annotations win when present; otherwise the capitalized-run rule applies.
/// Mentions with an empty normalized form are dropped. Sorted by (sentence, start).
inline std::vector<EntityMention> extract_entities(const Document& doc) {
  std::vector<EntityMention> out =
      doc.entity_annotations ? mentions_from_annotations(doc, *doc.entity_annotations) : extract_rule_based(doc);
  std::stable_sort(out.begin(), out.end(), [](const EntityMention& a, const EntityMention& b) {
    return std::tie(a.sentence_idx, a.token_start) < std::tie(b.sentence_idx, b.token_start);
  });
  return out;
}

}  // namespace fast
