#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fast/error.hpp"

namespace fast {

/// A token with byte offsets [char_start, char_end) into the raw text.
struct Token {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Token range [token_start, token_end).
struct SentenceSpan {
  std::size_t token_start = 0;
  std::size_t token_end = 0;

  std::size_t size() const { return token_end - token_start; }
  friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

enum class Label { Human = 0, Machine = 1 };

inline std::string to_string(Label label) { return label == Label::Human ? "human" : "machine"; }

inline Label parse_label(const std::string& s) {
  if (s == "human") return Label::Human;
  if (s == "machine") return Label::Machine;
  throw Error("unknown label '" + s + "'");
}

/// Externally supplied entity span, in byte offsets.
struct EntityAnnotation {
  std::size_t sentence = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string type;

  friend bool operator==(const EntityAnnotation&, const EntityAnnotation&) = default;
};

struct Document {
  std::string id;
  std::string raw_text;
  std::vector<Token> tokens;
  std::vector<SentenceSpan> sentences;
  std::optional<Label> label;
  std::map<std::string, std::string> meta;
  std::optional<std::vector<EntityAnnotation>> entity_annotations;

  std::string meta_or(const std::string& key, const std::string& fallback = "") const {
    auto it = meta.find(key);
    return it == meta.end() ? fallback : it->second;
  }
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
inline bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline constexpr std::array<std::string_view, 9> kAbbreviations = {
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "u.s.", "etc."};

inline bool is_known_abbreviation(std::string_view token) {
  const std::string lower = ascii_lower(token);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

/// "U.S.", "e.g.": two or more single letters each followed by a period.
inline bool is_letter_period_alternation(std::string_view token) {
  if (token.size() < 4 || token.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < token.size(); i += 2) {
    if (!is_alpha(token[i]) || token[i + 1] != '.') return false;
  }
  return true;
}

/// Splits a run of punctuation bytes into tokens: consecutive terminators
/// stay together ("...", "?!"), every other punctuation byte stands alone.
inline void emit_punct_run(std::string_view text, std::size_t begin, std::size_t end,
                           std::vector<Token>& out) {
  std::size_t i = begin;
  while (i < end) {
    std::size_t j = i + 1;
    if (is_terminator(text[i])) {
      while (j < end && is_terminator(text[j])) ++j;
    }
    out.push_back(Token{std::string(text.substr(i, j - i)), i, j});
    i = j;
  }
}

}  // namespace detail

/// Whitespace split with leading/trailing punctuation detached. Abbreviations
/// ("U.S.", "Dr.") keep their trailing period. Offsets are byte offsets.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && detail::is_space(text[pos])) ++pos;
    if (pos >= text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && !detail::is_space(text[end])) ++end;

    std::size_t core_begin = pos;
    while (core_begin < end && detail::is_punct(text[core_begin])) ++core_begin;
    std::size_t core_end = end;
    while (core_end > core_begin && detail::is_punct(text[core_end - 1])) --core_end;

    if (core_begin == core_end) {
      detail::emit_punct_run(text, pos, end, out);
    } else {
      detail::emit_punct_run(text, pos, core_begin, out);
      if (core_end < end && text[core_end] == '.') {
        const std::string_view with_period = text.substr(core_begin, core_end + 1 - core_begin);
        if (detail::is_known_abbreviation(with_period) ||
            detail::is_letter_period_alternation(with_period)) {
          ++core_end;
        }
      }
      out.push_back(Token{std::string(text.substr(core_begin, core_end - core_begin)), core_begin,
                          core_end});
      detail::emit_punct_run(text, core_end, end, out);
    }
    pos = end;
  }
  return out;
}

/// Sentence boundary after a token made only of '.', '!' or '?'. Closing
/// quotes and brackets that follow a terminator stay with its sentence.
inline std::vector<SentenceSpan> segment_sentences(const std::vector<Token>& tokens) {
  std::vector<SentenceSpan> spans;
  auto is_term = [](const std::string& t) {
    return !t.empty() && std::all_of(t.begin(), t.end(), detail::is_terminator);
  };
  auto is_closer = [](const std::string& t) {
    return t == "\"" || t == "'" || t == ")" || t == "]" || t == "}";
  };
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (is_term(tokens[i].text)) {
      std::size_t end = i + 1;
      while (end < tokens.size() && is_closer(tokens[end].text)) ++end;
      spans.push_back({start, end});
      start = end;
      i = end;
    } else {
      ++i;
    }
  }
  if (start < tokens.size()) spans.push_back({start, tokens.size()});
  return spans;
}

/// Overload matching the ingestion contract; raw text is not consulted by the rule.
inline std::vector<SentenceSpan> segment_sentences(const std::vector<Token>& tokens,
                                                   std::string_view /*raw_text*/) {
  return segment_sentences(tokens);
}

/// Builds a document from raw text using the built-in tokenizer and segmenter.
inline Document make_document(std::string id, std::string text, std::optional<Label> label = {},
                              std::map<std::string, std::string> meta = {}) {
  Document doc;
  doc.id = std::move(id);
  doc.raw_text = std::move(text);
  doc.tokens = tokenize(doc.raw_text);
  doc.sentences = segment_sentences(doc.tokens);
  doc.label = label;
  doc.meta = std::move(meta);
  return doc;
}

namespace detail {

using SpanList = std::vector<std::pair<std::size_t, std::size_t>>;

inline SpanList read_spans(const nlohmann::json& arr, const char* field) {
  SpanList spans;
  if (!arr.is_array()) throw Error(std::string("\"") + field + "\" must be an array");
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2) {
      throw Error(std::string("\"") + field + "\" entries must be [char_start, char_end] pairs");
    }
    spans.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
  }
  return spans;
}

/// Maps char-span sentences onto token ranges; every token must fall inside exactly one span.
inline std::vector<SentenceSpan> sentences_from_char_spans(const std::vector<Token>& tokens,
                                                           const SpanList& spans) {
  std::vector<SentenceSpan> out;
  std::size_t t = 0;
  for (const auto& [cs, ce] : spans) {
    if (cs >= ce) throw Error("sentence span [" + std::to_string(cs) + "," + std::to_string(ce) + ") is empty");
    const std::size_t begin = t;
    while (t < tokens.size() && tokens[t].char_start >= cs && tokens[t].char_end <= ce) ++t;
    if (t == begin) {
      throw Error("sentence span [" + std::to_string(cs) + "," + std::to_string(ce) +
                  ") covers no tokens in order");
    }
    out.push_back({begin, t});
  }
  if (t != tokens.size()) {
    throw Error("sentence spans leave token " + std::to_string(t) + " uncovered");
  }
  return out;
}

inline std::vector<Token> tokens_from_char_spans(const std::string& text, const SpanList& spans) {
  std::vector<Token> tokens;
  for (const auto& [cs, ce] : spans) {
    if (cs >= ce || ce > text.size()) {
      throw Error("token span [" + std::to_string(cs) + "," + std::to_string(ce) + ") is invalid");
    }
    if (!tokens.empty() && cs < tokens.back().char_end) throw Error("token spans overlap or are unsorted");
    tokens.push_back(Token{text.substr(cs, ce - cs), cs, ce});
  }
  return tokens;
}

}  // namespace detail

/// Parses one JSONL record. Field layout:
///   required "id", "text"; optional "label" ("human"|"machine"), "meta" (string map),
///   "tokens" and "sentences" ([char_start, char_end] pairs), "entities"
///   ([{"sentence", "char_start", "char_end", "type"}]).
inline Document parse_document(const nlohmann::json& rec) {
  if (!rec.is_object()) throw Error("record is not a JSON object");
  if (!rec.contains("id") || !rec["id"].is_string()) throw Error("missing string field \"id\"");
  if (!rec.contains("text") || !rec["text"].is_string()) throw Error("missing string field \"text\"");
  Document doc;
  doc.id = rec["id"].get<std::string>();
  doc.raw_text = rec["text"].get<std::string>();
  if (rec.contains("label") && !rec["label"].is_null()) {
    if (!rec["label"].is_string()) throw Error("\"label\" must be a string");
    doc.label = parse_label(rec["label"].get<std::string>());
  }
  if (rec.contains("meta")) {
    if (!rec["meta"].is_object()) throw Error("\"meta\" must be an object");
    for (const auto& [k, v] : rec["meta"].items()) {
      if (!v.is_string()) throw Error("meta value for \"" + k + "\" must be a string");
      doc.meta[k] = v.get<std::string>();
    }
  }
  doc.tokens = rec.contains("tokens")
                   ? detail::tokens_from_char_spans(doc.raw_text, detail::read_spans(rec["tokens"], "tokens"))
                   : tokenize(doc.raw_text);
  doc.sentences = rec.contains("sentences")
                      ? detail::sentences_from_char_spans(doc.tokens,
                                                          detail::read_spans(rec["sentences"], "sentences"))
                      : segment_sentences(doc.tokens);
  if (rec.contains("entities")) {
    if (!rec["entities"].is_array()) throw Error("\"entities\" must be an array");
    std::vector<EntityAnnotation> anns;
    for (const auto& e : rec["entities"]) {
      EntityAnnotation a;
      a.sentence = e.at("sentence").get<std::size_t>();
      a.char_start = e.at("char_start").get<std::size_t>();
      a.char_end = e.at("char_end").get<std::size_t>();
      a.type = e.value("type", "");
      anns.push_back(std::move(a));
    }
    doc.entity_annotations = std::move(anns);
  }
  return doc;
}

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json rec = {{"id", doc.id}, {"text", doc.raw_text}};
  if (doc.label) rec["label"] = to_string(*doc.label);
  if (!doc.meta.empty()) rec["meta"] = doc.meta;
  if (doc.entity_annotations) {
    nlohmann::json anns = nlohmann::json::array();
    for (const auto& a : *doc.entity_annotations) {
      anns.push_back({{"sentence", a.sentence}, {"char_start", a.char_start}, {"char_end", a.char_end},
                      {"type", a.type}});
    }
    rec["entities"] = anns;
  }
  return rec;
}

/// Reads a JSONL corpus; blank lines are skipped. Errors name the 1-based line.
inline std::vector<Document> read_corpus_stream(std::istream& in, const std::string& source = "corpus") {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), detail::is_space)) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw Error(source + ": line " + std::to_string(line_no) + ": malformed record");
    }
    try {
      docs.push_back(parse_document(rec));
    } catch (const Error& e) {
      throw Error(source + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

inline std::vector<Document> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path);
  return read_corpus_stream(in, path);
}

inline void write_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& d : docs) out << document_to_json(d).dump() << '\n';
}

/// Lowercased token texts of one sentence.
inline std::vector<std::string> sentence_words(const Document& doc, std::size_t sentence) {
  std::vector<std::string> words;
  const SentenceSpan& s = doc.sentences.at(sentence);
  for (std::size_t t = s.token_start; t < s.token_end; ++t) words.push_back(detail::ascii_lower(doc.tokens[t].text));
  return words;
}

/// Sentence index owning each token.
inline std::vector<std::size_t> token_sentence_index(const Document& doc) {
  std::vector<std::size_t> owner(doc.tokens.size(), 0);
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    for (std::size_t t = doc.sentences[s].token_start; t < doc.sentences[s].token_end; ++t) owner[t] = s;
  }
  return owner;
}

}  // namespace fast
