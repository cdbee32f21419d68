#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fast/rng.hpp"
#include "fast/text.hpp"

using namespace fast;

namespace {

std::vector<std::string> texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::vector<Document> parse(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return read_corpus_stream(in, "mem");
}

}  // namespace

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, WordsAndTerminalPunctuation) {
  const auto t = tokenize("Obama won.");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(texts(t), (std::vector<std::string>{"Obama", "won", "."}));
  EXPECT_EQ(t[0].char_start, 0u);
  EXPECT_EQ(t[0].char_end, 5u);
  EXPECT_EQ(t[1].char_start, 6u);
  EXPECT_EQ(t[1].char_end, 9u);
  EXPECT_EQ(t[2].char_start, 9u);
  EXPECT_EQ(t[2].char_end, 10u);
}

TEST(Tokenize, AbbreviationKeepsInternalPeriods) {
  EXPECT_EQ(texts(tokenize("U.S. aid")), (std::vector<std::string>{"U.S.", "aid"}));
  EXPECT_EQ(texts(tokenize("Mr. Smith left.")), (std::vector<std::string>{"Mr.", "Smith", "left", "."}));
}

TEST(Tokenize, OffsetsSliceTheRawText) {
  const std::string raw = "  \"Hello,\" she said -- twice?! (Yes.)\tDone";
  for (const auto& t : tokenize(raw)) EXPECT_EQ(raw.substr(t.char_start, t.char_end - t.char_start), t.text);
}

TEST(Tokenize, IdempotentOnSpaceJoinedTokens) {
  Rng rng(5);
  const char* pieces[] = {"Alpha", "beta", ",", "U.S.", "e.g.", "won", ".", "?!", "\"", "(", ")", "x's", "3.5", "-"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string raw;
    for (int k = 0; k < 12; ++k) raw += std::string(pieces[rng.index(std::size(pieces))]) + (rng.uniform() < 0.5 ? " " : "");
    const auto first = texts(tokenize(raw));
    std::string joined;
    for (const auto& w : first) joined += (joined.empty() ? "" : " ") + w;
    EXPECT_EQ(texts(tokenize(joined)), first) << raw;
  }
}

TEST(Segment, EmptyTokens) { EXPECT_TRUE(segment_sentences({}).empty()); }

TEST(Segment, TwoSentences) {
  const auto s = segment_sentences(tokenize("A won. B lost."));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], (SentenceSpan{0, 3}));
  EXPECT_EQ(s[1], (SentenceSpan{3, 6}));
}

TEST(Segment, NoTerminatorIsOneSentence) {
  const auto tokens = tokenize("No terminator here");
  const auto s = segment_sentences(tokens);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], (SentenceSpan{0, tokens.size()}));
}

TEST(Segment, AbbreviationDoesNotEndSentence) {
  EXPECT_EQ(segment_sentences(tokenize("Mr. Smith went to the U.S. yesterday. He left.")).size(), 2u);
}

TEST(Segment, ClosingQuoteStaysWithSentence) {
  const auto tokens = tokenize("He said \"go.\" Then he left.");
  const auto s = segment_sentences(tokens);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(tokens[s[0].token_end - 1].text, "\"");
}

TEST(Segment, SpansCoverTokensWithoutOverlap) {
  Rng rng(6);
  const char* pieces[] = {"word", "Name", ".", "!", "?", "\"", "Mr.", ",", "end"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string raw;
    for (int k = 0; k < 15; ++k) raw += std::string(pieces[rng.index(std::size(pieces))]) + " ";
    const auto tokens = tokenize(raw);
    const auto spans = segment_sentences(tokens);
    std::size_t next = 0;
    for (const auto& s : spans) {
      EXPECT_EQ(s.token_start, next);
      EXPECT_LT(s.token_start, s.token_end);
      next = s.token_end;
    }
    EXPECT_EQ(next, tokens.size());
  }
}

TEST(Corpus, LabeledRecord) {
  const auto docs = parse(R"({"id":"d1","text":"A won.","label":"human"})");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].id, "d1");
  EXPECT_EQ(docs[0].label, Label::Human);
  EXPECT_EQ(docs[0].sentences.size(), 1u);
}

TEST(Corpus, EmptyTextRecord) {
  const auto docs = parse(R"({"id":"d2","text":""})");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_TRUE(docs[0].tokens.empty());
  EXPECT_TRUE(docs[0].sentences.empty());
  EXPECT_FALSE(docs[0].label.has_value());
}

TEST(Corpus, MalformedLineNamesTheLine) {
  try {
    parse("not json");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1: malformed record"), std::string::npos) << e.what();
  }
  try {
    parse("{\"id\":\"a\",\"text\":\"x\"}\n\n{\"id\":\"b\"}");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Corpus, UnknownLabelIsAnError) { EXPECT_THROW(parse(R"({"id":"a","text":"x","label":"robot"})"), Error); }

TEST(Corpus, MissingFileNamesPath) {
  try {
    read_corpus("/nonexistent/corpus.jsonl");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/corpus.jsonl"), std::string::npos);
  }
}

TEST(Corpus, SuppliedTokensAndSentences) {
  const auto docs = parse(
      R"({"id":"p","text":"ab cd ef","tokens":[[0,2],[3,5],[6,8]],"sentences":[[0,5],[6,8]],"meta":{"title":"t"}})");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(texts(docs[0].tokens), (std::vector<std::string>{"ab", "cd", "ef"}));
  ASSERT_EQ(docs[0].sentences.size(), 2u);
  EXPECT_EQ(docs[0].sentences[1], (SentenceSpan{2, 3}));
  EXPECT_EQ(docs[0].meta_or("title"), "t");
  EXPECT_THROW(parse(R"({"id":"p","text":"ab","tokens":[[0,9]]})"), Error);
}

TEST(Corpus, RoundTripKeepsOffsets) {
  std::vector<Document> docs = {make_document("a", "Hello there. General Kenobi!", Label::Machine, {{"title", "x"}}),
                                make_document("b", "", std::nullopt)};
  const std::string path = ::testing::TempDir() + "fast_corpus_roundtrip.jsonl";
  write_corpus(docs, path);
  const auto back = read_corpus(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    EXPECT_EQ(back[i].id, docs[i].id);
    EXPECT_EQ(back[i].tokens, docs[i].tokens);
    EXPECT_EQ(back[i].sentences, docs[i].sentences);
    EXPECT_EQ(back[i].label, docs[i].label);
    EXPECT_EQ(back[i].meta, docs[i].meta);
    for (const auto& t : back[i].tokens) {
      EXPECT_EQ(back[i].raw_text.substr(t.char_start, t.char_end - t.char_start), t.text);
    }
  }
}
