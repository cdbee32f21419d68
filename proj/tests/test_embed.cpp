#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fast/embed.hpp"

using namespace fast;

namespace {

EntityVecStore parse_vectors(const std::string& text) {
  std::istringstream in(text);
  return load_vectors_stream(in, "mem");
}

EntityMention named(const std::string& surface) {
  EntityMention m;
  m.surface = surface;
  m.normalized = normalize(surface);
  return m;
}

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST(Vocabulary, UnknownIsIdZeroAndCaseFolds) {
  const Vocabulary v = Vocabulary::build({make_document("a", "The cat saw the Dog.")});
  EXPECT_EQ(v.words().front(), Vocabulary::kUnkToken);
  EXPECT_EQ(v.id("zebra"), Vocabulary::kUnk);
  EXPECT_EQ(v.id("THE"), v.id("the"));
  EXPECT_NE(v.id("dog"), Vocabulary::kUnk);
  EXPECT_EQ(v.size(), 6u);  // <unk> the cat saw dog .
}

TEST(Vocabulary, MinCountDropsRareWords) {
  const Vocabulary v = Vocabulary::build({make_document("a", "a a b")}, 2);
  EXPECT_NE(v.id("a"), Vocabulary::kUnk);
  EXPECT_EQ(v.id("b"), Vocabulary::kUnk);
}

TEST(Trainable, EmptyDocumentUsesFallback) {
  const TrainableEmbedding emb(Vocabulary::build({make_document("a", "x y")}), 4);
  ParameterSet params;
  Rng rng(1);
  emb.declare(params, rng);
  const auto out = represent(emb, params, make_document("e", ""));
  EXPECT_EQ(out.token_vectors.rows(), 0u);
  EXPECT_EQ(out.token_vectors.cols(), 4u);
  EXPECT_EQ(out.global_vector, params.get(TrainableEmbedding::kFallback));
}

TEST(Trainable, IdenticalTokensGiveIdenticalRowsAndMeanGlobal) {
  const Document doc = make_document("a", "echo echo delta");
  const TrainableEmbedding emb(Vocabulary::build({doc}), 3);
  ParameterSet params;
  Rng rng(2);
  emb.declare(params, rng);
  const auto out = represent(emb, params, doc);
  ASSERT_EQ(out.token_vectors.rows(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(out.token_vectors(0, c), out.token_vectors(1, c));
    const double mean = (out.token_vectors(0, c) + out.token_vectors(1, c) + out.token_vectors(2, c)) / 3.0;
    EXPECT_NEAR(out.global_vector(0, c), mean, 1e-15);
  }
  const auto again = represent(emb, params, doc);
  EXPECT_EQ(again.token_vectors, out.token_vectors);
}

TEST(Precomputed, LoadsAndChecksRowCount) {
  const std::string path = write_temp("fast_precomputed.jsonl",
                                      "{\"id\":\"a\",\"vectors\":[[1,2],[3,4]]}\n"
                                      "{\"id\":\"b\",\"vectors\":[[1,2]],\"global\":[9,9]}\n");
  const PrecomputedProvider p = PrecomputedProvider::load(path);
  EXPECT_EQ(p.dim(), 2u);
  ParameterSet none;
  const auto out = represent(p, none, make_document("a", "x y"));
  EXPECT_DOUBLE_EQ(out.global_vector(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out.global_vector(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(represent(p, none, make_document("b", "z")).global_vector(0, 0), 9.0);
  EXPECT_THROW(represent(p, none, make_document("a", "x y z")), Error);
  try {
    represent(p, none, make_document("missing-doc", "x"));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing-doc"), std::string::npos);
  }
}

TEST(Precomputed, DimensionMismatchNamesLine) {
  const std::string path =
      write_temp("fast_precomputed_bad.jsonl", "{\"id\":\"a\",\"vectors\":[[1,2]]}\n{\"id\":\"b\",\"vectors\":[[1]]}\n");
  try {
    PrecomputedProvider::load(path);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(EntityVectors, LoadOne) {
  const auto store = parse_vectors("1 3\nobama 1 2 3\n");
  EXPECT_EQ(store.size(), 1u);
  EXPECT_EQ(store.dim(), 3u);
  ASSERT_NE(store.find("obama"), nullptr);
  EXPECT_EQ(*store.find("obama"), (std::vector<Real>{1, 2, 3}));
  EXPECT_TRUE(store.warnings().empty());
}

TEST(EntityVectors, ShortLineIsAnErrorOnItsLine) {
  try {
    parse_vectors("1 3\nobama 1 2\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_vectors("1 2\nobama 1 x\n"), Error);
  EXPECT_THROW(parse_vectors(""), Error);
}

TEST(EntityVectors, DuplicateLastWinsWithWarning) {
  const auto store = parse_vectors("2 2\na 1 0\na 0 1\n");
  ASSERT_NE(store.find("a"), nullptr);
  EXPECT_EQ(*store.find("a"), (std::vector<Real>{0, 1}));
  EXPECT_FALSE(store.warnings().empty());
}

TEST(EntityVectors, UnderscoresMatchMultiWordNames) {
  const auto store = parse_vectors("1 2\nBarack_Obama 1 1\n");
  EXPECT_NE(store.find("barack obama"), nullptr);
}

TEST(EntityVectors, LookupPolicies) {
  EntityVecStore store(2, MissPolicy::Zero);
  store.insert("obama", {0.5, -1.0});
  ParameterSet params;
  Tape tape;
  EXPECT_EQ(store.lookup(tape, params, named("Obama")).value(), Tensor::row({0.5, -1.0}));
  EXPECT_EQ(store.lookup(tape, params, named("Putin")).value(), Tensor(1, 2));

  store.set_policy(MissPolicy::Unk);
  store.declare(params);
  params.set(EntityVecStore::kUnkParam, Tensor::row({7.0, 8.0}));
  EXPECT_EQ(store.lookup(tape, params, named("Putin")).value(), Tensor::row({7.0, 8.0}));
  EXPECT_THROW(store.insert("x", {1.0}), Error);
}

TEST(EntityVectors, SaveLoadRoundTrip) {
  EntityVecStore store(2);
  store.insert("new york", {0.1, 1.0 / 3.0});
  store.insert("paris", {-2.0, 5.5});
  const std::string path = ::testing::TempDir() + "fast_vectors.txt";
  save_vectors(store, path);
  const auto back = load_vectors(path);
  EXPECT_EQ(back.entries(), store.entries());
  EXPECT_THROW(load_vectors("/nonexistent/vectors.txt"), Error);
}
