#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fast/consistency.hpp"
#include "fast/rng.hpp"

using namespace fast;

namespace {

// One sentence per entry, each name annotated as a mention.
Document symbols(const std::string& id, const std::vector<std::vector<std::string>>& sets,
                 Label label = Label::Human) {
  std::string text;
  std::vector<EntityAnnotation> anns;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (!text.empty()) text += ' ';
    text += "then";
    for (const auto& name : sets[i]) {
      text += ' ';
      anns.push_back({i, text.size(), text.size() + name.size(), "X"});
      text += name;
    }
    text += " spoke .";
  }
  Document doc = make_document(id, text, label);
  doc.entity_annotations = anns;
  return doc;
}

std::size_t ecc(const Document& d, std::size_t w) { return entity_consistency_count(d, extract_entities(d), w); }
std::size_t scc(const Document& d, std::size_t w) { return sentence_consistency_count(d, extract_entities(d), w); }

constexpr double kInvSqrt2Pi = 0.3989422804014327;

}  // namespace

TEST(Consistency, WorkedExample) {
  const Document d = symbols("w", {{"A", "B"}, {"A"}, {"B"}});
  EXPECT_EQ(ecc(d, 2), 2u);
  EXPECT_EQ(scc(d, 2), 1u);
  EXPECT_EQ(ecc(d, 1), 1u);
}

TEST(Consistency, RepeatedSingleEntity) {
  const Document d = symbols("r", {{"A"}, {"A"}, {"A"}});
  EXPECT_EQ(scc(d, 1), 2u);
  EXPECT_EQ(ecc(d, 1), 1u);
}

TEST(Consistency, EmptyAndEntityFree) {
  const Document empty = make_document("e", "");
  EXPECT_EQ(ecc(empty, 1), 0u);
  EXPECT_EQ(scc(empty, 1), 0u);
  const Document plain = make_document("p", "the cat sat. the dog ran.");
  EXPECT_EQ(ecc(plain, 3), 0u);
  EXPECT_EQ(scc(plain, 3), 0u);
}

TEST(Consistency, ZeroWindowIsAnError) { EXPECT_THROW(ecc(symbols("z", {{"A"}}), 0), Error); }

TEST(Consistency, MonotoneInWindow) {
  Rng rng(21);
  const char* names[] = {"A", "B", "C", "D"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<std::string>> sets(1 + rng.index(7));
    for (auto& s : sets) {
      std::set<std::string> chosen;
      for (std::size_t k = rng.index(3); k > 0; --k) chosen.insert(names[rng.index(4)]);
      s.assign(chosen.begin(), chosen.end());
    }
    const Document d = symbols("m", sets);
    for (std::size_t w = 1; w < 7; ++w) {
      EXPECT_LE(ecc(d, w), ecc(d, w + 1));
      EXPECT_LE(scc(d, w), scc(d, w + 1));
      EXPECT_LT(scc(d, w), std::max<std::size_t>(sets.size(), 1));
    }
  }
}

TEST(Kde, SingleKernel) {
  EXPECT_NEAR(gaussian_kde_at({0.0}, 1.0, 0.0), kInvSqrt2Pi, 1e-12);
  EXPECT_NEAR(gaussian_kde_at({0.0}, 1.0, 0.0), 0.39894, 1e-5);
}

TEST(Kde, DuplicatesGiveTheSameCurve) {
  const auto one = kernel_density({0.0}, 0.7);
  const auto three = kernel_density({0.0, 0.0, 0.0}, 0.7);
  ASSERT_EQ(one.size(), three.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_DOUBLE_EQ(one[i].x, three[i].x);
    EXPECT_NEAR(one[i].density, three[i].density, 1e-15);
  }
}

TEST(Kde, FarKernelIsNegligible) { EXPECT_NEAR(gaussian_kde_at({0.0, 10.0}, 1.0, 0.0), 0.19947, 1e-5); }

TEST(Kde, CurveIntegratesToOne) {
  Rng rng(3);
  std::vector<double> values;
  for (int i = 0; i < 40; ++i) values.push_back(static_cast<double>(rng.index(6)));
  const auto curve = kernel_density(values);
  EXPECT_EQ(curve.size(), kDensitySamples);
  EXPECT_NEAR(trapezoid_integral(curve), 1.0, 1e-2);
  for (const auto& p : curve) EXPECT_GE(p.density, 0.0);
}

TEST(Kde, Errors) {
  EXPECT_THROW(kernel_density({}), Error);
  EXPECT_THROW(kernel_density({1.0}, 0.0), Error);
}

TEST(Kde, SilvermanBandwidth) {
  EXPECT_DOUBLE_EQ(silverman_bandwidth({2.0, 2.0}), 0.1);
  // sd of {0, 2} with n - 1 is sqrt(2)
  EXPECT_NEAR(silverman_bandwidth({0.0, 2.0}), 1.06 * std::sqrt(2.0) * std::pow(2.0, -0.2), 1e-12);
}

TEST(Profile, SeparatesRepeatingFromDisjoint) {
  std::vector<Document> human, machine;
  for (int i = 0; i < 5; ++i) {
    human.push_back(symbols("h" + std::to_string(i), {{"A"}, {"A", "B"}, {"B"}}, Label::Human));
    machine.push_back(symbols("m" + std::to_string(i), {{"A"}, {"B"}, {"C"}}, Label::Machine));
  }
  const auto reports = profile_corpus(human, machine, {1});
  ASSERT_EQ(reports.size(), 1u);
  for (const auto& d : reports[0].per_document) {
    if (d.label == Label::Human) {
      EXPECT_GE(d.ecc, 1u);
    } else {
      EXPECT_EQ(d.ecc, 0u);
    }
  }
  EXPECT_GT(curve_mode(reports[0].kde_human), curve_mode(reports[0].kde_machine));
}

TEST(Profile, IdenticalCorporaGiveIdenticalCurves) {
  std::vector<Document> human = {symbols("a", {{"A"}, {"A"}}), symbols("b", {{"B"}, {"C"}})};
  std::vector<Document> machine = human;
  for (auto& d : machine) d.label = Label::Machine;
  const auto r = profile_corpus(human, machine, {1, 2});
  ASSERT_EQ(r.size(), 2u);
  for (const auto& rep : r) {
    ASSERT_EQ(rep.kde_human.size(), rep.kde_machine.size());
    for (std::size_t i = 0; i < rep.kde_human.size(); ++i) {
      EXPECT_EQ(rep.kde_human[i].x, rep.kde_machine[i].x);
      EXPECT_EQ(rep.kde_human[i].density, rep.kde_machine[i].density);
    }
  }
}

TEST(Profile, CsvLayout) {
  const auto r = profile_corpus({symbols("h", {{"A", "B"}, {"A"}, {"B"}})},
                                {symbols("m", {{"C"}, {"D"}}, Label::Machine)}, {2});
  std::ostringstream out;
  write_consistency_csv(r, out);
  EXPECT_EQ(out.str(), "doc_id,label,w,ecc,scc\nh,human,2,2,1\nm,machine,2,0,0\n");
  EXPECT_THROW(profile_corpus({}, {symbols("m", {{"C"}})}, {1}), Error);
}
