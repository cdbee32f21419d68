#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fast/embed.hpp"
#include "fast/error.hpp"
#include "fast/rng.hpp"
#include "fast/text.hpp"

namespace fast {

struct SynthConfig {
  std::size_t train_titles = 150;
  std::size_t valid_titles = 25;
  std::size_t test_titles = 25;
  std::size_t min_sentences = 5;
  std::size_t max_sentences = 7;
  std::size_t entity_dim = 100;
  std::uint64_t seed = 7;
};

struct SynthCorpus {
  std::vector<Document> train;
  std::vector<Document> valid;
  std::vector<Document> test;
  EntityVecStore entities;
};

namespace synth_detail {

inline constexpr std::array<const char*, 30> kEntities = {
    "Alice Moreno",     "Victor Hale",     "Priya Natarajan",   "Jonas Berg",       "Mei Tanaka",
    "Omar Haddad",      "Lucia Ferreira",  "Samuel Okafor",     "Ingrid Larsen",    "Rafael Ortiz",
    "Hana Kovac",       "Dmitri Volkov",   "Northwind Bank",    "Helix Labs",       "Crescent Airlines",
    "Summit Energy",    "Bluefield Council", "Orion Media",     "Lisbon",           "Nairobi",
    "Osaka",            "Calgary",         "Tbilisi",           "Valparaiso",       "Bergen",
    "Accra",            "Hobart",          "Quito",             "Tallinn",          "Medan"};

// Two entity slots per template; the first word is capitalized and the second
// is lowercase so that no entity run starts a sentence.
inline constexpr std::array<const char*, 10> kTemplates = {
    "Officials said {0} met {1} on monday .",
    "Reports confirm that {0} signed an agreement with {1} .",
    "Sources say {0} criticized {1} in a statement .",
    "Analysts expect {0} to challenge {1} next year .",
    "Witnesses saw {0} arrive with {1} before noon .",
    "Records show {0} paid {1} for the project .",
    "Observers noted that {0} praised {1} during the summit .",
    "Documents reveal {0} hired {1} last spring .",
    "Critics argue {0} misled {1} about the budget .",
    "Later that week {0} thanked {1} publicly ."};

inline std::string fill(const char* tmpl, const std::string& a, const std::string& b) {
  std::string s(tmpl);
  s.replace(s.find("{0}"), 3, a);
  s.replace(s.find("{1}"), 3, b);
  return s;
}

using Slots = std::vector<std::array<std::size_t, 2>>;

/// Rearranges the mention multiset of `human` so that no two adjacent sentences
/// share an entity and no sentence repeats one. Randomized restarts.
inline Slots scatter(const Slots& human, Rng& rng) {
  std::vector<std::size_t> pool;
  for (const auto& s : human) pool.insert(pool.end(), s.begin(), s.end());
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<std::size_t> remaining = pool;
    rng.shuffle(remaining);
    Slots out;
    bool ok = true;
    for (std::size_t i = 0; i < human.size() && ok; ++i) {
      std::array<std::size_t, 2> pick{};
      std::size_t got = 0;
      for (std::size_t k = 0; k < remaining.size() && got < 2; ++k) {
        const std::size_t e = remaining[k];
        const bool clash_prev = i > 0 && (out.back()[0] == e || out.back()[1] == e);
        const bool clash_self = got == 1 && pick[0] == e;
        if (clash_prev || clash_self) continue;
        pick[got++] = e;
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(k));
        --k;
      }
      ok = got == 2;
      out.push_back(pick);
    }
    if (ok) return out;
  }
  throw Error("synth: could not scatter entities");
}

}  // namespace synth_detail

/// Title-paired corpus whose labels depend only on entity arrangement. For each
/// title a human-like document chains entities through adjacent sentences
/// (sentence i mentions e_i and e_{i+1}); the machine-like partner reuses the
/// same sentence templates and the same entity mentions, rearranged so that
/// adjacent sentences share no entity. Both documents of a title therefore
/// have identical token multisets.
inline SynthCorpus generate_synthetic_corpus(const SynthConfig& config) {
  if (config.train_titles + config.valid_titles + config.test_titles == 0) throw Error("synth: no titles requested");
  if (config.min_sentences < 3 || config.max_sentences < config.min_sentences) {
    throw Error("synth: need 3 <= min_sentences <= max_sentences");
  }
  if (config.max_sentences + 1 > synth_detail::kEntities.size()) throw Error("synth: max_sentences too large");
  using namespace synth_detail;
  Rng rng(config.seed);
  SynthCorpus corpus;
  corpus.entities = EntityVecStore(config.entity_dim);
  for (const char* name : kEntities) {
    std::vector<Real> v(config.entity_dim);
    for (Real& x : v) x = rng.normal() / std::sqrt(static_cast<Real>(config.entity_dim));
    corpus.entities.insert(name, std::move(v));
  }

  std::size_t title_no = 0;
  auto make_split = [&](std::size_t titles, const std::string& split, std::vector<Document>& out) {
    for (std::size_t k = 0; k < titles; ++k, ++title_no) {
      const std::size_t n = config.min_sentences + rng.index(config.max_sentences - config.min_sentences + 1);
      std::vector<std::size_t> ents(kEntities.size());
      for (std::size_t i = 0; i < ents.size(); ++i) ents[i] = i;
      rng.shuffle(ents);
      ents.resize(n + 1);
      Slots human;
      std::vector<std::size_t> templates;
      for (std::size_t i = 0; i < n; ++i) {
        std::array<std::size_t, 2> s{ents[i], ents[i + 1]};
        if (rng.uniform() < 0.5) std::swap(s[0], s[1]);
        human.push_back(s);
        templates.push_back(rng.index(kTemplates.size()));
      }
      const Slots machine = scatter(human, rng);
      auto render = [&](const Slots& slots) {
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
          if (!text.empty()) text += ' ';
          text += fill(kTemplates[templates[i]], kEntities[slots[i][0]], kEntities[slots[i][1]]);
        }
        return text;
      };
      const std::string title = split + "-" + std::to_string(title_no);
      out.push_back(make_document(title + "-h", render(human), Label::Human, {{"title", title}}));
      out.push_back(make_document(title + "-m", render(machine), Label::Machine, {{"title", title}}));
    }
  };
  make_split(config.train_titles, "train", corpus.train);
  make_split(config.valid_titles, "valid", corpus.valid);
  make_split(config.test_titles, "test", corpus.test);
  return corpus;
}

}  // namespace fast
