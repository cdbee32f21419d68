#pragma once

#include <array>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "fast/embed.hpp"
#include "fast/gradcheck.hpp"
#include "fast/model.hpp"
#include "fast/nsp.hpp"
#include "fast/rng.hpp"
#include "fast/text.hpp"

namespace fast {

namespace toy_detail {
inline constexpr std::array<const char*, 6> kNames = {"Alpha", "Bravo", "Carter", "Delgado", "Everett", "Fontaine"};
inline constexpr std::array<const char*, 3> kVerbs = {"met", "called", "thanked"};
}  // namespace toy_detail

/// Small random document: each sentence starts lowercase and mentions zero to
/// two of the first `max_entities` single-word names.
inline Document random_toy_document(Rng& rng, const std::string& id, std::size_t sentences = 3,
                                    std::size_t max_entities = 5) {
  using namespace toy_detail;
  if (max_entities == 0 || max_entities > kNames.size()) throw Error("toy: max_entities out of range");
  std::string text;
  for (std::size_t s = 0; s < sentences; ++s) {
    if (!text.empty()) text += ' ';
    const std::size_t k = rng.index(3);
    const char* verb = kVerbs[rng.index(kVerbs.size())];
    if (k == 0) {
      text += std::string("then nobody ") + verb + " anyone .";
    } else if (k == 1) {
      text += std::string("then ") + kNames[rng.index(max_entities)] + " " + verb + " us .";
    } else {
      text += std::string("then ") + kNames[rng.index(max_entities)] + " " + verb + " " +
              kNames[rng.index(max_entities)] + " .";
    }
  }
  return make_document(id, text, rng.uniform() < 0.5 ? Label::Human : Label::Machine);
}

/// Tiny model over `docs` with every trainable piece switched on: trainable
/// embeddings, entity vectors for half the names plus a learned UNK row, GCN,
/// LSTM and a randomly initialized NSP scorer whose scores are fixed inputs.
inline FastModel make_toy_model(const std::vector<Document>& docs, std::uint64_t seed) {
  Rng rng(seed);
  ModelConfig mc;
  mc.context_dim = 3;
  mc.sentence_dim = 4;
  mc.hidden_dim = 4;
  mc.gcn_layers = 2;
  const std::size_t de = 3;
  EntityVecStore store(de, MissPolicy::Unk);
  for (std::size_t i = 0; i < toy_detail::kNames.size(); i += 2) {
    std::vector<Real> v(de);
    for (Real& x : v) x = rng.uniform(-1.0, 1.0);
    store.insert(toy_detail::kNames[i], std::move(v));
  }
  auto nsp = std::make_shared<NspScorer>(Vocabulary::build(docs), 3, 3, true, rng);
  nsp->params().set("nsp.u_p", glorot_uniform(3, 1, rng));
  auto provider = std::make_shared<TrainableEmbedding>(Vocabulary::build(docs), 4);
  FastModel model(mc, provider, std::move(store), nsp, seed);
  // Unit-scale values everywhere: zero-initialized tensors would put ReLU inputs
  // on the kink, and Glorot-scale LSTM states give gradients small enough for
  // round-off in the finite differences to dominate.
  for (auto& [name, t] : model.params()) {
    for (Real& v : t.data()) v = rng.uniform(-1.0, 1.0);
  }
  return model;
}

struct ModelGradCheck {
  GradCheckResult result;
  std::uint64_t model_seed = 0;  // the seed finally used after kink rejection
  Real relu_margin = 0.0;
};

/// End-to-end finite-difference check of the full model loss on one document.
/// Model seeds whose ReLU inputs come within `min_margin` of zero are rejected.
inline ModelGradCheck model_grad_check(const Document& doc, std::uint64_t seed, Real tol = 1e-4,
                                       Real min_margin = 1e-3, const GradientHook& hook = {}) {
  const std::vector<Document> docs{doc};
  for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
    const std::uint64_t s = seed * 1000 + attempt;
    FastModel model = make_toy_model(docs, s);
    const PreparedDoc prep = model.prepare(doc);
    Tape probe;
    model.loss(probe, model.params(), prep, *doc.label);
    if (probe.relu_margin() < min_margin) continue;
    const LossBuilder loss = [&](Tape& tape, const ParameterSet& p) { return model.loss(tape, p, prep, *doc.label); };
    return {grad_check(loss, model.params(), tol, 1e-5, hook), s, probe.relu_margin()};
  }
  throw Error("gradcheck: no model seed kept ReLU inputs away from zero");
}

}  // namespace fast
