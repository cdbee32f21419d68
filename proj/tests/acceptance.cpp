// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fast/fast.hpp"

using namespace fast;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += " [over time limit " + std::to_string(limit_s) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// A document whose sentence i mentions exactly the symbols in sets[i]. Mentions
// come as annotations so the check does not depend on the rule-based extractor.
Document symbol_document(const std::string& id, const std::vector<std::vector<std::string>>& sets) {
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
  Document doc = make_document(id, text, Label::Human);
  doc.entity_annotations = anns;
  return doc;
}

// Enumeration oracle straight from the definitions.
std::pair<std::size_t, std::size_t> brute_counts(const std::vector<std::vector<std::string>>& sets, std::size_t w) {
  std::set<std::string> repeated;
  std::size_t scc = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    bool linked = false;
    for (std::size_t j = i + 1; j <= i + w && j < sets.size(); ++j) {
      for (const auto& a : sets[i]) {
        for (const auto& b : sets[j]) {
          if (a == b) {
            repeated.insert(a);
            linked = true;
          }
        }
      }
    }
    if (linked) ++scc;
  }
  return {repeated.size(), scc};
}

Real sigm(Real x) { return 1.0 / (1.0 + std::exp(-x)); }

// Step-by-step LSTM written with plain loops over the stored weights.
std::vector<std::vector<Real>> reference_lstm(const ParameterSet& p, const Tensor& y, std::size_t dh) {
  auto gate = [&](const std::string& g, const std::vector<Real>& x, const std::vector<Real>& h) {
    const Tensor& W = p.get("lstm.W_" + g);
    const Tensor& U = p.get("lstm.U_" + g);
    const Tensor& b = p.get("lstm.b_" + g);
    std::vector<Real> out(dh);
    for (std::size_t k = 0; k < dh; ++k) {
      Real acc = b(0, k);
      for (std::size_t m = 0; m < x.size(); ++m) acc += x[m] * W(m, k);
      for (std::size_t m = 0; m < dh; ++m) acc += h[m] * U(m, k);
      out[k] = acc;
    }
    return out;
  };
  std::vector<Real> h(dh, 0.0), c(dh, 0.0);
  std::vector<std::vector<Real>> states;
  for (std::size_t t = 0; t < y.rows(); ++t) {
    std::vector<Real> x(y.cols());
    for (std::size_t m = 0; m < y.cols(); ++m) x[m] = y(t, m);
    const auto zi = gate("i", x, h), zf = gate("f", x, h), zo = gate("o", x, h), zg = gate("g", x, h);
    for (std::size_t k = 0; k < dh; ++k) {
      c[k] = sigm(zf[k]) * c[k] + sigm(zi[k]) * std::tanh(zg[k]);
      h[k] = sigm(zo[k]) * std::tanh(c[k]);
    }
    states.push_back(h);
  }
  return states;
}

FastModel plain_model(std::size_t node_dim_half, std::uint64_t seed) {
  ModelConfig mc;
  mc.context_dim = node_dim_half;
  mc.sentence_dim = 6;
  mc.hidden_dim = 5;
  mc.use_nsp = false;
  const std::vector<Document> none;
  return FastModel(mc, std::make_shared<TrainableEmbedding>(Vocabulary::build(none), 4), EntityVecStore(3), nullptr,
                   seed);
}

}  // namespace

int main() {
  std::printf("fast %s acceptance\n", kVersion);

  report(1, "worked example ECC/SCC", 1.0, [] {
    const Document doc = symbol_document("worked", {{"A", "B"}, {"A"}, {"B"}});
    const auto m = extract_entities(doc);
    const std::size_t ecc = entity_consistency_count(doc, m, 2);
    const std::size_t scc = sentence_consistency_count(doc, m, 2);
    return Outcome{ecc == 2 && scc == 1, "ECC=" + std::to_string(ecc) + " SCC=" + std::to_string(scc) + " at w=2"};
  });

  report(2, "ECC/SCC match enumeration oracle", 10.0, [] {
    Rng rng(2024);
    const char* symbols[4] = {"Ann", "Ben", "Cal", "Dee"};
    std::size_t mismatches = 0, checked = 0;
    for (int d = 0; d < 500; ++d) {
      const std::size_t n = 1 + rng.index(6);
      const std::size_t k = 1 + rng.index(4);
      std::vector<std::vector<std::string>> sets(n);
      for (auto& s : sets) {
        const std::size_t mentions = rng.index(4);
        for (std::size_t q = 0; q < mentions; ++q) s.push_back(symbols[rng.index(k)]);
      }
      const Document doc = symbol_document("r" + std::to_string(d), sets);
      const auto m = extract_entities(doc);
      for (std::size_t w = 1; w <= 3; ++w) {
        const auto [ecc, scc] = brute_counts(sets, w);
        ++checked;
        if (entity_consistency_count(doc, m, w) != ecc || sentence_consistency_count(doc, m, w) != scc) ++mismatches;
      }
    }
    return Outcome{mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(checked) + " cases"};
  });

  report(3, "synthetic corpus consistency ordering", 30.0, [] {
    SynthConfig sc;
    const auto corpus = generate_synthetic_corpus(sc);
    std::vector<Document> human, machine;
    for (const auto* split : {&corpus.train, &corpus.valid, &corpus.test}) {
      for (const auto& d : *split) (d.label == Label::Human ? human : machine).push_back(d);
    }
    const auto reports = profile_corpus(human, machine, {1, 2});
    bool ok = human.size() == 200 && machine.size() == 200;
    std::string detail;
    for (const auto& r : reports) {
      const double eh = r.mean(Label::Human, true), em = r.mean(Label::Machine, true);
      const double sh = r.mean(Label::Human, false), sm = r.mean(Label::Machine, false);
      const double mode_eh = curve_mode(r.kde_human), mode_em = curve_mode(r.kde_machine);
      const double mode_sh = curve_mode(r.scc_kde_human), mode_sm = curve_mode(r.scc_kde_machine);
      ok = ok && eh > em && sh > sm && mode_eh > mode_em && mode_sh > mode_sm;
      detail += "w=" + std::to_string(r.window) + " ECC " + fmt(eh) + ">" + fmt(em) + " SCC " + fmt(sh) + ">" +
                fmt(sm) + " modes " + fmt(mode_eh) + ">" + fmt(mode_em) + ", " + fmt(mode_sh) + ">" + fmt(mode_sm) +
                "; ";
    }
    return Outcome{ok, detail};
  });

  report(4, "end-to-end gradient check", 60.0, [] {
    Rng rng(4);
    Real worst = 0.0;
    std::string where;
    std::size_t passed = 0;
    std::set<std::string> covered;
    for (int i = 0; i < 20; ++i) {
      const Document doc = random_toy_document(rng, "toy-" + std::to_string(i), 3, 5);
      const ModelGradCheck r = model_grad_check(doc, 400 + static_cast<std::uint64_t>(i), 1e-4);
      if (r.result.passed) ++passed;
      for (const auto& [name, _] : r.result.per_param) covered.insert(name);
      if (r.result.worst_rel_error >= worst) {
        worst = r.result.worst_rel_error;
        where = r.result.worst_param;
      }
    }
    return Outcome{passed == 20, std::to_string(passed) + "/20 documents, " + std::to_string(covered.size()) +
                                     " parameter tensors, worst relative error " + fmt(worst) + " (" + where + ")"};
  });

  report(5, "graph symmetry and GCN permutation equivariance", 0.0, [] {
    Rng rng(5);
    bool symmetric = true;
    Real worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 5;
      FactualGraph g;
      for (std::size_t i = 0; i < n; ++i) g.nodes.push_back(EntityMention{});
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          if (rng.uniform() < 0.4) g.edges.push_back({a, b, rng.uniform() < 0.5 ? EdgeKind::InnerSentence : EdgeKind::InterSentence});
        }
      }
      const Tensor adj = g.adjacency();
      const Tensor norm = normalized_adjacency(g);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) symmetric = symmetric && adj(a, b) == adj(b, a) && norm(a, b) == norm(b, a);
      }
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      rng.shuffle(perm);
      Tensor pnorm(n, n);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) pnorm(a, b) = norm(perm[a], perm[b]);
      }
      const FastModel model = plain_model(3, 500 + static_cast<std::uint64_t>(trial));
      Tensor h0(n, 6);
      for (Real& v : h0.data()) v = rng.uniform(-1.0, 1.0);
      Tensor ph0(n, 6);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t c = 0; c < 6; ++c) ph0(a, c) = h0(perm[a], c);
      }
      Tape tape;
      const Tensor out = model.gcn_forward(tape, model.params(), tape.constant(h0), norm).back().value();
      const Tensor pout = model.gcn_forward(tape, model.params(), tape.constant(ph0), pnorm).back().value();
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t c = 0; c < out.cols(); ++c) worst = std::max(worst, std::abs(pout(a, c) - out(perm[a], c)));
      }
    }
    FactualGraph lonely;
    for (int i = 0; i < 4; ++i) lonely.nodes.push_back(EntityMention{});
    const bool identity = normalized_adjacency(lonely) == Tensor::identity(4);
    const bool ok = symmetric && worst <= 1e-10 && identity;
    return Outcome{ok, std::string("symmetric ") + (symmetric ? "yes" : "no") + ", equivariance max diff " + fmt(worst) +
                           ", self-loop-only graph gives identity " + (identity ? "yes" : "no")};
  });

  report(6, "probability normalization", 0.0, [] {
    Rng rng(6);
    Real worst = 0.0;
    std::size_t nonfinite = 0;
    for (int i = 0; i < 1000; ++i) {
      const std::size_t sentences = 1 + rng.index(5);
      const Document doc = random_toy_document(rng, "p" + std::to_string(i), sentences, 1 + rng.index(6));
      const FastModel model = make_toy_model({doc}, 600 + static_cast<std::uint64_t>(i));
      const ForwardTrace t = model.trace(model.prepare(doc));
      worst = std::max(worst, std::abs(t.p_human + t.p_machine - 1.0));
      if (!t.all_finite()) ++nonfinite;
    }
    return Outcome{worst <= 1e-9 && nonfinite == 0,
                   "max |p_h + p_m - 1| = " + fmt(worst) + ", non-finite traces " + std::to_string(nonfinite)};
  });

  // Shared by criteria 7 and 8; built inside 7 so its time counts there.
  SynthCorpus desk;
  std::vector<NspPair> desk_pairs;
  std::optional<NspTrainResult> desk_nsp;
  auto ensure_nsp = [&] {
    if (desk_nsp) return;
    desk = generate_synthetic_corpus(SynthConfig{});
    desk_pairs = build_nsp_dataset(desk.train);
    desk_nsp = train_nsp(desk_pairs, NspConfig::desk());
  };

  report(7, "desk-scale separation and ablation", 300.0, [&] {
    ensure_nsp();
    TrainConfig full = TrainConfig::desk();
    TrainResources res;
    res.entities = desk.entities;
    res.nsp = std::make_shared<NspScorer>(desk_nsp->scorer);
    const TrainResult fr = train(desk.train, desk.valid, full, res);
    const EvalResult fe = evaluate_paired(fr.model, desk.test);

    TrainConfig ablation = TrainConfig::desk();
    ablation.model = ModelConfig::global_only(ablation.model);
    const TrainResult ar = train(desk.train, desk.valid, ablation, res);
    const EvalResult ae = evaluate_paired(ar.model, desk.test);

    const double fu = fe.unpaired_accuracy(), fp = *fe.paired_accuracy();
    const double au = ae.unpaired_accuracy(), ap = *ae.paired_accuracy();
    const bool ok = desk.train.size() == 300 && desk.valid.size() == 50 && desk.test.size() == 50 &&
                    full.epochs <= 10 && fu >= 0.90 && fp >= 0.90 && au <= 0.60 && ap <= 0.60;
    return Outcome{ok, "full model unpaired " + fmt(fu) + " paired " + fmt(fp) + "; global-only unpaired " + fmt(au) +
                           " paired " + fmt(ap)};
  });

  report(8, "NSP scorer", 0.0, [&] {
    ensure_nsp();
    const auto& pairs = desk_pairs;
    std::size_t pos = 0, neg = 0, same = 0;
    for (std::size_t i = 0; i + 1 < pairs.size(); i += 2) {
      pos += pairs[i].label == NspLabel::Positive;
      neg += pairs[i + 1].label == NspLabel::Negative;
      same += pairs[i].second_sentence == pairs[i + 1].second_sentence;
    }
    const bool balanced = pairs.size() % 2 == 0 && pos == pairs.size() / 2 && neg == pairs.size() / 2;
    const double held = desk_nsp->log.back().heldout_accuracy;
    const double test = nsp_accuracy(desk_nsp->scorer, build_nsp_dataset(desk.test));
    return Outcome{balanced && same == 0 && held >= 0.80,
                   std::to_string(pairs.size()) + " pairs, balanced " + (balanced ? "yes" : "no") +
                       ", negatives equal to positive " + std::to_string(same) + ", held-out accuracy " + fmt(held) +
                       " (" + std::to_string(desk_nsp->heldout.size()) + " pairs), test-split accuracy " + fmt(test)};
  });

  report(9, "determinism and paired-metric rescaling invariance", 0.0, [] {
    SynthConfig sc;
    sc.train_titles = 30;
    sc.valid_titles = 6;
    sc.test_titles = 1;
    sc.seed = 99;
    const auto corpus = generate_synthetic_corpus(sc);
    TrainConfig c = TrainConfig::desk();
    c.epochs = 3;
    c.model.use_nsp = false;
    c.model.dropout = 0.1;
    TrainResources res;
    res.entities = corpus.entities;
    std::ostringstream a, b, threaded;
    write_metrics_csv(train(corpus.train, corpus.valid, c, res).log, a);
    write_metrics_csv(train(corpus.train, corpus.valid, c, res).log, b);
    c.threads = 3;
    write_metrics_csv(train(corpus.train, corpus.valid, c, res).log, threaded);
    const bool same_logs = a.str() == b.str() && a.str() == threaded.str();

    Rng rng(9);
    std::vector<Document> docs;
    std::vector<Prediction> preds, squashed, stretched;
    for (int t = 0; t < 200; ++t) {
      for (Label l : {Label::Human, Label::Machine}) {
        docs.push_back(make_document("d" + std::to_string(t) + to_string(l), "x .", l,
                                     {{"title", "t" + std::to_string(t)}}));
        // coarse grid so that ties occur
        const Real p = static_cast<Real>(rng.index(11)) / 10.0;
        preds.push_back(make_prediction(docs.back(), p));
        squashed.push_back(make_prediction(docs.back(), p * p * p));
        stretched.push_back(make_prediction(docs.back(), sigm(8.0 * (p - 0.3))));
      }
    }
    const auto r0 = evaluate_paired(docs, preds), r1 = evaluate_paired(docs, squashed),
               r2 = evaluate_paired(docs, stretched);
    const bool invariant = r0.pairs_correct == r1.pairs_correct && r0.pairs_correct == r2.pairs_correct;
    return Outcome{same_logs && invariant, std::string("repeated and 3-thread metrics logs identical ") +
                                               (same_logs ? "yes" : "no") + ", paired correct " +
                                               std::to_string(r0.pairs_correct) + "/" + std::to_string(r1.pairs_correct) +
                                               "/" + std::to_string(r2.pairs_correct) + " under rescalings"};
  });

  report(10, "LSTM matches reference", 0.0, [] {
    Rng rng(10);
    Real worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const FastModel model = plain_model(3, 1000 + static_cast<std::uint64_t>(trial));
      const std::size_t steps = 1 + rng.index(8);
      Tensor y(steps, model.config().sentence_dim);
      for (Real& v : y.data()) v = rng.uniform(-2.0, 2.0);
      Tape tape;
      const Tensor got = model.coherence_lstm(tape, model.params(), tape.constant(y)).value();
      const auto want = reference_lstm(model.params(), y, model.config().hidden_dim);
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; k < want[t].size(); ++k) worst = std::max(worst, std::abs(got(t, k) - want[t][k]));
      }
    }
    return Outcome{worst <= 1e-10, "max abs diff " + fmt(worst) + " over 50 sequences"};
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
