#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fast/error.hpp"
#include "fast/model.hpp"
#include "fast/parallel.hpp"
#include "fast/text.hpp"

namespace fast {

struct Prediction {
  std::string doc_id;
  Real p_machine = 0.5;
  Label predicted = Label::Human;
  std::optional<Label> gold;
};

struct Confusion {
  std::size_t human_as_human = 0;
  std::size_t human_as_machine = 0;
  std::size_t machine_as_human = 0;
  std::size_t machine_as_machine = 0;

  std::size_t total() const { return human_as_human + human_as_machine + machine_as_human + machine_as_machine; }
};

/// Accuracies are kept as exact counts; the ratio is formed once on request.
struct EvalResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t pairs_correct = 0;
  std::size_t pairs_total = 0;
  bool has_pairs = false;
  Confusion confusion;
  std::vector<Prediction> predictions;

  double unpaired_accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
  std::optional<double> paired_accuracy() const {
    if (!has_pairs) return std::nullopt;
    return pairs_total == 0 ? 0.0 : static_cast<double>(pairs_correct) / static_cast<double>(pairs_total);
  }
};

inline Prediction make_prediction(const Document& doc, Real p_machine) {
  return {doc.id, p_machine, predicted_label(p_machine), doc.label};
}

/// Unpaired accuracy over labeled predictions.
inline EvalResult evaluate_unpaired(const std::vector<Prediction>& preds) {
  EvalResult r;
  for (const auto& p : preds) {
    if (!p.gold) throw Error("evaluation: document " + p.doc_id + " has no label");
    const bool gh = *p.gold == Label::Human;
    const bool ph = p.predicted == Label::Human;
    if (gh && ph) ++r.confusion.human_as_human;
    if (gh && !ph) ++r.confusion.human_as_machine;
    if (!gh && ph) ++r.confusion.machine_as_human;
    if (!gh && !ph) ++r.confusion.machine_as_machine;
    r.correct += (gh == ph) ? 1 : 0;
    ++r.total;
  }
  r.predictions = preds;
  return r;
}

/// Groups documents by meta "title"; each group must hold one human and one
/// machine document. A pair is correct iff the machine document has the strictly
/// higher p_machine. `preds` must align with `docs`.
inline EvalResult evaluate_paired(const std::vector<Document>& docs, const std::vector<Prediction>& preds) {
  if (docs.size() != preds.size()) throw Error("evaluation: prediction count does not match documents");
  EvalResult r = evaluate_unpaired(preds);
  struct Group {
    std::vector<std::size_t> human, machine;
  };
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string title = docs[i].meta_or("title");
    auto& g = groups[title];
    (docs[i].label == Label::Human ? g.human : g.machine).push_back(i);
  }
  std::vector<std::string> bad;
  for (const auto& [title, g] : groups) {
    if (title.empty() || g.human.size() != 1 || g.machine.size() != 1) bad.push_back(title.empty() ? "<missing>" : title);
  }
  if (!bad.empty()) {
    std::string list;
    for (const auto& b : bad) list += (list.empty() ? "" : ", ") + b;
    throw Error("paired evaluation: titles without exactly one human and one machine document: " + list);
  }
  r.has_pairs = true;
  for (const auto& [_, g] : groups) {
    ++r.pairs_total;
    if (preds[g.machine.front()].p_machine > preds[g.human.front()].p_machine) ++r.pairs_correct;
  }
  return r;
}

inline std::vector<Prediction> predict_all(const FastModel& model, const std::vector<Document>& docs,
                                           std::size_t threads = 1) {
  return parallel_map(docs.size(), threads, [&](std::size_t i) {
    return make_prediction(docs[i], model.p_machine(model.prepare(docs[i])));
  });
}

inline EvalResult evaluate_unpaired(const FastModel& model, const std::vector<Document>& docs, std::size_t threads = 1) {
  return evaluate_unpaired(predict_all(model, docs, threads));
}

inline EvalResult evaluate_paired(const FastModel& model, const std::vector<Document>& docs, std::size_t threads = 1) {
  return evaluate_paired(docs, predict_all(model, docs, threads));
}

/// True when every title groups exactly one human and one machine document.
inline bool has_valid_pairs(const std::vector<Document>& docs) {
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& d : docs) {
    const std::string t = d.meta_or("title");
    if (t.empty() || !d.label) return false;
    (*d.label == Label::Human ? counts[t].first : counts[t].second)++;
  }
  for (const auto& [_, c] : counts) {
    if (c.first != 1 || c.second != 1) return false;
  }
  return !counts.empty();
}

}  // namespace fast
