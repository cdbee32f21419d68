#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fast/embed.hpp"
#include "fast/entity.hpp"
#include "fast/error.hpp"
#include "fast/optim.hpp"
#include "fast/params.hpp"
#include "fast/rng.hpp"
#include "fast/tensor.hpp"
#include "fast/text.hpp"

namespace fast {

enum class NspLabel { Negative = 0, Positive = 1 };

/// A sentence pair given as token texts.
struct NspPair {
  std::vector<std::string> first_sentence;
  std::vector<std::string> second_sentence;
  NspLabel label = NspLabel::Positive;
  std::string source_doc;
};

namespace detail {

inline std::set<std::string> normalized_token_set(const Document& doc, const SentenceSpan& s) {
  std::set<std::string> out;
  for (std::size_t t = s.token_start; t < s.token_end; ++t) {
    std::string n = normalize(doc.tokens[t].text);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::vector<std::string> sentence_texts(const Document& doc, const SentenceSpan& s) {
  std::vector<std::string> out;
  for (std::size_t t = s.token_start; t < s.token_end; ++t) out.push_back(doc.tokens[t].text);
  return out;
}

}  // namespace detail

/// For each adjacent pair (A, B) of a human-written (or unlabeled) document:
/// a positive (A, B) and a negative (A, C), where C is the sentence most
/// similar to B by token Jaccard among all sentences other than A and B
/// (earliest index wins ties). Machine-labeled documents are skipped.
inline std::vector<NspPair> build_nsp_dataset(const std::vector<Document>& corpus) {
  std::vector<NspPair> pairs;
  for (const auto& doc : corpus) {
    if (doc.label == Label::Machine) continue;
    const std::size_t n = doc.sentences.size();
    if (n < 3) continue;
    std::vector<std::set<std::string>> sets;
    for (const auto& s : doc.sentences) sets.push_back(detail::normalized_token_set(doc, s));
    for (std::size_t a = 0; a + 1 < n; ++a) {
      const std::size_t b = a + 1;
      std::size_t best = n;
      double best_sim = -1.0;
      for (std::size_t c = 0; c < n; ++c) {
        if (c == a || c == b) continue;
        const double sim = detail::jaccard(sets[b], sets[c]);
        if (sim > best_sim) {
          best_sim = sim;
          best = c;
        }
      }
      const auto first = detail::sentence_texts(doc, doc.sentences[a]);
      pairs.push_back({first, detail::sentence_texts(doc, doc.sentences[b]), NspLabel::Positive, doc.id});
      pairs.push_back({first, detail::sentence_texts(doc, doc.sentences[best]), NspLabel::Negative, doc.id});
    }
  }
  return pairs;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

/// JSONL {"first", "second", "label": "pos"|"neg", "doc"}; sentences are space-joined tokens.
inline void write_nsp_pairs(const std::vector<NspPair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& p : pairs) {
    nlohmann::json rec = {{"first", join_words(p.first_sentence)},
                          {"second", join_words(p.second_sentence)},
                          {"label", p.label == NspLabel::Positive ? "pos" : "neg"},
                          {"doc", p.source_doc}};
    out << rec.dump() << '\n';
  }
}

inline std::vector<NspPair> read_nsp_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pair file " + path);
  std::vector<NspPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> w;
    std::istringstream is(s);
    for (std::string t; is >> t;) w.push_back(t);
    return w;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      NspPair p;
      p.first_sentence = split(rec.at("first").get<std::string>());
      p.second_sentence = split(rec.at("second").get<std::string>());
      const auto label = rec.at("label").get<std::string>();
      if (label != "pos" && label != "neg") throw Error("label must be \"pos\" or \"neg\"");
      p.label = label == "pos" ? NspLabel::Positive : NspLabel::Negative;
      p.source_doc = rec.value("doc", "");
      if (p.first_sentence.empty() || p.second_sentence.empty()) throw Error("empty sentence");
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception&) {
      throw Error(path + ": line " + std::to_string(line_no) + ": malformed record");
    } catch (const Error& e) {
      throw Error(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

struct NspConfig {
  Real learning_rate = 1e-5;
  std::size_t batch_size = 8;
  std::size_t epochs = 3;
  std::uint64_t seed = 13;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  Real weight_decay = 0.01;
  Real clip_norm = 1.0;
  Real holdout_fraction = 0.1;
  bool interaction = true;  // append enc(A) * enc(B) to the pair encoding

  /// Settings that converge on desk-scale corpora within a few seconds.
  static NspConfig desk() {
    NspConfig c;
    c.learning_rate = 1e-2;
    c.epochs = 15;
    return c;
  }
};

/// Mean-of-embeddings sentence encoder followed by
///   score(A, B) = sigmoid(u_p . tanh([enc(A); enc(B); enc(A) * enc(B)] W_p + b_p) + bias).
/// Without the product term the scorer cannot tell whether two sentences share
/// a word; it is kept by default and can be switched off.
class NspScorer {
 public:
  NspScorer() = default;

  NspScorer(Vocabulary vocab, std::size_t embed_dim, std::size_t hidden_dim, bool interaction, Rng& rng)
      : vocab_(std::move(vocab)), embed_dim_(embed_dim), hidden_dim_(hidden_dim), interaction_(interaction) {
    if (embed_dim == 0 || hidden_dim == 0) throw Error("nsp: dimensions must be positive");
    params_.add("nsp.embed", glorot_uniform(vocab_.size(), embed_dim, rng));
    params_.add("nsp.W_p", glorot_uniform(pair_width(), hidden_dim, rng));
    params_.add("nsp.b_p", Tensor(1, hidden_dim));
    params_.add("nsp.u_p", Tensor(hidden_dim, 1));  // zero head: untrained scores are 0.5
    params_.add("nsp.bias", Tensor(1, 1));
  }

  NspScorer(Vocabulary vocab, std::size_t embed_dim, std::size_t hidden_dim, bool interaction, ParameterSet params)
      : vocab_(std::move(vocab)),
        embed_dim_(embed_dim),
        hidden_dim_(hidden_dim),
        interaction_(interaction),
        params_(std::move(params)) {
    if (params_.get("nsp.embed").rows() != vocab_.size() || params_.get("nsp.embed").cols() != embed_dim_ ||
        params_.get("nsp.W_p").rows() != pair_width() || params_.get("nsp.W_p").cols() != hidden_dim_ ||
        params_.get("nsp.u_p").rows() != hidden_dim_) {
      throw Error("nsp: parameter shapes do not match the declared dimensions");
    }
  }

  const Vocabulary& vocabulary() const { return vocab_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  bool interaction() const { return interaction_; }
  std::size_t pair_width() const { return (interaction_ ? 3 : 2) * embed_dim_; }

  /// Pre-sigmoid score of a pair on the given tape.
  Var logit(Tape& tape, const ParameterSet& params, const std::vector<std::string>& first,
            const std::vector<std::string>& second) const {
    const Var table = params.bind(tape, "nsp.embed");
    auto encode = [&](const std::vector<std::string>& words) {
      if (words.empty()) throw Error("nsp: empty sentence");
      std::vector<std::size_t> ids;
      for (const auto& w : words) ids.push_back(vocab_.id(w));
      return mean_rows(gather_rows(table, std::move(ids)));
    };
    const Var a = encode(first);
    const Var b = encode(second);
    const Var pair = interaction_ ? concat_cols({a, b, mul(a, b)}) : concat_cols(a, b);
    const Var hidden = tanh(add(matmul(pair, params.bind(tape, "nsp.W_p")), params.bind(tape, "nsp.b_p")));
    return add(matmul(hidden, params.bind(tape, "nsp.u_p")), params.bind(tape, "nsp.bias"));
  }

  /// Cross-entropy of the pair label under the two-class logits [0, s].
  Var loss(Tape& tape, const ParameterSet& params, const NspPair& pair) const {
    const Var s = logit(tape, params, pair.first_sentence, pair.second_sentence);
    return softmax_cross_entropy(concat_cols(tape.constant(Tensor(1, 1)), s),
                                 pair.label == NspLabel::Positive ? 1 : 0);
  }

  /// Probability that `second` follows `first`.
  Real score(const std::vector<std::string>& first, const std::vector<std::string>& second) const {
    Tape tape;
    return kernels::sigmoid(logit(tape, params_, first, second).value()(0, 0));
  }

 private:
  Vocabulary vocab_;
  std::size_t embed_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  bool interaction_ = true;
  ParameterSet params_;
};

/// S = [S(0,1), ..., S(s-2,s-1)] for a document of s sentences.
inline std::vector<Real> score_document(const NspScorer& scorer, const Document& doc) {
  std::vector<Real> s;
  for (std::size_t j = 1; j < doc.sentences.size(); ++j) {
    s.push_back(scorer.score(detail::sentence_texts(doc, doc.sentences[j - 1]),
                             detail::sentence_texts(doc, doc.sentences[j])));
  }
  return s;
}

inline double nsp_accuracy(const NspScorer& scorer, const std::vector<NspPair>& pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const bool positive = scorer.score(p.first_sentence, p.second_sentence) > 0.5;
    correct += positive == (p.label == NspLabel::Positive) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

struct NspEpochLog {
  std::size_t epoch = 0;
  Real train_loss = 0.0;
  Real heldout_accuracy = 0.0;
};

struct NspTrainResult {
  NspScorer scorer;
  std::vector<NspEpochLog> log;
  std::vector<NspPair> heldout;
};

/// Splits pairs by source document into training and held-out parts.
inline std::pair<std::vector<NspPair>, std::vector<NspPair>> split_pairs_by_doc(const std::vector<NspPair>& pairs,
                                                                                Real holdout_fraction, Rng& rng) {
  std::vector<std::string> docs;
  for (const auto& p : pairs) {
    if (docs.empty() || docs.back() != p.source_doc) {
      if (std::find(docs.begin(), docs.end(), p.source_doc) == docs.end()) docs.push_back(p.source_doc);
    }
  }
  rng.shuffle(docs);
  std::size_t n_hold = static_cast<std::size_t>(holdout_fraction * static_cast<Real>(docs.size()));
  if (holdout_fraction > 0.0 && n_hold == 0 && docs.size() > 1) n_hold = 1;
  const std::set<std::string> held(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<NspPair> train, hold;
  for (const auto& p : pairs) (held.count(p.source_doc) ? hold : train).push_back(p);
  return {std::move(train), std::move(hold)};
}

/// Trains a scorer with AdamW on the cross-entropy of pair labels.
inline NspTrainResult train_nsp(const std::vector<NspPair>& pairs, const NspConfig& config) {
  if (pairs.empty()) throw Error("nsp-train: no training pairs");
  if (config.batch_size == 0 || config.epochs == 0) throw Error("nsp-train: batch size and epochs must be positive");
  Rng rng(config.seed);
  auto [train, heldout] = split_pairs_by_doc(pairs, config.holdout_fraction, rng);
  if (train.empty()) throw Error("nsp-train: held-out split left no training pairs");

  std::vector<std::string> words;
  {
    std::set<std::string> seen;
    for (const auto& p : train) {
      for (const auto* side : {&p.first_sentence, &p.second_sentence}) {
        for (const auto& w : *side) {
          std::string lw = detail::ascii_lower(w);
          if (seen.insert(lw).second) words.push_back(lw);
        }
      }
    }
  }
  NspScorer scorer(Vocabulary(std::move(words)), config.embed_dim, config.hidden_dim, config.interaction, rng);
  AdamW opt({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});

  NspTrainResult result{scorer, {}, heldout};
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    Real total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      Gradients acc;
      for (std::size_t k = b; k < e; ++k) {
        Tape tape;
        const Var l = scorer.loss(tape, scorer.params(), train[order[k]]);
        total += l.value()(0, 0);
        accumulate(acc, tape.backward(l));
      }
      scale_gradients(acc, 1.0 / static_cast<Real>(e - b));
      clip_global_norm(acc, config.clip_norm);
      opt.step(scorer.params(), acc);
    }
    result.log.push_back({epoch, total / static_cast<Real>(train.size()),
                          heldout.empty() ? 0.0 : nsp_accuracy(scorer, heldout)});
  }
  result.scorer = std::move(scorer);
  return result;
}

inline nlohmann::json nsp_to_json(const NspScorer& s) {
  return {{"format", "fast-nsp"},
          {"version", kParamFormatVersion},
          {"embed_dim", s.embed_dim()},
          {"hidden_dim", s.hidden_dim()},
          {"interaction", s.interaction()},
          {"vocab", s.vocabulary().words()},
          {"params", params_to_json(s.params())}};
}

inline NspScorer nsp_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "fast-nsp") throw Error("not an NSP scorer checkpoint");
    return NspScorer(Vocabulary(j.at("vocab").get<std::vector<std::string>>()), j.at("embed_dim").get<std::size_t>(),
                     j.at("hidden_dim").get<std::size_t>(), j.value("interaction", false), params_from_json(j.at("params")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed NSP checkpoint: ") + e.what());
  }
}

inline void save_nsp(const NspScorer& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << nsp_to_json(s).dump() << '\n';
}

inline NspScorer load_nsp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open NSP checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return nsp_from_json(j);
}

}  // namespace fast
