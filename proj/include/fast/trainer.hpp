#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fast/embed.hpp"
#include "fast/error.hpp"
#include "fast/eval.hpp"
#include "fast/model.hpp"
#include "fast/nsp.hpp"
#include "fast/optim.hpp"
#include "fast/parallel.hpp"
#include "fast/rng.hpp"
#include "fast/text.hpp"

namespace fast {

struct TrainConfig {
  Real learning_rate = 1e-5;
  std::size_t batch_size = 4;
  std::size_t epochs = 3;
  std::uint64_t seed = 42;
  Real weight_decay = 0.01;
  Real clip_norm = 1.0;
  std::size_t threads = 1;
  std::size_t embed_dim = 64;
  std::size_t entity_dim = 100;
  std::string miss_policy = "zero";
  ModelConfig model = ModelConfig::paper();

  /// Full-size defaults: lr 1e-5, batch 4, 100-wide node and entity features.
  static TrainConfig paper() { return TrainConfig{}; }

  /// Settings for CPU-sized corpora.
  static TrainConfig desk() {
    TrainConfig c;
    c.learning_rate = 1e-3;
    c.batch_size = 8;
    c.epochs = 10;
    c.model = ModelConfig{};
    return c;
  }

  void validate() const {
    if (!(learning_rate >= 0.0)) throw Error("learning_rate must be non-negative");
    if (batch_size == 0) throw Error("batch_size must be at least 1");
    if (epochs == 0) throw Error("epochs must be at least 1");
    if (miss_policy != "zero" && miss_policy != "unk") throw Error("miss_policy must be zero or unk");
    model.validate();
  }

  /// Sets one key from its text form; unknown keys are errors.
  void set(const std::string& key, const std::string& value) {
    auto as_real = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw Error("config key '" + key + "': expected a number, got '" + value + "'");
      }
    };
    auto as_size = [&] {
      const double v = as_real();
      if (v < 0 || v != std::floor(v)) throw Error("config key '" + key + "': expected a non-negative integer");
      return static_cast<std::size_t>(v);
    };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw Error("config key '" + key + "': expected true or false, got '" + value + "'");
    };
    if (key == "learning_rate") learning_rate = as_real();
    else if (key == "batch_size") batch_size = as_size();
    else if (key == "epochs") epochs = as_size();
    else if (key == "seed") seed = as_size();
    else if (key == "weight_decay") weight_decay = as_real();
    else if (key == "clip_norm") clip_norm = as_real();
    else if (key == "threads") threads = as_size();
    else if (key == "embed_dim") embed_dim = as_size();
    else if (key == "entity_dim") entity_dim = as_size();
    else if (key == "miss_policy") miss_policy = value;
    else if (key == "context_dim") model.context_dim = as_size();
    else if (key == "sentence_dim") model.sentence_dim = as_size();
    else if (key == "hidden_dim") model.hidden_dim = as_size();
    else if (key == "gcn_layers") model.gcn_layers = as_size();
    else if (key == "use_wiki") model.use_wiki = as_bool();
    else if (key == "use_gcn") model.use_gcn = as_bool();
    else if (key == "use_lstm") model.use_lstm = as_bool();
    else if (key == "use_nsp") model.use_nsp = as_bool();
    else if (key == "use_structure") model.use_structure = as_bool();
    else if (key == "self_loops") model.self_loops = as_bool();
    else if (key == "edge_sim_threshold") model.edge_sim_threshold = as_real();
    else if (key == "dropout") model.dropout = as_real();
    else throw Error("unknown config key '" + key + "'");
  }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "learning_rate", "batch_size", "epochs",     "seed",        "weight_decay",  "clip_norm",
        "threads",       "embed_dim",  "entity_dim", "miss_policy", "context_dim",   "sentence_dim",
        "hidden_dim",    "gcn_layers", "use_wiki",   "use_gcn",     "use_lstm",      "use_nsp",
        "use_structure", "self_loops", "edge_sim_threshold",        "dropout"};
    return k;
  }
};

/// Parses "key = value" lines; '#' starts a comment, blank lines are ignored.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(source + ": line " + std::to_string(line_no) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

inline void apply_config_file(TrainConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  for (const auto& [k, v] : parse_key_values(in, path)) {
    try {
      config.set(k, v);
    } catch (const Error& e) {
      throw Error(path + ": " + e.what());
    }
  }
}

struct MetricRow {
  std::size_t epoch = 0;
  std::string split;
  Real loss = 0.0;
  Real unpaired_acc = 0.0;
  std::optional<Real> paired_acc;
};

/// `epoch,split,loss,unpaired_acc,paired_acc`; paired_acc is blank when undefined.
inline void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& out) {
  out << "epoch,split,loss,unpaired_acc,paired_acc\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.unpaired_acc << ',';
    if (r.paired_acc) out << *r.paired_acc;
    out << '\n';
  }
}

struct TrainResult {
  FastModel model;
  std::vector<MetricRow> log;
  std::size_t best_epoch = 0;
};

/// Extra inputs to training beyond the two corpora.
struct TrainResources {
  std::shared_ptr<const WordProvider> provider;  // defaults to a trainable embedding over the training corpus
  std::optional<EntityVecStore> entities;        // defaults to an empty store of entity_dim
  std::shared_ptr<const NspScorer> nsp;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull + (a << 6) + (a >> 2));
  x ^= x >> 31;
  return x * 0xBF58476D1CE4E5B9ull;
}

struct DocStep {
  Gradients grads;
  Real loss = 0.0;
  Real p_machine = 0.5;
};

}  // namespace detail

inline FastModel make_model(const std::vector<Document>& train_docs, const TrainConfig& config,
                            const TrainResources& res) {
  std::shared_ptr<const WordProvider> provider = res.provider;
  if (!provider) provider = std::make_shared<TrainableEmbedding>(Vocabulary::build(train_docs), config.embed_dim);
  EntityVecStore store = res.entities ? *res.entities : EntityVecStore(config.entity_dim);
  store.set_policy(config.miss_policy == "unk" ? MissPolicy::Unk : MissPolicy::Zero);
  return FastModel(config.model, provider, std::move(store), res.nsp, config.seed);
}

/// Mini-batch AdamW on cross-entropy, clipping by global norm. Per-document
/// gradients may be computed on several threads; they are summed in document
/// order so results do not depend on the thread count. Keeps the parameters of
/// the epoch with the best validation accuracy (earliest on ties).
inline TrainResult train(const std::vector<Document>& train_docs, const std::vector<Document>& valid_docs,
                         const TrainConfig& config, const TrainResources& res = {}) {
  config.validate();
  bool has_h = false, has_m = false;
  for (const auto& d : train_docs) {
    if (!d.label) throw Error("training document " + d.id + " has no label");
    (*d.label == Label::Human ? has_h : has_m) = true;
  }
  if (!has_h || !has_m) throw Error("training corpus must contain both human and machine documents");

  FastModel model = make_model(train_docs, config, res);
  const auto prep_train = parallel_map(train_docs.size(), config.threads,
                                       [&](std::size_t i) { return model.prepare(train_docs[i]); });
  const auto prep_valid = parallel_map(valid_docs.size(), config.threads,
                                       [&](std::size_t i) { return model.prepare(valid_docs[i]); });
  const bool valid_paired = has_valid_pairs(valid_docs);

  AdamW opt({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result{model, {}, 0};
  std::optional<std::size_t> best_correct;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    Real loss_sum = 0.0;
    std::vector<Prediction> train_preds(train_docs.size());
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      const auto steps = parallel_map(e - b, config.threads, [&](std::size_t k) {
        const std::size_t doc = order[b + k];
        Rng drop(detail::mix_seed(config.seed, epoch * 1000003ull + doc));
        Tape tape;
        const ForwardVars fv = model.forward(tape, model.params(), prep_train[doc], &drop);
        const Var loss = softmax_cross_entropy(fv.logits, static_cast<std::size_t>(*train_docs[doc].label));
        detail::DocStep s;
        s.loss = loss.value()(0, 0);
        s.p_machine = kernels::softmax(fv.logits.value().data())[1];
        s.grads = tape.backward(loss);
        return s;
      });
      Gradients acc;
      for (std::size_t k = 0; k < steps.size(); ++k) {
        accumulate(acc, steps[k].grads);
        loss_sum += steps[k].loss;
        train_preds[order[b + k]] = make_prediction(train_docs[order[b + k]], steps[k].p_machine);
      }
      scale_gradients(acc, 1.0 / static_cast<Real>(e - b));
      clip_global_norm(acc, config.clip_norm);
      opt.step(model.params(), acc);
    }
    const EvalResult train_eval = evaluate_unpaired(train_preds);
    result.log.push_back({epoch, "train", loss_sum / static_cast<Real>(train_docs.size()),
                          train_eval.unpaired_accuracy(), std::nullopt});

    if (valid_docs.empty()) {
      result.model = model;
      result.best_epoch = epoch;
      continue;
    }
    const auto valid_steps = parallel_map(valid_docs.size(), config.threads, [&](std::size_t i) {
      const ForwardTrace t = model.trace(prep_valid[i]);
      return std::pair<Real, Real>{-std::log(std::max(valid_docs[i].label == Label::Machine ? t.p_machine : t.p_human,
                                                       1e-300)),
                                   t.p_machine};
    });
    std::vector<Prediction> valid_preds;
    Real valid_loss = 0.0;
    for (std::size_t i = 0; i < valid_docs.size(); ++i) {
      valid_loss += valid_steps[i].first;
      valid_preds.push_back(make_prediction(valid_docs[i], valid_steps[i].second));
    }
    const EvalResult ve = valid_paired ? evaluate_paired(valid_docs, valid_preds) : evaluate_unpaired(valid_preds);
    result.log.push_back({epoch, "valid", valid_loss / static_cast<Real>(valid_docs.size()), ve.unpaired_accuracy(),
                          ve.paired_accuracy()});
    if (!best_correct || ve.correct > *best_correct) {
      best_correct = ve.correct;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace fast
