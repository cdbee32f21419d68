#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fast/embed.hpp"
#include "fast/entity.hpp"
#include "fast/error.hpp"
#include "fast/graph.hpp"
#include "fast/nsp.hpp"
#include "fast/params.hpp"
#include "fast/rng.hpp"
#include "fast/tensor.hpp"
#include "fast/text.hpp"

namespace fast {

/// Architecture sizes and ablation switches of the detector.
struct ModelConfig {
  std::size_t context_dim = 32;   // d_c: width of each half of a node's initial state
  std::size_t sentence_dim = 64;  // d_s
  std::size_t hidden_dim = 64;    // d_h
  std::size_t gcn_layers = 2;     // m
  bool use_wiki = true;
  bool use_gcn = true;
  bool use_lstm = true;
  bool use_nsp = true;
  bool use_structure = true;  // false: the classifier sees only the global vector
  bool self_loops = true;
  double edge_sim_threshold = 0.5;
  double dropout = 0.0;  // on the classifier input, training only

  std::size_t node_dim() const { return 2 * context_dim; }

  /// Full-size setting: 100-wide contextual node features, 200-wide LSTM.
  static ModelConfig paper() {
    ModelConfig c;
    c.context_dim = 100;
    c.sentence_dim = 200;
    c.hidden_dim = 200;
    return c;
  }

  /// Classifier over the global vector alone.
  static ModelConfig global_only(ModelConfig base) {
    base.use_gcn = false;
    base.use_lstm = false;
    base.use_nsp = false;
    base.use_structure = false;
    base.hidden_dim = base.sentence_dim;
    return base;
  }

  void validate() const {
    if (context_dim == 0 || sentence_dim == 0 || hidden_dim == 0) throw Error("model dimensions must be positive");
    if (!use_lstm && hidden_dim != sentence_dim) {
      throw Error("with use_lstm off, hidden_dim (" + std::to_string(hidden_dim) + ") must equal sentence_dim (" +
                  std::to_string(sentence_dim) + ")");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must lie in [0, 1)");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"context_dim", c.context_dim}, {"sentence_dim", c.sentence_dim}, {"hidden_dim", c.hidden_dim},
       {"gcn_layers", c.gcn_layers},   {"use_wiki", c.use_wiki},         {"use_gcn", c.use_gcn},
       {"use_lstm", c.use_lstm},       {"use_nsp", c.use_nsp},           {"use_structure", c.use_structure},
       {"self_loops", c.self_loops},   {"edge_sim_threshold", c.edge_sim_threshold},
       {"dropout", c.dropout}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.context_dim = j.at("context_dim");
  c.sentence_dim = j.at("sentence_dim");
  c.hidden_dim = j.at("hidden_dim");
  c.gcn_layers = j.at("gcn_layers");
  c.use_wiki = j.at("use_wiki");
  c.use_gcn = j.at("use_gcn");
  c.use_lstm = j.at("use_lstm");
  c.use_nsp = j.at("use_nsp");
  c.use_structure = j.at("use_structure");
  c.self_loops = j.at("self_loops");
  c.edge_sim_threshold = j.at("edge_sim_threshold");
  c.dropout = j.value("dropout", 0.0);
}

/// Everything about one document that does not depend on trainable parameters.
struct PreparedDoc {
  const Document* doc = nullptr;
  FactualGraph graph;
  Tensor adjacency;              // normalized, N x N
  std::vector<Real> nsp_scores;  // length max(0, sentences - 1)
};

/// Tape handles of one forward pass.
struct ForwardVars {
  Var node_init;                 // H0, N x d (unset when N = 0)
  std::vector<Var> node_layers;  // H1..Hm
  Var sentences;                 // y, S x d_s (unset when S = 0)
  Var coherence;                 // y~, S x d_h (unset when S = 0)
  Var document;                  // D_doc, 1 x 2 d_h
  Var global;                    // 1 x d_w
  Var logits;                    // 1 x 2
};

/// Plain values of one forward pass. Class order is (human, machine).
struct ForwardTrace {
  Tensor node_init;
  std::vector<Tensor> node_layers;
  Tensor sentences;
  Tensor coherence;
  Tensor document;
  Tensor global;
  Tensor logits;
  Real p_human = 0.5;
  Real p_machine = 0.5;

  bool all_finite() const {
    bool ok = node_init.all_finite() && sentences.all_finite() && coherence.all_finite() && document.all_finite() &&
              global.all_finite() && logits.all_finite() && std::isfinite(p_human) && std::isfinite(p_machine);
    for (const auto& t : node_layers) ok = ok && t.all_finite();
    return ok;
  }
};

/// Argmax with exact ties going to Human.
inline Label predicted_label(Real p_machine) { return p_machine > 1.0 - p_machine ? Label::Machine : Label::Human; }

namespace lstm_names {
inline const char* const kGates[4] = {"i", "f", "o", "g"};
inline std::string w(const char* g) { return std::string("lstm.W_") + g; }
inline std::string u(const char* g) { return std::string("lstm.U_") + g; }
inline std::string b(const char* g) { return std::string("lstm.b_") + g; }
}  // namespace lstm_names

/// Entity-graph detector: node initialization from word and entity vectors,
/// graph convolution, per-sentence pooling, an LSTM over sentences, coherence
/// weighted pair aggregation, and a two-way classifier that also sees the
/// document's global vector.
class FastModel {
 public:
  FastModel(ModelConfig config, std::shared_ptr<const WordProvider> provider, EntityVecStore store,
            std::shared_ptr<const NspScorer> nsp, std::uint64_t seed)
      : config_(config), provider_(std::move(provider)), store_(std::move(store)), nsp_(std::move(nsp)) {
    config_.validate();
    if (!provider_) throw Error("model: a word provider is required");
    Rng rng(seed);
    provider_->declare(params_, rng);
    store_.declare(params_);
    const std::size_t dw = provider_->dim();
    const std::size_t de = store_.dim();
    const std::size_t dc = config_.context_dim;
    const std::size_t d = config_.node_dim();
    const std::size_t ds = config_.sentence_dim;
    const std::size_t dh = config_.hidden_dim;
    params_.add("node.W_B", glorot_uniform(dw, dc, rng));
    params_.add("node.W_w", glorot_uniform(de, dc, rng));
    for (std::size_t i = 0; i < config_.gcn_layers; ++i) params_.add(gcn_name(i), glorot_uniform(d, d, rng));
    params_.add("sent.W_s", glorot_uniform(d, ds, rng));
    params_.add("sent.b_s", Tensor(1, ds));
    params_.add("sent.no_entity", glorot_uniform(1, ds, rng));
    if (config_.use_lstm) {
      for (const char* g : lstm_names::kGates) {
        params_.add(lstm_names::w(g), glorot_uniform(ds, dh, rng));
        params_.add(lstm_names::u(g), glorot_uniform(dh, dh, rng));
        params_.add(lstm_names::b(g), Tensor(1, dh, std::string(g) == "f" ? 1.0 : 0.0));
      }
    }
    params_.add("cls.W", glorot_uniform(2 * dh + dw, 2, rng));
    params_.add("cls.b", Tensor(1, 2));
  }

  /// Restores a model from saved parameters; shapes are checked against the config.
  FastModel(ModelConfig config, std::shared_ptr<const WordProvider> provider, EntityVecStore store,
            std::shared_ptr<const NspScorer> nsp, ParameterSet params)
      : FastModel(config, provider, store, nsp, std::uint64_t{0}) {
    for (auto& [name, t] : params_) {
      if (!params.contains(name)) throw Error("checkpoint lacks parameter '" + name + "'");
      set_param(name, params.get(name));
    }
  }

  static std::string gcn_name(std::size_t i) { return "gcn.W" + std::to_string(i); }

  const ModelConfig& config() const { return config_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }
  const WordProvider& provider() const { return *provider_; }
  std::shared_ptr<const WordProvider> provider_ptr() const { return provider_; }
  const EntityVecStore& store() const { return store_; }
  const NspScorer* nsp() const { return nsp_.get(); }
  std::shared_ptr<const NspScorer> nsp_ptr() const { return nsp_; }

  void set_param(const std::string& name, const Tensor& value) { params_.set(name, value); }

  /// Swaps the entity store; dimension must match.
  void set_store(EntityVecStore store) {
    if (store.dim() != store_.dim()) throw Error("entity store dimension changed");
    store_ = std::move(store);
  }

  /// Entity extraction, graph construction, adjacency and NSP scores for one document.
  PreparedDoc prepare(const Document& doc) const {
    PreparedDoc p;
    p.doc = &doc;
    p.graph = build_graph(doc, extract_entities(doc), GraphOptions{config_.edge_sim_threshold});
    p.adjacency = normalized_adjacency(p.graph, config_.self_loops);
    if (config_.use_nsp && config_.use_structure) {
      if (!nsp_) throw Error("model: use_nsp is on but no NSP scorer was supplied");
      p.nsp_scores = score_document(*nsp_, doc);
    } else {
      p.nsp_scores.assign(doc.sentences.empty() ? 0 : doc.sentences.size() - 1, 1.0);
    }
    return p;
  }

  /// H0 = [ReLU(mean token vectors . W_B) ; ReLU(v_e . W_w)] per node (N x 2 d_c).
  Var init_nodes(Tape& tape, const ParameterSet& params, const WordRep& words, const FactualGraph& graph) const {
    const std::size_t n = graph.size();
    Tensor averaging(n, words.token_count);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = graph.nodes[i];
      if (m.token_end > words.token_count || m.token_start >= m.token_end) {
        throw Error("node " + std::to_string(i) + " spans invalid tokens");
      }
      const Real w = 1.0 / static_cast<Real>(m.token_end - m.token_start);
      for (std::size_t t = m.token_start; t < m.token_end; ++t) averaging(i, t) = w;
    }
    const Var contextual =
        relu(matmul(matmul(tape.constant(std::move(averaging)), words.token_vectors), params.bind(tape, "node.W_B")));
    Var external;
    if (config_.use_wiki) {
      std::vector<Var> rows;
      for (const auto& m : graph.nodes) rows.push_back(store_.lookup(tape, params, m));
      external = relu(matmul(concat_rows(rows), params.bind(tape, "node.W_w")));
    } else {
      external = tape.constant(Tensor(n, config_.context_dim));
    }
    return concat_cols(contextual, external);
  }

  /// H(i+1) = ReLU(A~ H(i) W_i) for each layer.
  std::vector<Var> gcn_forward(Tape& tape, const ParameterSet& params, const Var& h0, const Tensor& adjacency) const {
    if (adjacency.rows() != h0.rows() || adjacency.cols() != h0.rows()) {
      throw Error("gcn: adjacency " + adjacency.shape_string() + " does not match node states " +
                  h0.value().shape_string());
    }
    std::vector<Var> layers;
    if (!config_.use_gcn) return layers;
    const Var a = tape.constant(adjacency);
    Var h = h0;
    for (std::size_t i = 0; i < config_.gcn_layers; ++i) {
      h = relu(matmul(matmul(a, h), params.bind(tape, gcn_name(i))));
      layers.push_back(h);
    }
    return layers;
  }

  /// y_i = mean over the nodes of sentence i of ReLU(H W_s + b_s); the learned
  /// no-entity row for sentences without nodes.
  Var sentence_reps(Tape& tape, const ParameterSet& params, const std::optional<Var>& nodes, const FactualGraph& graph,
                    std::size_t sentence_count) const {
    const std::size_t n = graph.size();
    std::vector<std::size_t> per_sentence(sentence_count, 0);
    for (const auto& m : graph.nodes) {
      if (m.sentence_idx >= sentence_count) throw Error("node references missing sentence");
      ++per_sentence[m.sentence_idx];
    }
    Tensor empty_indicator(sentence_count, 1);
    for (std::size_t s = 0; s < sentence_count; ++s) empty_indicator(s, 0) = per_sentence[s] == 0 ? 1.0 : 0.0;
    Var fallback = matmul(tape.constant(std::move(empty_indicator)), params.bind(tape, "sent.no_entity"));
    if (n == 0) return fallback;
    Tensor pooling(sentence_count, n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = graph.nodes[i].sentence_idx;
      pooling(s, i) = 1.0 / static_cast<Real>(per_sentence[s]);
    }
    const Var z = relu(add(matmul(*nodes, params.bind(tape, "sent.W_s")), params.bind(tape, "sent.b_s")));
    return add(matmul(tape.constant(std::move(pooling)), z), fallback);
  }

  /// Unidirectional LSTM with zero initial states; returns every hidden state.
  /// Identity when use_lstm is off.
  Var coherence_lstm(Tape& tape, const ParameterSet& params, const Var& y) const {
    if (!config_.use_lstm) return y;
    if (y.rows() == 0) throw Error("lstm: empty sequence");
    using namespace lstm_names;
    Var h = tape.constant(Tensor(1, config_.hidden_dim));
    Var c = tape.constant(Tensor(1, config_.hidden_dim));
    auto gate = [&](const char* g, const Var& x, const Var& hp) {
      return add(add(matmul(x, params.bind(tape, w(g))), matmul(hp, params.bind(tape, u(g)))),
                 params.bind(tape, b(g)));
    };
    std::vector<Var> states;
    for (std::size_t t = 0; t < y.rows(); ++t) {
      const Var x = slice_rows(y, t, t + 1);
      const Var i = sigmoid(gate("i", x, h));
      const Var f = sigmoid(gate("f", x, h));
      const Var o = sigmoid(gate("o", x, h));
      const Var g = tanh(gate("g", x, h));
      c = add(mul(f, c), mul(i, g));
      h = mul(o, tanh(c));
      states.push_back(h);
    }
    return concat_rows(states);
  }

  /// D_doc = sum_j S_j [y~_{j-1} ; y~_j] (weights 1 with use_nsp off, zeros when
  /// no pair exists) and logits = [D_doc ; global] W_c + b_c.
  std::pair<Var, Var> aggregate(Tape& tape, const ParameterSet& params, const std::optional<Var>& coherence,
                                const std::vector<Real>& scores, const Var& global, Rng* dropout_rng = nullptr) const {
    const std::size_t dh = config_.hidden_dim;
    const std::size_t s = coherence ? coherence->rows() : 0;
    const std::size_t pairs = s == 0 ? 0 : s - 1;
    if (config_.use_structure && scores.size() != pairs) {
      throw Error("aggregate: " + std::to_string(scores.size()) + " coherence scores for " + std::to_string(pairs) +
                  " sentence pairs");
    }
    Var document;
    if (!config_.use_structure || pairs == 0) {
      document = tape.constant(Tensor(1, 2 * dh));
    } else {
      Tensor left(1, s);
      Tensor right(1, s);
      for (std::size_t j = 1; j < s; ++j) {
        const Real w = config_.use_nsp ? scores[j - 1] : 1.0;
        left(0, j - 1) += w;
        right(0, j) += w;
      }
      document = concat_cols(matmul(tape.constant(std::move(left)), *coherence),
                             matmul(tape.constant(std::move(right)), *coherence));
    }
    Var input = concat_cols(document, global);
    if (dropout_rng != nullptr && config_.dropout > 0.0) {
      Tensor mask(1, input.cols());
      const Real keep = 1.0 - config_.dropout;
      for (Real& v : mask.data()) v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      input = mul(input, tape.constant(std::move(mask)));
    }
    const Var logits = add(matmul(input, params.bind(tape, "cls.W")), params.bind(tape, "cls.b"));
    return {document, logits};
  }

  /// Full pass on a tape. `dropout_rng` enables training-time dropout.
  ForwardVars forward(Tape& tape, const ParameterSet& params, const PreparedDoc& prep, Rng* dropout_rng = nullptr) const {
    const Document& doc = *prep.doc;
    ForwardVars out;
    const WordRep words = provider_->represent(tape, params, doc);
    out.global = words.global_vector;
    std::optional<Var> coherence;
    if (config_.use_structure && !doc.sentences.empty()) {
      std::optional<Var> nodes;
      if (prep.graph.size() > 0) {
        out.node_init = init_nodes(tape, params, words, prep.graph);
        out.node_layers = gcn_forward(tape, params, out.node_init, prep.adjacency);
        nodes = out.node_layers.empty() ? out.node_init : out.node_layers.back();
      }
      out.sentences = sentence_reps(tape, params, nodes, prep.graph, doc.sentences.size());
      out.coherence = coherence_lstm(tape, params, out.sentences);
      coherence = out.coherence;
    }
    auto [document, logits] = aggregate(tape, params, coherence, prep.nsp_scores, out.global, dropout_rng);
    out.document = document;
    out.logits = logits;
    return out;
  }

  Var loss(Tape& tape, const ParameterSet& params, const PreparedDoc& prep, Label target,
           Rng* dropout_rng = nullptr) const {
    return softmax_cross_entropy(forward(tape, params, prep, dropout_rng).logits, static_cast<std::size_t>(target));
  }

  ForwardTrace trace(const PreparedDoc& prep) const {
    Tape tape;
    const ForwardVars v = forward(tape, params_, prep);
    ForwardTrace t;
    auto val = [](const Var& x) { return x.tape() ? x.value() : Tensor(); };
    t.node_init = val(v.node_init);
    for (const auto& l : v.node_layers) t.node_layers.push_back(l.value());
    t.sentences = val(v.sentences);
    t.coherence = val(v.coherence);
    t.document = v.document.value();
    t.global = v.global.value();
    t.logits = v.logits.value();
    const auto p = kernels::softmax(t.logits.data());
    t.p_human = p[0];
    t.p_machine = p[1];
    return t;
  }

  Real p_machine(const PreparedDoc& prep) const { return trace(prep).p_machine; }

 private:
  ModelConfig config_;
  std::shared_ptr<const WordProvider> provider_;
  EntityVecStore store_;
  std::shared_ptr<const NspScorer> nsp_;
  ParameterSet params_;
};

/// Model checkpoint (JSON):
///   {"format": "fast-model", "version": 1, "config": {...},
///    "provider": {"kind": "trainable", "dim": d_w, "vocab": [...]} | {"kind": "precomputed", "dim": d_w},
///    "entities": {"dim": d_e, "policy": "zero"|"unk", "vectors": {name: [...]}},
///    "nsp": <NSP checkpoint> | null, "params": {...}}
inline void save_model(const FastModel& model, const std::string& path) {
  nlohmann::json provider = {{"kind", model.provider().kind()}, {"dim", model.provider().dim()}};
  if (const auto* te = dynamic_cast<const TrainableEmbedding*>(&model.provider())) {
    provider["vocab"] = te->vocabulary().words();
  }
  nlohmann::json entities = {{"dim", model.store().dim()},
                             {"policy", model.store().policy() == MissPolicy::Zero ? "zero" : "unk"},
                             {"vectors", model.store().entries()}};
  nlohmann::json doc = {{"format", "fast-model"},
                        {"version", kParamFormatVersion},
                        {"config", model.config()},
                        {"provider", provider},
                        {"entities", entities},
                        {"nsp", model.nsp() ? nsp_to_json(*model.nsp()) : nlohmann::json()},
                        {"params", params_to_json(model.params())}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump() << '\n';
}

/// Loads a model. A precomputed-vector model needs the vectors for the documents
/// it will see, passed as `precomputed`.
inline FastModel load_model(const std::string& path, std::shared_ptr<const WordProvider> precomputed = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
    if (j.value("format", "") != "fast-model" || j.value("version", 0) != kParamFormatVersion) {
      throw Error(path + ": not a version " + std::to_string(kParamFormatVersion) + " model checkpoint");
    }
    const ModelConfig config = j.at("config").get<ModelConfig>();
    const auto& pj = j.at("provider");
    std::shared_ptr<const WordProvider> provider;
    if (pj.at("kind") == "trainable") {
      provider = std::make_shared<TrainableEmbedding>(Vocabulary(pj.at("vocab").get<std::vector<std::string>>()),
                                                      pj.at("dim").get<std::size_t>());
    } else {
      if (!precomputed) throw Error(path + ": model uses precomputed word vectors; supply a vectors file");
      if (precomputed->dim() != pj.at("dim").get<std::size_t>()) throw Error("precomputed vector dimension mismatch");
      provider = std::move(precomputed);
    }
    const auto& ej = j.at("entities");
    EntityVecStore store(ej.at("dim").get<std::size_t>(), ej.at("policy") == "unk" ? MissPolicy::Unk : MissPolicy::Zero);
    for (const auto& [name, vec] : ej.at("vectors").items()) store.insert(name, vec.get<std::vector<Real>>());
    std::shared_ptr<const NspScorer> nsp;
    if (!j.at("nsp").is_null()) nsp = std::make_shared<NspScorer>(nsp_from_json(j.at("nsp")));
    return FastModel(config, provider, std::move(store), nsp, params_from_json(j.at("params")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": malformed model checkpoint: " + e.what());
  }
}

}  // namespace fast
