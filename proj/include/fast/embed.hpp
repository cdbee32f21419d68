#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fast/entity.hpp"
#include "fast/error.hpp"
#include "fast/params.hpp"
#include "fast/rng.hpp"
#include "fast/tensor.hpp"
#include "fast/text.hpp"

namespace fast {

/// Lowercased word types with id 0 reserved for unknown words.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() : words_{kUnkToken} {}

  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.empty() || words_.front() != kUnkToken) words_.insert(words_.begin(), kUnkToken);
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
  }

  /// Words in first-seen order over the corpus, keeping those seen at least `min_count` times.
  static Vocabulary build(const std::vector<Document>& corpus, std::size_t min_count = 1) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& doc : corpus) {
      for (const auto& t : doc.tokens) {
        const std::string w = detail::ascii_lower(t.text);
        if (counts[w]++ == 0) order.push_back(w);
      }
    }
    std::vector<std::string> kept;
    for (auto& w : order) {
      if (counts[w] >= min_count && w != kUnkToken) kept.push_back(std::move(w));
    }
    return Vocabulary(std::move(kept));
  }

  std::size_t id(const std::string& word) const {
    auto it = index_.find(detail::ascii_lower(word));
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<std::size_t> ids(const Document& doc, std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> out;
    for (std::size_t t = begin; t < end; ++t) out.push_back(id(doc.tokens[t].text));
    return out;
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-token vectors (|x| x d_w) and a global document vector (1 x d_w) on a tape.
struct WordRep {
  Var token_vectors;
  Var global_vector;
  std::size_t token_count = 0;
};

/// Plain-value snapshot of a WordRep.
struct WordRepOutput {
  Tensor token_vectors;
  Tensor global_vector;
};

/// Source of contextual word representations.
class WordProvider {
 public:
  virtual ~WordProvider() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t dim() const = 0;
  /// Adds the provider's trainable parameters, if any.
  virtual void declare(ParameterSet& params, Rng& rng) const = 0;
  virtual WordRep represent(Tape& tape, const ParameterSet& params, const Document& doc) const = 0;
};

/// Trainable lookup table; the global vector is the mean of the token vectors,
/// or a learned fallback row for empty documents.
class TrainableEmbedding final : public WordProvider {
 public:
  static constexpr const char* kTable = "embed.tokens";
  static constexpr const char* kFallback = "embed.fallback";

  TrainableEmbedding(Vocabulary vocab, std::size_t dim) : vocab_(std::move(vocab)), dim_(dim) {
    if (dim_ == 0) throw Error("embedding dimension must be positive");
  }

  std::string kind() const override { return "trainable"; }
  std::size_t dim() const override { return dim_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  void declare(ParameterSet& params, Rng& rng) const override {
    params.add(kTable, glorot_uniform(vocab_.size(), dim_, rng));
    params.add(kFallback, glorot_uniform(1, dim_, rng));
  }

  WordRep represent(Tape& tape, const ParameterSet& params, const Document& doc) const override {
    WordRep rep;
    rep.token_count = doc.tokens.size();
    if (doc.tokens.empty()) {
      rep.token_vectors = tape.constant(Tensor(0, dim_));
      rep.global_vector = params.bind(tape, kFallback);
      return rep;
    }
    rep.token_vectors = gather_rows(params.bind(tape, kTable), vocab_.ids(doc, 0, doc.tokens.size()));
    rep.global_vector = mean_rows(rep.token_vectors);
    return rep;
  }

 private:
  Vocabulary vocab_;
  std::size_t dim_;
};

/// Frozen per-token vectors exported by an external encoder, keyed by document id.
/// File format: JSONL of {"id": string, "vectors": [[...], ...], "global": [...] (optional)}.
class PrecomputedProvider final : public WordProvider {
 public:
  struct Entry {
    Tensor vectors;
    std::optional<Tensor> global;
  };

  PrecomputedProvider(std::map<std::string, Entry> entries, std::size_t dim)
      : entries_(std::move(entries)), dim_(dim) {}

  static PrecomputedProvider load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vectors file " + path);
    std::map<std::string, Entry> entries;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto rec = nlohmann::json::parse(line);
        const auto rows = rec.at("vectors").get<std::vector<std::vector<Real>>>();
        Entry e;
        e.vectors = rows.empty() ? Tensor() : Tensor::from_rows(rows);
        if (rec.contains("global")) e.global = Tensor::row(rec["global"].get<std::vector<Real>>());
        const std::size_t d = !rows.empty() ? e.vectors.cols() : (e.global ? e.global->cols() : dim);
        if (dim == 0) dim = d;
        if (d != dim || (e.global && e.global->cols() != dim)) {
          throw Error("vector dimension " + std::to_string(d) + " differs from " + std::to_string(dim));
        }
        if (rows.empty()) e.vectors = Tensor(0, dim);
        entries[rec.at("id").get<std::string>()] = std::move(e);
      } catch (const nlohmann::json::exception& ex) {
        throw Error(path + ": line " + std::to_string(line_no) + ": " + ex.what());
      } catch (const Error& ex) {
        throw Error(path + ": line " + std::to_string(line_no) + ": " + ex.what());
      }
    }
    if (dim == 0) throw Error(path + ": no vectors");
    return PrecomputedProvider(std::move(entries), dim);
  }

  std::string kind() const override { return "precomputed"; }
  std::size_t dim() const override { return dim_; }
  void declare(ParameterSet&, Rng&) const override {}

  WordRep represent(Tape& tape, const ParameterSet& /*params*/, const Document& doc) const override {
    auto it = entries_.find(doc.id);
    if (it == entries_.end()) throw Error("no precomputed vectors for document " + doc.id);
    const Entry& e = it->second;
    if (e.vectors.rows() != doc.tokens.size()) {
      throw Error("document " + doc.id + ": " + std::to_string(e.vectors.rows()) + " precomputed rows for " +
                  std::to_string(doc.tokens.size()) + " tokens");
    }
    WordRep rep;
    rep.token_count = doc.tokens.size();
    rep.token_vectors = tape.constant(e.vectors.rows() == 0 ? Tensor(0, dim_) : e.vectors);
    if (e.global) {
      rep.global_vector = tape.constant(*e.global);
    } else if (e.vectors.rows() > 0) {
      rep.global_vector = mean_rows(rep.token_vectors);
    } else {
      rep.global_vector = tape.constant(Tensor(1, dim_));
    }
    return rep;
  }

 private:
  std::map<std::string, Entry> entries_;
  std::size_t dim_;
};

inline WordRepOutput represent(const WordProvider& provider, const ParameterSet& params, const Document& doc) {
  Tape tape;
  WordRep rep = provider.represent(tape, params, doc);
  return {rep.token_vectors.value(), rep.global_vector.value()};
}

enum class MissPolicy { Zero, Unk };

/// External entity vectors keyed by normalized name (underscores read as spaces).
class EntityVecStore {
 public:
  static constexpr const char* kUnkParam = "entity.unk";

  EntityVecStore() = default;
  explicit EntityVecStore(std::size_t dim, MissPolicy policy = MissPolicy::Zero) : dim_(dim), policy_(policy) {}

  static std::string key(const std::string& name) {
    std::string spaced = name;
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    return normalize(spaced);
  }

  /// Inserts or replaces; returns false when the name was already present.
  bool insert(const std::string& name, std::vector<Real> vec) {
    if (vec.size() != dim_) {
      throw Error("entity vector for '" + name + "' has dimension " + std::to_string(vec.size()) + ", expected " +
                  std::to_string(dim_));
    }
    return vectors_.insert_or_assign(key(name), std::move(vec)).second;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  MissPolicy policy() const { return policy_; }
  void set_policy(MissPolicy p) { policy_ = p; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void warn(std::string w) { warnings_.push_back(std::move(w)); }
  const std::map<std::string, std::vector<Real>>& entries() const { return vectors_; }

  const std::vector<Real>* find(const std::string& normalized_name) const {
    auto it = vectors_.find(normalized_name);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  void declare(ParameterSet& params) const {
    if (policy_ == MissPolicy::Unk) params.add(kUnkParam, Tensor(1, dim_));
  }

  /// 1 x d_e vector for a mention: stored vector, else zeros or the shared UNK parameter.
  Var lookup(Tape& tape, const ParameterSet& params, const EntityMention& mention) const {
    if (const auto* v = find(mention.normalized)) return tape.constant(Tensor::row(*v));
    if (policy_ == MissPolicy::Unk) return params.bind(tape, kUnkParam);
    return tape.constant(Tensor(1, dim_));
  }

  Tensor lookup_value(const EntityMention& mention, const ParameterSet* params = nullptr) const {
    if (const auto* v = find(mention.normalized)) return Tensor::row(*v);
    if (policy_ == MissPolicy::Unk && params != nullptr) return params->get(kUnkParam);
    return Tensor(1, dim_);
  }

 private:
  std::size_t dim_ = 100;
  MissPolicy policy_ = MissPolicy::Zero;
  std::map<std::string, std::vector<Real>> vectors_;
  std::vector<std::string> warnings_;
};

/// word2vec-style text: "count dim" header, then "name v1 ... v_dim" per line.
inline EntityVecStore load_vectors_stream(std::istream& in, const std::string& source = "vectors") {
  std::string line;
  if (!std::getline(in, line)) throw Error(source + ": empty vectors file");
  std::istringstream header(line);
  std::size_t count = 0;
  std::size_t dim = 0;
  if (!(header >> count >> dim) || dim == 0) throw Error(source + ": line 1: expected \"count dim\" header");
  EntityVecStore store(dim);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string name;
    if (!(fields >> name)) continue;
    std::vector<Real> vec;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(source + ": line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
    }
    if (vec.size() != dim) {
      throw Error(source + ": line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                  " values, found " + std::to_string(vec.size()));
    }
    if (!store.insert(name, std::move(vec))) {
      store.warn(source + ": line " + std::to_string(line_no) + ": duplicate entry '" + name + "', last one wins");
    }
    ++rows;
  }
  if (rows != count) {
    store.warn(source + ": header declares " + std::to_string(count) + " vectors, found " + std::to_string(rows));
  }
  return store;
}

inline EntityVecStore load_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open entity vectors file " + path);
  return load_vectors_stream(in, path);
}

inline void save_vectors(const EntityVecStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << store.size() << ' ' << store.dim() << '\n';
  out << std::setprecision(17);
  for (const auto& [name, vec] : store.entries()) {
    std::string key = name;
    std::replace(key.begin(), key.end(), ' ', '_');
    out << key;
    for (Real v : vec) out << ' ' << v;
    out << '\n';
  }
}

}  // namespace fast
