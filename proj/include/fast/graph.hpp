#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fast/entity.hpp"
#include "fast/tensor.hpp"
#include "fast/text.hpp"

namespace fast {

enum class EdgeKind { InnerSentence, InterSentence };

struct Edge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  EdgeKind kind = EdgeKind::InnerSentence;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Entity-mention nodes (id = position) with unordered, deduplicated edges.
struct FactualGraph {
  std::vector<EntityMention> nodes;
  std::vector<Edge> edges;  // sorted by (a, b)

  std::size_t size() const { return nodes.size(); }

  /// Binary symmetric adjacency without self-loops.
  Tensor adjacency() const {
    Tensor a(nodes.size(), nodes.size());
    for (const Edge& e : edges) {
      a(e.a, e.b) = 1.0;
      a(e.b, e.a) = 1.0;
    }
    return a;
  }
};

struct GraphOptions {
  double edge_sim_threshold = 0.5;
};

/// Inner-sentence edges between every pair of mentions sharing a sentence;
/// inter-sentence edges between literally similar mentions of different sentences.
inline FactualGraph build_graph(const Document& /*doc*/, const std::vector<EntityMention>& mentions,
                                const GraphOptions& opts = {}) {
  FactualGraph g;
  for (const auto& m : mentions) {
    if (!m.normalized.empty()) g.nodes.push_back(m);
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      if (g.nodes[i].sentence_idx == g.nodes[j].sentence_idx) {
        g.edges.push_back({i, j, EdgeKind::InnerSentence});
      } else if (literal_similarity(g.nodes[i], g.nodes[j]) >= opts.edge_sim_threshold) {
        g.edges.push_back({i, j, EdgeKind::InterSentence});
      }
    }
  }
  return g;
}

/// D^{-1/2} (A + I) D^{-1/2} with D the degree of A + I when `self_loops`
/// is set; otherwise D^{-1/2} A D^{-1/2} with 0/0 taken as 0 for isolated nodes.
inline Tensor normalized_adjacency(const FactualGraph& g, bool self_loops = true) {
  Tensor a = g.adjacency();
  const std::size_t n = g.size();
  if (self_loops) {
    for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  }
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  }
  return a;
}

/// {"nodes": [{"surface", "sentence"}...], "edges": [[i, j, "inner"|"inter"]...]}
inline nlohmann::json graph_to_json(const FactualGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& m : g.nodes) nodes.push_back({{"surface", m.surface}, {"sentence", m.sentence_idx}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) {
    edges.push_back({e.a, e.b, e.kind == EdgeKind::InnerSentence ? "inner" : "inter"});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

}  // namespace fast
