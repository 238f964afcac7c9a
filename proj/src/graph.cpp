#include "gmn/graph.hpp"

#include <stdexcept>

namespace gmn {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kVisual: return "visual";
    case Modality::kSemantic: return "semantic";
    case Modality::kCommonsense: return "commonsense";
  }
  return "?";
}

const HeteroGraph& MultiLayerGraph::layer(Modality m) const {
  switch (m) {
    case Modality::kVisual: return visual;
    case Modality::kSemantic: return semantic;
    case Modality::kCommonsense: return commonsense;
  }
  return visual;
}

int AttentionMap::argmax() const {
  int best = 0;
  for (int i = 1; i < weights.dim(0); ++i)
    if (weights.at(i) > weights.at(best)) best = i;
  return best;
}

AttentionMap uniform_attention(const HeteroGraph& g) {
  if (g.num_nodes() < 1) throw std::invalid_argument("uniform_attention: empty graph");
  return {g.modality, Tensor::full({g.num_nodes()}, 1.0 / g.num_nodes())};
}

AttentionMap l1_normalize(Tape& tp, const AttentionMap& a) {
  return {a.graph, tp.norm_l1(a.weights)};
}

std::vector<std::string> validate_graph(const HeteroGraph& g) {
  std::vector<std::string> violations;
  const int n = g.num_nodes();
  if (n < 1) violations.push_back("graph has no nodes");
  if (!g.node_features.defined() || g.node_features.ndim() != 2) {
    violations.push_back("node feature matrix missing or not 2-d");
  } else if (g.node_features.dim(0) != n) {
    violations.push_back("node feature rows (" + std::to_string(g.node_features.dim(0)) +
                         ") do not match node count (" + std::to_string(n) + ")");
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& [i, j] = g.edges[e];
    if (i < 0 || i >= n || j < 0 || j >= n)
      violations.push_back("edge " + std::to_string(e) + " endpoint (" + std::to_string(i) + "," +
                           std::to_string(j) + ") outside [0," + std::to_string(n) + ")");
  }
  const int rows = g.edge_features.defined() ? g.edge_features.dim(0) : 0;
  if (rows != g.num_edges() && !(g.edges.empty() && !g.edge_features.defined()))
    violations.push_back("edge feature rows (" + std::to_string(rows) + ") do not match edge count (" +
                         std::to_string(g.num_edges()) + ")");
  if (!g.edge_labels.empty() && g.edge_labels.size() != g.edges.size())
    violations.push_back("edge label count does not match edge count");
  return violations;
}

HeteroGraph placeholder_graph(const HeteroGraph& like) {
  HeteroGraph g;
  g.modality = like.modality;
  g.node_labels = {"<none>"};
  g.node_features = Tensor::zeros({1, like.node_dim() > 0 ? like.node_dim() : 1});
  return g;
}

}  // namespace gmn
