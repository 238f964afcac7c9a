#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gmn/tensor.hpp"

namespace gmn {

enum class Modality { kVisual, kSemantic, kCommonsense };

const char* modality_name(Modality m);

// One modality layer: labeled nodes with dense features and directed,
// feature-carrying edges. Graphs are immutable once built and safe to
// share read-only across threads. edge_labels is diagnostic metadata
// (relation names where the source data has them) and may hold empty
// strings.
struct HeteroGraph {
  Modality modality = Modality::kVisual;
  std::vector<std::string> node_labels;
  Tensor node_features;  // (n, d_node)
  std::vector<std::pair<int, int>> edges;
  Tensor edge_features;  // (|E|, d_edge)
  std::vector<std::string> edge_labels;

  int num_nodes() const { return static_cast<int>(node_labels.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int node_dim() const { return node_features.defined() ? node_features.dim(1) : 0; }
  int edge_dim() const { return edge_features.defined() ? edge_features.dim(1) : 0; }
};

struct MultiLayerGraph {
  HeteroGraph visual;
  HeteroGraph semantic;
  HeteroGraph commonsense;

  const HeteroGraph& layer(Modality m) const;
  const HeteroGraph& layer(int i) const { return i == 0 ? visual : (i == 1 ? semantic : commonsense); }
};

// Probability distribution over one graph layer's nodes; the inter-step
// reasoning state. weights is a length-n tensor, nonnegative with unit
// L1 mass whenever stored as step state.
struct AttentionMap {
  Modality graph = Modality::kVisual;
  Tensor weights;

  int size() const { return weights.dim(0); }
  int argmax() const;
};

// Initial reasoning state: every node weighted 1/n.
AttentionMap uniform_attention(const HeteroGraph& g);

// Rescales to unit mass. Zero total mass falls back to uniform; a
// negative weight raises (upstream module bug).
AttentionMap l1_normalize(Tape& tp, const AttentionMap& a);

// Checks every HeteroGraph invariant and reports all violations found.
std::vector<std::string> validate_graph(const HeteroGraph& g);

// A 1-node, zero-feature stand-in with the same feature dimensions,
// used when an ablation disables a graph layer. Keeping the layer
// present keeps tensor shapes and the module inventory unchanged.
HeteroGraph placeholder_graph(const HeteroGraph& like);

}  // namespace gmn
