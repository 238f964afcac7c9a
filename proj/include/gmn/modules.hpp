#pragma once

#include <string>

#include "gmn/graph.hpp"
#include "gmn/tensor.hpp"

namespace gmn {

enum class ModuleKind { kFind, kAnd, kFilter, kRelate, kCrossGraph, kDescribe, kNoOp };

const char* module_kind_name(ModuleKind k);

// Locates nodes matching the query:
//   a = softmax(f_mlp(F(X W1^T, W2 c)))
// with the query vector broadcast across nodes before fusing.
struct FindParams {
  Tensor w_node;   // (h, d_node)
  Tensor w_query;  // (h, d_query)
  Mlp mlp;         // h -> 1, applied rowwise
};

// Scores edges against the query and transports node attention along
// them:
//   W_ij = ReLU(f_mlp(W3 c * W4 e_ij)),  a' = norm(W^T a)
struct RelateParams {
  Tensor w_query;  // (h, d_query)
  Tensor w_edge;   // (h, d_edge)
  Mlp mlp;         // h -> 1, applied rowwise
};

// Transfers attention from graph m to graph n guided by node features:
//   a'_n = softmax(W7 tanh(W5 X_m^T a_m + W6 X_n(i))),  a_n <- norm(a'_n + a_n)
struct CrossGraphParams {
  Tensor w_src;  // (h, d_node_m)
  Tensor w_dst;  // (h, d_node_n)
  Tensor w_out;  // (1, h)
};

FindParams make_find_params(int node_dim, int query_dim, int hidden, Rng& rng);
RelateParams make_relate_params(int edge_dim, int query_dim, int hidden, Rng& rng);
CrossGraphParams make_cross_params(int src_dim, int dst_dim, int hidden, Rng& rng);

AttentionMap find(Tape& tp, const FindParams& p, const HeteroGraph& g, const Tensor& query);

// Combines two attention maps on the same graph: normalized elementwise
// sum.
AttentionMap and_op(Tape& tp, const AttentionMap& a1, const AttentionMap& a2);

// Narrows an existing map by a fresh Find on the query; equals
// and_op(a, find(...)) with shared parameters.
AttentionMap filter(Tape& tp, const FindParams& p, const HeteroGraph& g, const AttentionMap& a,
                    const Tensor& query);

// Dense (n, n) edge-attention matrix, zero off-edges, nonnegative.
Tensor edge_attention(Tape& tp, const RelateParams& p, const HeteroGraph& g, const Tensor& query);

// Moves attention along query-relevant edges. A graph with no edges, or
// an all-zero transported mass, falls back to the uniform map.
AttentionMap relate(Tape& tp, const RelateParams& p, const HeteroGraph& g, const AttentionMap& a,
                    const Tensor& query);

// The query argument is accepted for interface parity but unused by the
// cross-graph scoring.
AttentionMap cross_graph(Tape& tp, const CrossGraphParams& p, const HeteroGraph& g_src,
                         const HeteroGraph& g_dst, const AttentionMap& a_src,
                         const AttentionMap& a_dst, const Tensor& query);

// Graph embedding y = X^T a.
Tensor describe(Tape& tp, const HeteroGraph& g, const AttentionMap& a);

// Identity; pads reasoning to the maximum step count.
AttentionMap noop(const AttentionMap& a);

}  // namespace gmn
