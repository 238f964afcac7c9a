#include "gmn/modules.hpp"

#include <stdexcept>

namespace gmn {

const char* module_kind_name(ModuleKind k) {
  switch (k) {
    case ModuleKind::kFind: return "Find";
    case ModuleKind::kAnd: return "And";
    case ModuleKind::kFilter: return "Filter";
    case ModuleKind::kRelate: return "Relate";
    case ModuleKind::kCrossGraph: return "CrossGraph";
    case ModuleKind::kDescribe: return "Describe";
    case ModuleKind::kNoOp: return "NoOp";
  }
  return "?";
}

FindParams make_find_params(int node_dim, int query_dim, int hidden, Rng& rng) {
  FindParams p;
  p.w_node = init_param({hidden, node_dim}, node_dim, rng);
  p.w_query = init_param({hidden, query_dim}, query_dim, rng);
  p.mlp = make_mlp({hidden, hidden, 1}, rng);
  return p;
}

RelateParams make_relate_params(int edge_dim, int query_dim, int hidden, Rng& rng) {
  RelateParams p;
  p.w_query = init_param({hidden, query_dim}, query_dim, rng);
  p.w_edge = init_param({hidden, edge_dim}, edge_dim, rng);
  p.mlp = make_mlp({hidden, hidden, 1}, rng);
  return p;
}

CrossGraphParams make_cross_params(int src_dim, int dst_dim, int hidden, Rng& rng) {
  CrossGraphParams p;
  p.w_src = init_param({hidden, src_dim}, src_dim, rng);
  p.w_dst = init_param({hidden, dst_dim}, dst_dim, rng);
  p.w_out = init_param({1, hidden}, hidden, rng);
  return p;
}

AttentionMap find(Tape& tp, const FindParams& p, const HeteroGraph& g, const Tensor& query) {
  const int n = g.num_nodes();
  if (query.dim(0) != p.w_query.dim(1))
    throw std::invalid_argument("find: query dim " + std::to_string(query.dim(0)) + " does not match W2 fan-in " +
                                std::to_string(p.w_query.dim(1)));
  Tensor xw = tp.matmul(g.node_features, tp.transpose(p.w_node));  // (n, h)
  Tensor cw = tp.matmul(p.w_query, query);                         // (h)
  Tensor fused = fuse(tp, xw, tp.tile_rows(cw, n));                // (n, h)
  Tensor scores = tp.reshape(mlp_forward(tp, p.mlp, fused), {n});
  return {g.modality, tp.softmax(scores)};
}

AttentionMap and_op(Tape& tp, const AttentionMap& a1, const AttentionMap& a2) {
  if (a1.graph != a2.graph)
    throw std::invalid_argument(std::string("and: maps live on different graphs (") + modality_name(a1.graph) +
                                " vs " + modality_name(a2.graph) + ")");
  return {a1.graph, tp.norm_l1(tp.add(a1.weights, a2.weights))};
}

AttentionMap filter(Tape& tp, const FindParams& p, const HeteroGraph& g, const AttentionMap& a,
                    const Tensor& query) {
  return and_op(tp, a, find(tp, p, g, query));
}

Tensor edge_attention(Tape& tp, const RelateParams& p, const HeteroGraph& g, const Tensor& query) {
  const int m = g.num_edges();
  if (m == 0) throw std::invalid_argument("edge_attention: graph has no edges");
  Tensor ew = tp.matmul(g.edge_features, tp.transpose(p.w_edge));  // (|E|, h)
  Tensor cw = tp.matmul(p.w_query, query);                         // (h)
  Tensor gated = tp.mul(ew, tp.tile_rows(cw, m));                  // (|E|, h)
  Tensor scores = tp.relu(tp.reshape(mlp_forward(tp, p.mlp, gated), {m}));
  return tp.scatter_edges(scores, g.edges, g.num_nodes());
}

AttentionMap relate(Tape& tp, const RelateParams& p, const HeteroGraph& g, const AttentionMap& a,
                    const Tensor& query) {
  if (g.num_edges() == 0) return uniform_attention(g);
  Tensor w = edge_attention(tp, p, g, query);
  Tensor moved = tp.matmul(tp.transpose(w), a.weights);
  return {g.modality, tp.norm_l1(moved)};
}

AttentionMap cross_graph(Tape& tp, const CrossGraphParams& p, const HeteroGraph& g_src,
                         const HeteroGraph& g_dst, const AttentionMap& a_src,
                         const AttentionMap& a_dst, const Tensor& query) {
  (void)query;
  if (a_src.graph != g_src.modality || a_dst.graph != g_dst.modality)
    throw std::invalid_argument("cross_graph: attention maps do not match the graph pair");
  const int n = g_dst.num_nodes();
  Tensor summary = tp.matmul(tp.transpose(g_src.node_features), a_src.weights);  // (d_m)
  Tensor guided = tp.matmul(p.w_src, summary);                                   // (h)
  Tensor proj = tp.matmul(g_dst.node_features, tp.transpose(p.w_dst));           // (n, h)
  Tensor mixed = tp.tanh(tp.add(proj, tp.tile_rows(guided, n)));
  Tensor scores = tp.reshape(tp.matmul(mixed, tp.transpose(p.w_out)), {n});
  Tensor fresh = tp.softmax(scores);
  return {g_dst.modality, tp.norm_l1(tp.add(fresh, a_dst.weights))};
}

Tensor describe(Tape& tp, const HeteroGraph& g, const AttentionMap& a) {
  if (a.graph != g.modality)
    throw std::invalid_argument("describe: attention map does not belong to this graph");
  return tp.matmul(tp.transpose(g.node_features), a.weights);
}

AttentionMap noop(const AttentionMap& a) { return a; }

}  // namespace gmn
