#include "gmn/builder.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gmn {

double bbox_iou(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  const double ax1 = a[0], ay1 = a[1], ax2 = a[0] + a[2], ay2 = a[1] + a[3];
  const double bx1 = b[0], by1 = b[1], bx2 = b[0] + b[2], by2 = b[1] + b[3];
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = a[2] * a[3] + b[2] * b[3] - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

HeteroGraph build_visual_graph(const std::vector<Detection>& detections, int max_objects) {
  if (detections.empty()) throw std::invalid_argument("build_visual_graph: no detections");
  if (max_objects <= 0) throw std::invalid_argument("build_visual_graph: max_objects must be positive");

  std::vector<int> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return detections[static_cast<std::size_t>(i)].score >
                                              detections[static_cast<std::size_t>(j)].score; });
  const int n = std::min<int>(max_objects, static_cast<int>(detections.size()));
  order.resize(static_cast<std::size_t>(n));

  const int d = static_cast<int>(detections[static_cast<std::size_t>(order[0])].feature.size());
  HeteroGraph g;
  g.modality = Modality::kVisual;
  std::vector<double> feats;
  feats.reserve(static_cast<std::size_t>(n) * d);
  for (int idx : order) {
    const Detection& det = detections[static_cast<std::size_t>(idx)];
    if (static_cast<int>(det.feature.size()) != d)
      throw std::invalid_argument("build_visual_graph: inconsistent feature dimensions");
    g.node_labels.push_back(det.label);
    feats.insert(feats.end(), det.feature.begin(), det.feature.end());
  }
  g.node_features = Tensor::from({n, d}, std::move(feats));

  if (n > 1) {
    std::vector<double> efeats;
    efeats.reserve(static_cast<std::size_t>(n) * (n - 1) * 5);
    for (int i = 0; i < n; ++i) {
      const auto& bi = detections[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].bbox;
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto& bj = detections[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])].bbox;
        g.edges.emplace_back(i, j);
        efeats.push_back((bj[0] - bi[0]) / bi[2]);
        efeats.push_back((bj[1] - bi[1]) / bi[3]);
        efeats.push_back(bj[2] / bi[2]);
        efeats.push_back(bj[3] / bi[3]);
        efeats.push_back(bbox_iou(bi, bj));
      }
    }
    g.edge_features = Tensor::from({n * (n - 1), 5}, std::move(efeats));
    g.edge_labels.assign(g.edges.size(), "");
  }
  return g;
}

namespace {

int node_index(HeteroGraph& g, std::vector<std::vector<double>>& feats, const EmbeddingTable& emb,
               const std::string& label) {
  for (std::size_t i = 0; i < g.node_labels.size(); ++i)
    if (g.node_labels[i] == label) return static_cast<int>(i);
  g.node_labels.push_back(label);
  feats.push_back(emb.embed_phrase(label));
  return static_cast<int>(g.node_labels.size()) - 1;
}

Tensor pack_rows(std::vector<std::vector<double>>& rows, int dim) {
  std::vector<double> flat;
  flat.reserve(rows.size() * static_cast<std::size_t>(dim));
  for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor::from({static_cast<int>(rows.size()), dim}, std::move(flat));
}

}  // namespace

HeteroGraph build_semantic_graph(const std::vector<CaptionTuple>& tuples, const EmbeddingTable& emb) {
  if (tuples.empty()) throw std::invalid_argument("build_semantic_graph: no caption tuples");
  HeteroGraph g;
  g.modality = Modality::kSemantic;
  std::vector<std::vector<double>> node_feats;
  std::vector<std::vector<double>> edge_feats;
  std::set<std::tuple<int, int, std::string>> seen;

  auto add_edge = [&](int u, int v, const std::string& relation) {
    if (!seen.insert({u, v, relation}).second) return;
    g.edges.emplace_back(u, v);
    g.edge_labels.push_back(relation);
    edge_feats.push_back(emb.embed_phrase(relation));
  };

  for (const auto& tup : tuples) {
    if (tup.subject.empty() || tup.object.empty())
      throw std::invalid_argument("build_semantic_graph: tuple with empty subject or object");
    const int s = node_index(g, node_feats, emb, tup.subject);
    const int o = node_index(g, node_feats, emb, tup.object);
    add_edge(s, o, tup.relation);
    for (const auto& attr : tup.subject_attributes) {
      const int a = node_index(g, node_feats, emb, attr);
      add_edge(s, a, "attr");
    }
  }

  g.node_features = pack_rows(node_feats, emb.dim());
  if (!g.edges.empty()) g.edge_features = pack_rows(edge_feats, emb.dim());
  return g;
}

std::vector<KnowledgeTriple> retrieve_first_order_subgraph(const std::vector<std::string>& labels,
                                                           const std::vector<KnowledgeTriple>& store) {
  if (labels.empty()) throw std::invalid_argument("retrieve_first_order_subgraph: no labels");
  std::set<std::string> keys;
  for (const auto& l : labels) keys.insert(lowercase(l));
  std::vector<KnowledgeTriple> out;
  for (const auto& t : store) {
    if (keys.count(lowercase(t.head)) == 0 && keys.count(lowercase(t.tail)) == 0) continue;
    if (std::find(out.begin(), out.end(), t) != out.end()) continue;
    out.push_back(t);
  }
  return out;
}

std::vector<KnowledgeTriple> rank_triples(const std::vector<KnowledgeTriple>& triples,
                                          const std::map<std::string, double>& object_scores,
                                          double a, double b, int k) {
  if (k <= 0) throw std::invalid_argument("rank_triples: K must be positive");
  if (a < 0.0 || b < 0.0) throw std::invalid_argument("rank_triples: weights must be nonnegative");

  auto label_score = [&](const std::string& label) -> double {
    auto it = object_scores.find(lowercase(label));
    return it == object_scores.end() ? -1.0 : it->second;
  };

  struct Scored {
    KnowledgeTriple triple;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(triples.size());
  for (const auto& t : triples) {
    const double sl = std::max({label_score(t.head), label_score(t.tail), 0.0});
    scored.push_back({t, a * sl + b * t.score});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.triple.head != y.triple.head) return x.triple.head < y.triple.head;
    if (x.triple.relation != y.triple.relation) return x.triple.relation < y.triple.relation;
    return x.triple.tail < y.triple.tail;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<std::size_t>(k));

  std::vector<KnowledgeTriple> out;
  out.reserve(scored.size());
  for (auto& s : scored) {
    s.triple.score = s.score;  // final edge score
    out.push_back(s.triple);
  }
  return out;
}

HeteroGraph score_and_select(const std::vector<KnowledgeTriple>& triples,
                             const std::map<std::string, double>& object_scores,
                             double a, double b, int k, const EmbeddingTable& emb) {
  const auto kept = rank_triples(triples, object_scores, a, b, k);
  HeteroGraph g;
  g.modality = Modality::kCommonsense;
  std::vector<std::vector<double>> node_feats;
  std::vector<std::vector<double>> edge_feats;
  for (const auto& t : kept) {
    const int h = node_index(g, node_feats, emb, t.head);
    const int tl = node_index(g, node_feats, emb, t.tail);
    g.edges.emplace_back(h, tl);
    g.edge_labels.push_back(t.relation);
    auto ef = emb.embed_phrase(t.relation);
    ef.push_back(t.score);  // edge score as an extra feature dimension
    edge_feats.push_back(std::move(ef));
  }
  if (g.node_labels.empty()) {
    // Nothing retrieved: keep the layer present as a 1-node placeholder.
    g.node_labels.push_back("<none>");
    node_feats.push_back(std::vector<double>(static_cast<std::size_t>(emb.dim()), 0.0));
  }
  g.node_features = pack_rows(node_feats, emb.dim());
  if (!g.edges.empty()) g.edge_features = pack_rows(edge_feats, emb.dim() + 1);
  return g;
}

}  // namespace gmn
