#pragma once

#include <map>
#include <string>
#include <vector>

#include "gmn/annotations.hpp"
#include "gmn/graph.hpp"

namespace gmn {

// Fully-connected graph over the top max_objects detections by score.
// Every ordered pair (i, j), i != j, gets an edge with the 5-d relative
// spatial feature [(xj-xi)/wi, (yj-yi)/hi, wj/wi, hj/hi, IoU(i,j)].
HeteroGraph build_visual_graph(const std::vector<Detection>& detections, int max_objects = 36);

// Graph over the names and attributes occurring in caption tuples; one
// node per unique string, one edge per unique tuple relation plus an
// "attr" edge from subject to each of its attributes. Node and edge
// features are averaged word embeddings.
HeteroGraph build_semantic_graph(const std::vector<CaptionTuple>& tuples, const EmbeddingTable& emb);

// All triples whose head or tail matches one of the labels
// (case-normalized exact match). Store order is preserved and each
// triple appears at most once.
std::vector<KnowledgeTriple> retrieve_first_order_subgraph(const std::vector<std::string>& labels,
                                                           const std::vector<KnowledgeTriple>& store);

// Scores each triple as a*S_l + b*S_t, where S_l is the detection score
// of the matching object label (max of the two when both endpoints
// match), keeps the top K by score with ties broken by
// (score desc, head asc, relation asc, tail asc), and assembles the
// commonsense graph from the survivors. Edge features are the averaged
// relation embedding with the edge score appended as a final dimension.
HeteroGraph score_and_select(const std::vector<KnowledgeTriple>& triples,
                             const std::map<std::string, double>& object_scores,
                             double a, double b, int k, const EmbeddingTable& emb);

// The ranked-and-truncated triple list score_and_select keeps, exposed
// for oracle comparison. The score field of each returned triple holds
// the combined edge score a*S_l + b*S_t.
std::vector<KnowledgeTriple> rank_triples(const std::vector<KnowledgeTriple>& triples,
                                          const std::map<std::string, double>& object_scores,
                                          double a, double b, int k);

double bbox_iou(const std::array<double, 4>& a, const std::array<double, 4>& b);

inline constexpr int kDefaultMaxObjects = 36;   // detections kept per image
inline constexpr int kDefaultMaxCaptions = 10;  // caption tuples kept per image
inline constexpr double kDefaultScoreA = 0.7;
inline constexpr double kDefaultScoreB = 0.3;
inline constexpr int kDefaultTopK = 50;

}  // namespace gmn
