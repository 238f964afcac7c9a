#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmn/annotations.hpp"
#include "gmn/graph.hpp"
#include "gmn/rng.hpp"

namespace gmn {

enum class TaskFamily { kAttribute, kRelational, kCrossGraphKnowledge, kMixed };

TaskFamily task_family_from_name(const std::string& name);
const char* task_family_name(TaskFamily f);

// One generated compositional question over a generated scene. The
// program is the symbolic layout the generator used to derive the
// answer; it is diagnostic metadata and is never shown to the model.
struct SyntheticTask {
  MultiLayerGraph graphs;
  std::vector<std::string> question;
  std::string answer;
  int answer_index = -1;
  int hops = 0;
  std::vector<std::string> program;
};

struct GeneratorConfig {
  TaskFamily family = TaskFamily::kCrossGraphKnowledge;
  int min_objects = 4;
  int max_objects = 5;
  int embed_dim = 16;
  std::uint64_t embed_seed = 7;
  int top_k = 50;
  double score_a = 0.7;
  double score_b = 0.3;
  int max_retries = 50;
};

struct Dataset {
  EmbeddingTable embeddings;
  std::vector<std::string> answer_vocab;
  std::vector<SyntheticTask> train;
  std::vector<SyntheticTask> test;
};

// Every word the generator can emit (scene vocabulary, question words,
// relation names), embedded with seeded random vectors.
EmbeddingTable make_word_embeddings(int dim, std::uint64_t seed);

// Answers a family can produce, in a fixed order.
std::vector<std::string> answer_vocabulary(TaskFamily family);

// Samples one scene and question. Scenes that fail the template's
// uniqueness requirements are resampled up to cfg.max_retries times.
SyntheticTask generate_synthetic_task(Rng& rng, const GeneratorConfig& cfg, const EmbeddingTable& emb);

Dataset generate_dataset(const GeneratorConfig& cfg, int train_count, int test_count,
                         std::uint64_t seed);

// Executes a ground-truth program over the graphs using node and edge
// labels only. Returns the answer when the program resolves to exactly
// one node, otherwise nullopt. Program ops:
//   find <layer> <label>
//   relate <layer> <edge-label>      (follow out-edges)
//   relate_in <layer> <edge-label>   (follow in-edges)
//   cross <src-layer> <dst-layer>    (match node labels across layers)
//   describe <layer>
std::optional<std::string> run_symbolic_program(const std::vector<std::string>& program,
                                                const MultiLayerGraph& graphs);

}  // namespace gmn
