#pragma once

#include <array>
#include <string>
#include <vector>

#include "gmn/annotations.hpp"
#include "gmn/graph.hpp"
#include "gmn/modules.hpp"
#include "gmn/tensor.hpp"

namespace gmn {

// Single-layer LSTM cell used for question encoding. Gate order in the
// stacked (4h) preactivation is input, forget, cell, output.
struct LstmParams {
  Tensor w_input;   // (4h, d_in)
  Tensor w_hidden;  // (4h, h)
  Tensor bias;      // (4h)
  int hidden = 0;
};

LstmParams make_lstm_params(int input_dim, int hidden, Rng& rng);

struct QuestionEncoding {
  std::vector<std::string> tokens;   // as encoded, truncated to padded_len
  std::vector<Tensor> word_states;   // h_l for each valid position, each (h)
  Tensor states;                     // (valid_len, h)
  Tensor question;                   // (h), hidden state at last valid token
  int valid_len = 0;
  int padded_len = 0;
};

QuestionEncoding encode_question(Tape& tp, const LstmParams& p, const EmbeddingTable& emb,
                                 const std::vector<std::string>& tokens, int padded_len);

struct ControllerParams {
  Mlp state;       // [q; c_prev] (2h) -> h   (intermediate u)
  Mlp word_score;  // u * h_l (h) -> 1
  Mlp weights;     // u (h) -> |inventory|
};

struct ControllerStep {
  Tensor query;           // c_t (h)
  Tensor module_weights;  // (|inventory|)
  Tensor word_attention;  // (valid_len)
};

// One controller tick: intermediate state from [q; c_prev], textual
// attention over the word states, next query as the attention-weighted
// word sum, and a soft distribution over the module inventory.
ControllerStep step_controller(Tape& tp, const ControllerParams& p, const QuestionEncoding& q,
                               const Tensor& c_prev);

struct AblationFlags {
  bool no_visual = false;
  bool no_semantic = false;
  bool no_commonsense = false;
  bool no_and = false;
  bool no_filter = false;
  bool no_relate = false;
  bool no_cross_graph = false;

  bool any() const {
    return no_visual || no_semantic || no_commonsense || no_and || no_filter || no_relate ||
           no_cross_graph;
  }
};

// Parses one of vg|sg|kg|and|filter|relate|crossgraph into the matching
// flag; raises on anything else.
void apply_ablation_name(AblationFlags* flags, const std::string& name);
std::vector<std::string> ablation_names(const AblationFlags& flags);

// Replaces disabled layers with 1-node zero-feature placeholders,
// keeping shapes and the module inventory unchanged.
MultiLayerGraph apply_graph_ablation(const MultiLayerGraph& graphs, const AblationFlags& flags);

struct ModuleRef {
  ModuleKind kind = ModuleKind::kNoOp;
  int graph = 0;      // layer the module writes to
  int src_graph = -1; // CrossGraph source layer
  std::string name;
};

struct ModelConfig {
  int embed_dim = 16;
  int hidden_dim = 32;
  int question_len = 20;
  int steps = 12;  // T
  std::array<int, 3> node_dims{};
  std::array<int, 3> edge_dims{};
  std::vector<std::string> answer_vocab;
  AblationFlags ablation;
  std::uint64_t init_seed = 1;

  int vocab_size() const { return static_cast<int>(answer_vocab.size()); }
};

// All learned parameters plus the module inventory. Parameters for
// every module kind are always created (the init stream does not depend
// on ablation flags); the inventory decides what executes.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<ModuleRef>& inventory() const { return inventory_; }
  std::vector<std::string> module_names() const;

  // Stable name -> tensor view of every parameter, in a fixed order.
  std::vector<std::pair<std::string, Tensor>> named_parameters();
  std::vector<Tensor> parameters();

  LstmParams encoder;
  ControllerParams controller;
  std::array<FindParams, 3> find_params;
  std::array<FindParams, 3> filter_params;
  std::array<RelateParams, 3> relate_params;
  std::array<std::array<CrossGraphParams, 3>, 3> cross_params;  // [src][dst], diagonal unused
  std::array<Tensor, 3> answer_graph_proj;                      // W8..W10
  Tensor answer_question_proj;                                  // W11
  Mlp answer_head;                                              // (4h) -> vocab

 private:
  ModelConfig cfg_;
  std::vector<ModuleRef> inventory_;
};

// Weighted soft execution of every module in the inventory. Weights are
// renormalized within each graph's partition so each layer's update is
// a convex combination, then the blended map is L1-normalized.
std::array<AttentionMap, 3> execute_step(Tape& tp, const Model& model, const MultiLayerGraph& graphs,
                                         const std::array<AttentionMap, 3>& prev,
                                         const std::array<AttentionMap, 3>& prev2,
                                         const Tensor& module_weights, const Tensor& query);

// Answer logits from the final attention maps:
// f_mlp([W8 y_G1, W9 y_G2, W10 y_G3, W11 q]) with y_g from Describe.
Tensor predict_answer(Tape& tp, const Model& model, const MultiLayerGraph& graphs,
                      const std::array<AttentionMap, 3>& final_maps, const Tensor& question_vec);

struct StepRecord {
  int step = 0;
  std::vector<double> module_weights;
  int argmax_module = -1;
  std::vector<double> word_attention;
  int argmax_word = -1;
  std::array<std::vector<double>, 3> graph_attention;
  std::array<int, 3> graph_argmax{};
};

struct ReasoningTrace {
  std::vector<std::string> question_tokens;
  std::vector<std::string> module_names;
  std::array<std::vector<std::string>, 3> node_labels;
  std::vector<StepRecord> steps;
  std::vector<double> logits;
  int answer_index = -1;
};

struct ReasoningResult {
  Tensor logits;
  ReasoningTrace trace;
};

// Runs the full T-step loop: encode, step the controller, execute all
// modules softly, and read out the answer. Deterministic given
// parameters and inputs.
ReasoningResult run_reasoning(Tape& tp, const Model& model, const MultiLayerGraph& graphs,
                              const std::vector<std::string>& question, const EmbeddingTable& emb);

}  // namespace gmn
