#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gmn/controller.hpp"
#include "gmn/synthetic.hpp"
#include "gmn/tensor.hpp"

namespace gmn {

// -log softmax(logits)[label], computed via logsumexp for stability.
Tensor cross_entropy_loss(Tape& tp, const Tensor& logits, int label);

// Adaptive moment estimation with bias correction. Parameters update in
// place; a non-finite gradient aborts with diagnostics.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void zero_grads();
  void step();
  long step_count() const { return step_count_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  double lr_, beta1_, beta2_, epsilon_;
  long step_count_ = 0;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int steps = 12;  // reasoning steps T
  int hidden_dim = 32;
  int question_len = 20;
  int epochs = 50;
  int batch_size = 16;
  std::uint64_t seed = 1;
  AblationFlags ablation;

  // Early stopping: stop once held-out accuracy reaches stop_accuracy,
  // or after `patience` evaluations without improvement (0 disables).
  double stop_accuracy = 1.01;
  int patience = 0;
  int eval_every = 1;
  bool verbose = false;

  void validate() const;
};

struct Metrics {
  double accuracy = 0.0;
  std::map<int, double> per_hop_accuracy;
  std::map<int, int> per_hop_counts;
  std::vector<double> loss_curve;
  int epochs_run = 0;
};

// Held-out accuracy with per-hop breakdown. Ablation flags substitute
// placeholder layers before each forward pass.
Metrics evaluate(const Model& model, const std::vector<SyntheticTask>& tasks,
                 const EmbeddingTable& emb, const AblationFlags& flags);

struct TrainResult {
  Model model;
  Metrics metrics;
};

// Seeded mini-batch training against data.train, tracking held-out
// accuracy on data.test. Returns the best model seen (by held-out
// accuracy) and its metrics.
TrainResult train(const TrainConfig& cfg, const Dataset& data);

}  // namespace gmn
