#include "gmn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gmn {

Tensor cross_entropy_loss(Tape& tp, const Tensor& logits, int label) {
  if (logits.ndim() != 1) throw std::invalid_argument("cross_entropy_loss: logits must be a vector");
  if (label < 0 || label >= logits.dim(0))
    throw std::invalid_argument("cross_entropy_loss: label " + std::to_string(label) +
                                " outside vocabulary of size " + std::to_string(logits.dim(0)));
  return tp.sub(tp.logsumexp(logits), tp.pick(logits, label));
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double lr, double beta1, double beta2,
                             double epsilon)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const Tensor& p : params_) {
    first_moment_.emplace_back(p.data().size(), 0.0);
    second_moment_.emplace_back(p.data().size(), 0.0);
  }
}

void AdamOptimizer::zero_grads() {
  for (Tensor& p : params_) p.impl()->grad.assign(p.data().size(), 0.0);
}

void AdamOptimizer::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    const auto& grad = p.impl()->grad;
    auto& m = first_moment_[pi];
    auto& v = second_moment_[pi];
    for (std::size_t i = 0; i < p.data().size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      if (!std::isfinite(g))
        throw std::runtime_error("adam: non-finite gradient at parameter " + std::to_string(pi) +
                                 ", coordinate " + std::to_string(i));
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.data()[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw std::invalid_argument("config: negative learning rate");
  if (steps < 1) throw std::invalid_argument("config: steps must be positive");
  if (hidden_dim < 1) throw std::invalid_argument("config: hidden_dim must be positive");
  if (question_len < 1) throw std::invalid_argument("config: question_len must be positive");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be positive");
  if (eval_every < 1) throw std::invalid_argument("config: eval_every must be positive");
}

namespace {

ModelConfig model_config_for(const TrainConfig& cfg, const Dataset& data) {
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");
  const MultiLayerGraph& g = data.train.front().graphs;
  ModelConfig mc;
  mc.embed_dim = data.embeddings.dim();
  mc.hidden_dim = cfg.hidden_dim;
  mc.question_len = cfg.question_len;
  mc.steps = cfg.steps;
  for (int i = 0; i < 3; ++i) {
    mc.node_dims[static_cast<std::size_t>(i)] = g.layer(i).node_dim();
    mc.edge_dims[static_cast<std::size_t>(i)] = std::max(g.layer(i).edge_dim(), 1);
  }
  mc.answer_vocab = data.answer_vocab;
  mc.ablation = cfg.ablation;
  mc.init_seed = cfg.seed;
  return mc;
}

struct ParamSnapshot {
  std::vector<std::vector<double>> values;

  static ParamSnapshot capture(std::vector<Tensor>& params) {
    ParamSnapshot s;
    for (const Tensor& p : params) s.values.push_back(p.data());
    return s;
  }

  void restore(std::vector<Tensor>& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].data() = values[i];
  }
};

}  // namespace

Metrics evaluate(const Model& model, const std::vector<SyntheticTask>& tasks,
                 const EmbeddingTable& emb, const AblationFlags& flags) {
  if (tasks.empty()) throw std::invalid_argument("evaluate: empty dataset");
  Metrics metrics;
  int correct = 0;
  std::map<int, int> hop_correct;
  for (const auto& task : tasks) {
    Tape tp;
    ReasoningResult result;
    if (flags.no_visual || flags.no_semantic || flags.no_commonsense) {
      result = run_reasoning(tp, model, apply_graph_ablation(task.graphs, flags), task.question, emb);
    } else {
      result = run_reasoning(tp, model, task.graphs, task.question, emb);
    }
    const bool ok = result.trace.answer_index == task.answer_index;
    correct += ok ? 1 : 0;
    metrics.per_hop_counts[task.hops] += 1;
    hop_correct[task.hops] += ok ? 1 : 0;
  }
  metrics.accuracy = static_cast<double>(correct) / static_cast<double>(tasks.size());
  for (const auto& [hops, count] : metrics.per_hop_counts)
    metrics.per_hop_accuracy[hops] = static_cast<double>(hop_correct[hops]) / static_cast<double>(count);
  return metrics;
}

TrainResult train(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");
  if (data.test.empty()) throw std::invalid_argument("train: empty held-out set");

  Model model(model_config_for(cfg, data));
  std::vector<Tensor> params = model.parameters();
  AdamOptimizer adam(params, cfg.learning_rate);
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  Metrics best_metrics;
  double best_accuracy = -1.0;
  ParamSnapshot best_params = ParamSnapshot::capture(params);
  int evals_since_improvement = 0;
  std::vector<double> loss_curve;

  const int n = static_cast<int>(data.train.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  int epochs_run = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(shuffle_rng.below(i + 1))]);

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n - start);
      Tape tp;
      Tensor batch_loss;
      for (int b = 0; b < count; ++b) {
        const SyntheticTask& task = data.train[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
        ReasoningResult result;
        if (cfg.ablation.no_visual || cfg.ablation.no_semantic || cfg.ablation.no_commonsense) {
          result = run_reasoning(tp, model, apply_graph_ablation(task.graphs, cfg.ablation),
                                 task.question, data.embeddings);
        } else {
          result = run_reasoning(tp, model, task.graphs, task.question, data.embeddings);
        }
        Tensor loss = cross_entropy_loss(tp, result.logits, task.answer_index);
        batch_loss = batch_loss.defined() ? tp.add(batch_loss, loss) : loss;
      }
      batch_loss = tp.scale(batch_loss, 1.0 / count);
      if (!batch_loss.all_finite())
        throw std::runtime_error("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
      adam.zero_grads();
      tp.backward(batch_loss);
      adam.step();
      epoch_loss += batch_loss.value() * count;
    }
    loss_curve.push_back(epoch_loss / n);
    epochs_run = epoch + 1;

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      Metrics m = evaluate(model, data.test, data.embeddings, cfg.ablation);
      if (cfg.verbose)
        std::fprintf(stderr, "epoch %3d  loss %.4f  held-out accuracy %.4f\n", epoch + 1,
                     loss_curve.back(), m.accuracy);
      if (m.accuracy > best_accuracy) {
        best_accuracy = m.accuracy;
        best_metrics = m;
        best_params = ParamSnapshot::capture(params);
        evals_since_improvement = 0;
      } else {
        ++evals_since_improvement;
      }
      if (m.accuracy >= cfg.stop_accuracy) break;
      if (cfg.patience > 0 && evals_since_improvement >= cfg.patience) break;
    }
  }

  best_params.restore(params);
  best_metrics.loss_curve = std::move(loss_curve);
  best_metrics.epochs_run = epochs_run;
  return {std::move(model), std::move(best_metrics)};
}

}  // namespace gmn
