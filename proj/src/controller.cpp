#include "gmn/controller.hpp"

#include <algorithm>
#include <stdexcept>

namespace gmn {

LstmParams make_lstm_params(int input_dim, int hidden, Rng& rng) {
  LstmParams p;
  p.w_input = init_param({4 * hidden, input_dim}, input_dim, rng);
  p.w_hidden = init_param({4 * hidden, hidden}, hidden, rng);
  p.bias = init_param({4 * hidden}, hidden, rng);
  p.hidden = hidden;
  return p;
}

QuestionEncoding encode_question(Tape& tp, const LstmParams& p, const EmbeddingTable& emb,
                                 const std::vector<std::string>& tokens, int padded_len) {
  if (tokens.empty()) throw std::invalid_argument("encode_question: empty question");
  QuestionEncoding enc;
  enc.padded_len = padded_len;
  enc.valid_len = std::min<int>(static_cast<int>(tokens.size()), padded_len);
  enc.tokens.assign(tokens.begin(), tokens.begin() + enc.valid_len);

  const int h = p.hidden;
  Tensor hidden = Tensor::zeros({h});
  Tensor cell = Tensor::zeros({h});
  std::vector<Tensor> all_states;
  for (int l = 0; l < enc.valid_len; ++l) {
    Tensor x = Tensor::from({emb.dim()}, emb.lookup(enc.tokens[static_cast<std::size_t>(l)]));
    Tensor z = tp.add(tp.add(tp.matmul(p.w_input, x), tp.matmul(p.w_hidden, hidden)), p.bias);
    Tensor gate_in = tp.sigmoid(tp.slice(z, 0, h));
    Tensor gate_forget = tp.sigmoid(tp.slice(z, h, h));
    Tensor gate_cell = tp.tanh(tp.slice(z, 2 * h, h));
    Tensor gate_out = tp.sigmoid(tp.slice(z, 3 * h, h));
    cell = tp.add(tp.mul(gate_forget, cell), tp.mul(gate_in, gate_cell));
    hidden = tp.mul(gate_out, tp.tanh(cell));
    enc.word_states.push_back(hidden);
    all_states.push_back(hidden);
  }
  enc.states = tp.reshape(tp.concat(all_states), {enc.valid_len, h});
  enc.question = hidden;
  return enc;
}

ControllerStep step_controller(Tape& tp, const ControllerParams& p, const QuestionEncoding& q,
                               const Tensor& c_prev) {
  ControllerStep out;
  Tensor u = mlp_forward(tp, p.state, tp.concat({q.question, c_prev}));
  Tensor gated = tp.mul(q.states, tp.tile_rows(u, q.valid_len));  // u * h_l rowwise
  Tensor scores = tp.reshape(mlp_forward(tp, p.word_score, gated), {q.valid_len});
  out.word_attention = tp.softmax(scores);
  out.query = tp.matmul(tp.transpose(q.states), out.word_attention);
  out.module_weights = tp.softmax(mlp_forward(tp, p.weights, u));
  return out;
}

void apply_ablation_name(AblationFlags* flags, const std::string& name) {
  if (name == "vg") flags->no_visual = true;
  else if (name == "sg") flags->no_semantic = true;
  else if (name == "kg") flags->no_commonsense = true;
  else if (name == "and") flags->no_and = true;
  else if (name == "filter") flags->no_filter = true;
  else if (name == "relate") flags->no_relate = true;
  else if (name == "crossgraph") flags->no_cross_graph = true;
  else throw std::invalid_argument("unknown ablation '" + name + "' (expected vg|sg|kg|and|filter|relate|crossgraph)");
}

std::vector<std::string> ablation_names(const AblationFlags& f) {
  std::vector<std::string> out;
  if (f.no_visual) out.push_back("vg");
  if (f.no_semantic) out.push_back("sg");
  if (f.no_commonsense) out.push_back("kg");
  if (f.no_and) out.push_back("and");
  if (f.no_filter) out.push_back("filter");
  if (f.no_relate) out.push_back("relate");
  if (f.no_cross_graph) out.push_back("crossgraph");
  return out;
}

MultiLayerGraph apply_graph_ablation(const MultiLayerGraph& graphs, const AblationFlags& flags) {
  MultiLayerGraph out = graphs;
  if (flags.no_visual) out.visual = placeholder_graph(graphs.visual);
  if (flags.no_semantic) out.semantic = placeholder_graph(graphs.semantic);
  if (flags.no_commonsense) out.commonsense = placeholder_graph(graphs.commonsense);
  return out;
}

namespace {

const char* kLayerNames[3] = {"visual", "semantic", "commonsense"};

std::vector<ModuleRef> build_inventory(const AblationFlags& ablation) {
  std::vector<ModuleRef> inv;
  for (int g = 0; g < 3; ++g) {
    const std::string layer = kLayerNames[g];
    inv.push_back({ModuleKind::kFind, g, -1, "Find[" + layer + "]"});
    if (!ablation.no_and) inv.push_back({ModuleKind::kAnd, g, -1, "And[" + layer + "]"});
    if (!ablation.no_filter) inv.push_back({ModuleKind::kFilter, g, -1, "Filter[" + layer + "]"});
    if (!ablation.no_relate) inv.push_back({ModuleKind::kRelate, g, -1, "Relate[" + layer + "]"});
    if (!ablation.no_cross_graph) {
      for (int s = 0; s < 3; ++s) {
        if (s == g) continue;
        inv.push_back({ModuleKind::kCrossGraph, g, s,
                       "CrossGraph[" + std::string(kLayerNames[s]) + "->" + layer + "]"});
      }
    }
    inv.push_back({ModuleKind::kNoOp, g, -1, "NoOp[" + layer + "]"});
  }
  return inv;
}

}  // namespace

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg.vocab_size() < 1) throw std::invalid_argument("model: empty answer vocabulary");
  if (cfg.steps < 1) throw std::invalid_argument("model: need at least one reasoning step");
  inventory_ = build_inventory(cfg.ablation);

  Rng rng(cfg.init_seed);
  const int h = cfg.hidden_dim;
  encoder = make_lstm_params(cfg.embed_dim, h, rng);
  controller.state = make_mlp({2 * h, h, h}, rng);
  controller.word_score = make_mlp({h, h, 1}, rng);
  controller.weights = make_mlp({h, h, static_cast<int>(inventory_.size())}, rng);
  for (int g = 0; g < 3; ++g) {
    find_params[static_cast<std::size_t>(g)] = make_find_params(cfg.node_dims[static_cast<std::size_t>(g)], h, h, rng);
    filter_params[static_cast<std::size_t>(g)] = make_find_params(cfg.node_dims[static_cast<std::size_t>(g)], h, h, rng);
    relate_params[static_cast<std::size_t>(g)] = make_relate_params(cfg.edge_dims[static_cast<std::size_t>(g)], h, h, rng);
  }
  for (int s = 0; s < 3; ++s)
    for (int d = 0; d < 3; ++d)
      if (s != d)
        cross_params[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)] =
            make_cross_params(cfg.node_dims[static_cast<std::size_t>(s)], cfg.node_dims[static_cast<std::size_t>(d)], h, rng);
  for (int g = 0; g < 3; ++g)
    answer_graph_proj[static_cast<std::size_t>(g)] =
        init_param({h, cfg.node_dims[static_cast<std::size_t>(g)]}, cfg.node_dims[static_cast<std::size_t>(g)], rng);
  answer_question_proj = init_param({h, h}, h, rng);
  answer_head = make_mlp({4 * h, h, cfg.vocab_size()}, rng);
}

std::vector<std::string> Model::module_names() const {
  std::vector<std::string> names;
  names.reserve(inventory_.size());
  for (const auto& m : inventory_) names.push_back(m.name);
  return names;
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add = [&](const std::string& name, const Tensor& t) { out.emplace_back(name, t); };
  auto add_mlp = [&](const std::string& prefix, Mlp& mlp) {
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
      add(prefix + ".w" + std::to_string(l), mlp.weights[l]);
      add(prefix + ".b" + std::to_string(l), mlp.biases[l]);
    }
  };
  add("encoder.w_input", encoder.w_input);
  add("encoder.w_hidden", encoder.w_hidden);
  add("encoder.bias", encoder.bias);
  add_mlp("controller.state", controller.state);
  add_mlp("controller.word_score", controller.word_score);
  add_mlp("controller.weights", controller.weights);
  for (int g = 0; g < 3; ++g) {
    const std::string layer = kLayerNames[g];
    auto& fp = find_params[static_cast<std::size_t>(g)];
    add("find." + layer + ".w_node", fp.w_node);
    add("find." + layer + ".w_query", fp.w_query);
    add_mlp("find." + layer + ".mlp", fp.mlp);
    auto& gp = filter_params[static_cast<std::size_t>(g)];
    add("filter." + layer + ".w_node", gp.w_node);
    add("filter." + layer + ".w_query", gp.w_query);
    add_mlp("filter." + layer + ".mlp", gp.mlp);
    auto& rp = relate_params[static_cast<std::size_t>(g)];
    add("relate." + layer + ".w_query", rp.w_query);
    add("relate." + layer + ".w_edge", rp.w_edge);
    add_mlp("relate." + layer + ".mlp", rp.mlp);
  }
  for (int s = 0; s < 3; ++s) {
    for (int d = 0; d < 3; ++d) {
      if (s == d) continue;
      const std::string prefix = std::string("cross.") + kLayerNames[s] + "_to_" + kLayerNames[d];
      auto& cp = cross_params[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)];
      add(prefix + ".w_src", cp.w_src);
      add(prefix + ".w_dst", cp.w_dst);
      add(prefix + ".w_out", cp.w_out);
    }
  }
  for (int g = 0; g < 3; ++g)
    add(std::string("answer.proj_") + kLayerNames[g], answer_graph_proj[static_cast<std::size_t>(g)]);
  add("answer.proj_question", answer_question_proj);
  add_mlp("answer.head", answer_head);
  return out;
}

std::vector<Tensor> Model::parameters() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

namespace {

AttentionMap run_module(Tape& tp, const Model& model, const ModuleRef& ref, const MultiLayerGraph& graphs,
                        const std::array<AttentionMap, 3>& prev, const std::array<AttentionMap, 3>& prev2,
                        const Tensor& query) {
  const HeteroGraph& g = graphs.layer(ref.graph);
  const auto gi = static_cast<std::size_t>(ref.graph);
  switch (ref.kind) {
    case ModuleKind::kFind:
      return find(tp, model.find_params[gi], g, query);
    case ModuleKind::kAnd:
      return and_op(tp, prev[gi], prev2[gi]);
    case ModuleKind::kFilter:
      return filter(tp, model.filter_params[gi], g, prev[gi], query);
    case ModuleKind::kRelate:
      return relate(tp, model.relate_params[gi], g, prev[gi], query);
    case ModuleKind::kCrossGraph: {
      const auto si = static_cast<std::size_t>(ref.src_graph);
      return cross_graph(tp, model.cross_params[si][gi], graphs.layer(ref.src_graph), g, prev[si],
                         prev[gi], query);
    }
    case ModuleKind::kNoOp:
      return noop(prev[gi]);
    case ModuleKind::kDescribe:
      break;
  }
  throw std::logic_error("run_module: Describe is not part of the step inventory");
}

}  // namespace

std::array<AttentionMap, 3> execute_step(Tape& tp, const Model& model, const MultiLayerGraph& graphs,
                                         const std::array<AttentionMap, 3>& prev,
                                         const std::array<AttentionMap, 3>& prev2,
                                         const Tensor& module_weights, const Tensor& query) {
  const auto& inventory = model.inventory();
  if (module_weights.dim(0) != static_cast<int>(inventory.size()))
    throw std::invalid_argument("execute_step: weight vector does not match inventory size");

  std::array<AttentionMap, 3> next;
  for (int g = 0; g < 3; ++g) {
    std::vector<std::pair<int, AttentionMap>> outputs;
    for (std::size_t m = 0; m < inventory.size(); ++m) {
      if (inventory[m].graph != g) continue;
      outputs.emplace_back(static_cast<int>(m),
                           run_module(tp, model, inventory[m], graphs, prev, prev2, query));
    }
    Tensor partition_mass;
    std::vector<Tensor> picks;
    for (const auto& [idx, unused] : outputs) {
      picks.push_back(tp.pick(module_weights, idx));
      partition_mass = partition_mass.defined() ? tp.add(partition_mass, picks.back()) : picks.back();
    }
    Tensor blended;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      Tensor coeff = tp.div(picks[i], partition_mass);
      Tensor term = tp.smul(outputs[i].second.weights, coeff);
      blended = blended.defined() ? tp.add(blended, term) : term;
    }
    next[static_cast<std::size_t>(g)] = {graphs.layer(g).modality, tp.norm_l1(blended)};
  }
  return next;
}

Tensor predict_answer(Tape& tp, const Model& model, const MultiLayerGraph& graphs,
                      const std::array<AttentionMap, 3>& final_maps, const Tensor& question_vec) {
  if (model.config().vocab_size() < 1) throw std::invalid_argument("predict_answer: empty answer vocabulary");
  std::vector<Tensor> parts;
  for (int g = 0; g < 3; ++g) {
    Tensor y = describe(tp, graphs.layer(g), final_maps[static_cast<std::size_t>(g)]);
    parts.push_back(tp.matmul(model.answer_graph_proj[static_cast<std::size_t>(g)], y));
  }
  parts.push_back(tp.matmul(model.answer_question_proj, question_vec));
  return mlp_forward(tp, model.answer_head, tp.concat(parts));
}

namespace {

int vec_argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace

ReasoningResult run_reasoning(Tape& tp, const Model& model, const MultiLayerGraph& graphs,
                              const std::vector<std::string>& question, const EmbeddingTable& emb) {
  const ModelConfig& cfg = model.config();
  for (int g = 0; g < 3; ++g) {
    const auto violations = validate_graph(graphs.layer(g));
    if (!violations.empty())
      throw std::invalid_argument("run_reasoning: invalid " + std::string(modality_name(graphs.layer(g).modality)) +
                                  " graph: " + violations.front());
  }

  ReasoningResult result;
  result.trace.question_tokens = question;
  result.trace.module_names = model.module_names();
  for (int g = 0; g < 3; ++g)
    result.trace.node_labels[static_cast<std::size_t>(g)] = graphs.layer(g).node_labels;

  QuestionEncoding enc = encode_question(tp, model.encoder, emb, question, cfg.question_len);
  result.trace.question_tokens = enc.tokens;

  std::array<AttentionMap, 3> initial;
  for (int g = 0; g < 3; ++g) initial[static_cast<std::size_t>(g)] = uniform_attention(graphs.layer(g));

  std::vector<std::array<AttentionMap, 3>> history;
  history.push_back(initial);
  Tensor c_prev = Tensor::zeros({cfg.hidden_dim});

  for (int t = 0; t < cfg.steps; ++t) {
    ControllerStep ctrl = step_controller(tp, model.controller, enc, c_prev);
    const auto& prev = history.back();
    const auto& prev2 = history[history.size() > 1 ? history.size() - 2 : 0];
    auto next = execute_step(tp, model, graphs, prev, prev2, ctrl.module_weights, ctrl.query);
    history.push_back(next);
    c_prev = ctrl.query;

    StepRecord rec;
    rec.step = t;
    rec.module_weights = ctrl.module_weights.data();
    rec.argmax_module = vec_argmax(rec.module_weights);
    rec.word_attention = ctrl.word_attention.data();
    rec.argmax_word = vec_argmax(rec.word_attention);
    for (int g = 0; g < 3; ++g) {
      rec.graph_attention[static_cast<std::size_t>(g)] = next[static_cast<std::size_t>(g)].weights.data();
      rec.graph_argmax[static_cast<std::size_t>(g)] = next[static_cast<std::size_t>(g)].argmax();
    }
    result.trace.steps.push_back(std::move(rec));
  }

  result.logits = predict_answer(tp, model, graphs, history.back(), enc.question);
  result.trace.logits = result.logits.data();
  result.trace.answer_index = vec_argmax(result.trace.logits);
  return result;
}

}  // namespace gmn
