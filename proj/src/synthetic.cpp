#include "gmn/synthetic.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gmn/builder.hpp"

namespace gmn {

namespace {

const std::vector<std::string> kNouns = {"car",  "dog",   "helmet", "bike", "man",  "tree",
                                         "cup",  "book",  "chair",  "ball", "lamp", "phone"};
const std::vector<std::string> kColors = {"red", "blue", "green", "black", "white", "yellow"};
const std::vector<std::string> kVerbs = {"riding", "holding", "watching", "facing", "touching"};

struct KnowledgeFamily {
  std::string relation;                 // whitelist relation name
  std::vector<std::string> phrase;      // question phrasing tokens
  std::vector<std::string> tails;
};

const std::vector<KnowledgeFamily>& knowledge_families() {
  static const std::vector<KnowledgeFamily> kFamilies = {
      {"UsedFor", {"used", "for"},
       {"protection", "transport", "reading", "sitting", "drinking", "lighting", "exercise"}},
      {"MadeOf", {"made", "of"}, {"metal", "wood", "plastic", "glass", "leather", "rubber"}},
      {"CapableOf", {"capable", "of"},
       {"barking", "rolling", "ringing", "growing", "floating", "bouncing"}},
  };
  return kFamilies;
}

const std::vector<std::string>& generator_vocabulary() {
  static const std::vector<std::string> kVocab = [] {
    std::vector<std::string> v;
    auto push_all = [&](const std::vector<std::string>& words) {
      v.insert(v.end(), words.begin(), words.end());
    };
    push_all(kNouns);
    push_all(kColors);
    push_all(kVerbs);
    for (const auto& fam : knowledge_families()) {
      push_all(fam.phrase);
      push_all(fam.tails);
      v.push_back(lowercase(fam.relation));
    }
    push_all({"what", "color", "is", "the", "object", "attr"});
    std::vector<std::string> out;
    for (const auto& w : v)
      if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
    return out;
  }();
  return kVocab;
}

struct SceneObject {
  std::string noun;
  std::string color;
  std::array<double, 4> bbox{};
  double score = 0.0;
};

struct Scene {
  std::vector<SceneObject> objects;
  std::vector<CaptionTuple> tuples;
  std::vector<KnowledgeTriple> triples;
};

std::vector<int> sample_distinct(Rng& rng, int count, int upper) {
  std::vector<int> pool(static_cast<std::size_t>(upper));
  for (int i = 0; i < upper; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = upper - 1; i > 0; --i) std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(rng.below(i + 1))]);
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

// Knowledge-layer node budget: heads plus distinct tails stays <= 10
// so every layer lands in the 4..10 node range.
int kg_node_count(const Scene& scene) {
  std::set<std::string> nodes;
  for (const auto& t : scene.triples) {
    nodes.insert(t.head);
    nodes.insert(t.tail);
  }
  return static_cast<int>(nodes.size());
}

Scene sample_scene(Rng& rng, const GeneratorConfig& cfg, int question_family) {
  Scene scene;
  const int k = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
  const auto noun_idx = sample_distinct(rng, k, static_cast<int>(kNouns.size()));
  const auto color_idx = sample_distinct(rng, k, static_cast<int>(kColors.size()));
  for (int i = 0; i < k; ++i) {
    SceneObject obj;
    obj.noun = kNouns[static_cast<std::size_t>(noun_idx[static_cast<std::size_t>(i)])];
    obj.color = kColors[static_cast<std::size_t>(color_idx[static_cast<std::size_t>(i)])];
    obj.bbox = {rng.uniform(0.0, 500.0), rng.uniform(0.0, 380.0), rng.uniform(40.0, 180.0),
                rng.uniform(40.0, 180.0)};
    obj.score = rng.uniform(0.6, 0.99);
    scene.objects.push_back(obj);
  }

  // Semantic layer: one attribute tuple per object plus a couple of
  // relational tuples with unique (subject, verb) keys.
  for (const auto& obj : scene.objects)
    scene.tuples.push_back({obj.noun, "attr", obj.color, {}});
  const int num_relations = 1 + rng.below(2);
  std::set<std::pair<std::string, std::string>> used_keys;
  for (int r = 0; r < num_relations; ++r) {
    const int s = rng.below(k);
    int o = rng.below(k);
    if (o == s) o = (o + 1) % k;
    const std::string verb = kVerbs[static_cast<std::size_t>(rng.below(static_cast<int>(kVerbs.size())))];
    if (!used_keys.insert({scene.objects[static_cast<std::size_t>(s)].noun, verb}).second) continue;
    scene.tuples.push_back({scene.objects[static_cast<std::size_t>(s)].noun, verb,
                            scene.objects[static_cast<std::size_t>(o)].noun, {}});
  }

  // Knowledge layer: one triple of the question family per object, with
  // the tail resampled every scene so the answer cannot be memorized
  // from the head entity alone. Distractor triples from the other
  // families are added while the node budget allows.
  const auto& families = knowledge_families();
  const auto& fam = families[static_cast<std::size_t>(question_family)];
  for (const auto& obj : scene.objects) {
    const std::string& tail = fam.tails[static_cast<std::size_t>(rng.below(static_cast<int>(fam.tails.size())))];
    scene.triples.push_back({obj.noun, fam.relation, tail, rng.uniform(0.5, 0.99)});
  }
  for (int extra = 0; extra < 2; ++extra) {
    const auto& other = families[static_cast<std::size_t>(rng.below(static_cast<int>(families.size())))];
    if (other.relation == fam.relation) continue;
    const auto& obj = scene.objects[static_cast<std::size_t>(rng.below(k))];
    const std::string& tail = other.tails[static_cast<std::size_t>(rng.below(static_cast<int>(other.tails.size())))];
    KnowledgeTriple t{obj.noun, other.relation, tail, rng.uniform(0.5, 0.99)};
    Scene probe = scene;
    probe.triples.push_back(t);
    if (kg_node_count(probe) <= 10) scene.triples.push_back(t);
  }
  return scene;
}

MultiLayerGraph build_graphs(const Scene& scene, const GeneratorConfig& cfg, const EmbeddingTable& emb) {
  std::vector<Detection> detections;
  for (const auto& obj : scene.objects) {
    Detection det;
    det.bbox = obj.bbox;
    det.label = obj.noun;
    det.score = obj.score;
    det.feature = emb.lookup(obj.noun);
    const auto color_vec = emb.lookup(obj.color);
    det.feature.insert(det.feature.end(), color_vec.begin(), color_vec.end());
    detections.push_back(std::move(det));
  }

  std::vector<std::string> labels;
  std::map<std::string, double> object_scores;
  for (const auto& obj : scene.objects) {
    labels.push_back(obj.noun);
    object_scores[lowercase(obj.noun)] = obj.score;
  }

  MultiLayerGraph graphs;
  graphs.visual = build_visual_graph(detections, kDefaultMaxObjects);
  graphs.semantic = build_semantic_graph(scene.tuples, emb);
  graphs.commonsense = score_and_select(retrieve_first_order_subgraph(labels, scene.triples),
                                        object_scores, cfg.score_a, cfg.score_b, cfg.top_k, emb);
  return graphs;
}

struct Template {
  std::vector<std::string> question;
  std::string expected;
  std::vector<std::string> program;
  int hops = 0;
};

Template realize_template(Rng& rng, TaskFamily family, const Scene& scene, int question_family) {
  const int k = static_cast<int>(scene.objects.size());
  const SceneObject& target = scene.objects[static_cast<std::size_t>(rng.below(k))];
  Template t;
  switch (family) {
    case TaskFamily::kAttribute: {
      t.question = {"what", "color", "is", "the", target.noun};
      t.expected = target.color;
      t.program = {"find semantic " + target.noun, "relate semantic attr", "describe semantic"};
      t.hops = 1;
      break;
    }
    case TaskFamily::kRelational: {
      // Pick an existing relational tuple.
      std::vector<const CaptionTuple*> rel;
      for (const auto& tup : scene.tuples)
        if (tup.relation != "attr") rel.push_back(&tup);
      if (rel.empty()) return t;  // unsatisfiable, caller resamples
      const CaptionTuple& tup = *rel[static_cast<std::size_t>(rng.below(static_cast<int>(rel.size())))];
      t.question = {"what", "is", "the", tup.subject, tup.relation};
      t.expected = tup.object;
      t.program = {"find semantic " + tup.subject, "relate semantic " + tup.relation,
                   "describe semantic"};
      t.hops = 2;
      break;
    }
    case TaskFamily::kCrossGraphKnowledge: {
      const auto& fam = knowledge_families()[static_cast<std::size_t>(question_family)];
      std::string tail;
      for (const auto& triple : scene.triples)
        if (triple.head == target.noun && triple.relation == fam.relation) tail = triple.tail;
      if (tail.empty()) return t;
      t.question = {"what", "is", "the", target.color, "object"};
      t.question.insert(t.question.end(), fam.phrase.begin(), fam.phrase.end());
      t.expected = tail;
      t.program = {"find semantic " + target.color, "relate_in semantic attr",
                   "cross semantic commonsense", "relate commonsense " + fam.relation,
                   "describe commonsense"};
      t.hops = 3;
      break;
    }
    case TaskFamily::kMixed:
      throw std::logic_error("realize_template: mixed family must be resolved before sampling");
  }
  return t;
}

int layer_index(const std::string& name) {
  if (name == "visual") return 0;
  if (name == "semantic") return 1;
  if (name == "commonsense") return 2;
  throw std::invalid_argument("symbolic program: unknown layer '" + name + "'");
}

}  // namespace

TaskFamily task_family_from_name(const std::string& name) {
  if (name == "1hop" || name == "attribute") return TaskFamily::kAttribute;
  if (name == "2hop" || name == "relational") return TaskFamily::kRelational;
  if (name == "3hop" || name == "crossknowledge") return TaskFamily::kCrossGraphKnowledge;
  if (name == "mixed") return TaskFamily::kMixed;
  throw std::invalid_argument("unknown task family '" + name + "' (expected 1hop|2hop|3hop|mixed)");
}

const char* task_family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::kAttribute: return "1hop";
    case TaskFamily::kRelational: return "2hop";
    case TaskFamily::kCrossGraphKnowledge: return "3hop";
    case TaskFamily::kMixed: return "mixed";
  }
  return "?";
}

EmbeddingTable make_word_embeddings(int dim, std::uint64_t seed) {
  EmbeddingTable emb(dim);
  Rng rng(seed);
  for (const auto& word : generator_vocabulary()) {
    std::vector<double> vec(static_cast<std::size_t>(dim));
    for (double& v : vec) v = rng.uniform(-1.0, 1.0);
    emb.insert(word, std::move(vec));
  }
  return emb;
}

std::vector<std::string> answer_vocabulary(TaskFamily family) {
  std::vector<std::string> out;
  auto add_tails = [&] {
    for (const auto& fam : knowledge_families())
      out.insert(out.end(), fam.tails.begin(), fam.tails.end());
  };
  switch (family) {
    case TaskFamily::kAttribute: out = kColors; break;
    case TaskFamily::kRelational: out = kNouns; break;
    case TaskFamily::kCrossGraphKnowledge: add_tails(); break;
    case TaskFamily::kMixed:
      out = kColors;
      out.insert(out.end(), kNouns.begin(), kNouns.end());
      add_tails();
      break;
  }
  return out;
}

std::optional<std::string> run_symbolic_program(const std::vector<std::string>& program,
                                                const MultiLayerGraph& graphs) {
  std::set<int> current;
  int current_layer = -1;
  for (const auto& line : program) {
    std::istringstream is(line);
    std::string op, arg1, arg2;
    is >> op >> arg1;
    std::getline(is, arg2);
    if (!arg2.empty() && arg2.front() == ' ') arg2.erase(0, 1);

    if (op == "find") {
      const int layer = layer_index(arg1);
      const HeteroGraph& g = graphs.layer(layer);
      current.clear();
      for (int i = 0; i < g.num_nodes(); ++i)
        if (g.node_labels[static_cast<std::size_t>(i)] == arg2) current.insert(i);
      current_layer = layer;
    } else if (op == "relate" || op == "relate_in") {
      const int layer = layer_index(arg1);
      if (layer != current_layer) return std::nullopt;
      const HeteroGraph& g = graphs.layer(layer);
      std::set<int> next;
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (g.edge_labels[e] != arg2) continue;
        const auto& [u, v] = g.edges[e];
        if (op == "relate" && current.count(u)) next.insert(v);
        if (op == "relate_in" && current.count(v)) next.insert(u);
      }
      current = std::move(next);
    } else if (op == "cross") {
      const int src = layer_index(arg1);
      const int dst = layer_index(arg2);
      if (src != current_layer) return std::nullopt;
      const HeteroGraph& gs = graphs.layer(src);
      const HeteroGraph& gd = graphs.layer(dst);
      std::set<std::string> names;
      for (int i : current) names.insert(gs.node_labels[static_cast<std::size_t>(i)]);
      std::set<int> next;
      for (int i = 0; i < gd.num_nodes(); ++i)
        if (names.count(gd.node_labels[static_cast<std::size_t>(i)])) next.insert(i);
      current = std::move(next);
      current_layer = dst;
    } else if (op == "describe") {
      const int layer = layer_index(arg1);
      if (layer != current_layer || current.size() != 1) return std::nullopt;
      return graphs.layer(layer).node_labels[static_cast<std::size_t>(*current.begin())];
    } else {
      throw std::invalid_argument("symbolic program: unknown op '" + op + "'");
    }
    if (current.empty()) return std::nullopt;
  }
  return std::nullopt;
}

SyntheticTask generate_synthetic_task(Rng& rng, const GeneratorConfig& cfg, const EmbeddingTable& emb) {
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    TaskFamily family = cfg.family;
    if (family == TaskFamily::kMixed) {
      const int pickd = rng.below(3);
      family = pickd == 0 ? TaskFamily::kAttribute
                          : (pickd == 1 ? TaskFamily::kRelational : TaskFamily::kCrossGraphKnowledge);
    }
    const int question_family = rng.below(static_cast<int>(knowledge_families().size()));
    Scene scene = sample_scene(rng, cfg, question_family);
    Template tmpl = realize_template(rng, family, scene, question_family);
    if (tmpl.question.empty()) continue;

    SyntheticTask task;
    task.graphs = build_graphs(scene, cfg, emb);
    task.question = tmpl.question;
    task.program = tmpl.program;
    task.hops = tmpl.hops;

    const auto answer = run_symbolic_program(task.program, task.graphs);
    if (!answer.has_value() || *answer != tmpl.expected) continue;  // ambiguous scene
    task.answer = *answer;
    return task;
  }
  throw std::runtime_error("generate_synthetic_task: no satisfiable scene after " +
                           std::to_string(cfg.max_retries) + " attempts");
}

Dataset generate_dataset(const GeneratorConfig& cfg, int train_count, int test_count,
                         std::uint64_t seed) {
  Dataset data;
  data.embeddings = make_word_embeddings(cfg.embed_dim, cfg.embed_seed);
  data.answer_vocab = answer_vocabulary(cfg.family);
  Rng rng(seed);
  auto fill = [&](std::vector<SyntheticTask>& out, int count) {
    for (int i = 0; i < count; ++i) {
      SyntheticTask task = generate_synthetic_task(rng, cfg, data.embeddings);
      const auto it = std::find(data.answer_vocab.begin(), data.answer_vocab.end(), task.answer);
      if (it == data.answer_vocab.end())
        throw std::logic_error("generate_dataset: answer '" + task.answer + "' missing from vocabulary");
      task.answer_index = static_cast<int>(it - data.answer_vocab.begin());
      out.push_back(std::move(task));
    }
  };
  fill(data.train, train_count);
  fill(data.test, test_count);
  return data;
}

}  // namespace gmn
