#include "gmn/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gmn {

namespace {

Json tensor_to_json(const Tensor& t) {
  return Json{{"shape", t.shape()}, {"data", t.data()}};
}

Tensor tensor_from_json(const Json& j) {
  return Tensor::from(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

Json graph_to_json(const HeteroGraph& g) {
  Json j;
  j["modality"] = modality_name(g.modality);
  j["node_labels"] = g.node_labels;
  j["node_features"] = tensor_to_json(g.node_features);
  Json edges = Json::array();
  for (const auto& [u, v] : g.edges) edges.push_back(Json::array({u, v}));
  j["edges"] = edges;
  if (g.edge_features.defined()) j["edge_features"] = tensor_to_json(g.edge_features);
  j["edge_labels"] = g.edge_labels;
  return j;
}

Modality modality_from_name(const std::string& name) {
  if (name == "visual") return Modality::kVisual;
  if (name == "semantic") return Modality::kSemantic;
  if (name == "commonsense") return Modality::kCommonsense;
  throw std::runtime_error("unknown modality '" + name + "'");
}

HeteroGraph graph_from_json(const Json& j) {
  HeteroGraph g;
  g.modality = modality_from_name(j.at("modality").get<std::string>());
  g.node_labels = j.at("node_labels").get<std::vector<std::string>>();
  g.node_features = tensor_from_json(j.at("node_features"));
  for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  if (j.contains("edge_features")) g.edge_features = tensor_from_json(j.at("edge_features"));
  g.edge_labels = j.at("edge_labels").get<std::vector<std::string>>();
  return g;
}

Json task_to_json(const SyntheticTask& task) {
  Json j;
  j["graphs"] = Json{{"visual", graph_to_json(task.graphs.visual)},
                     {"semantic", graph_to_json(task.graphs.semantic)},
                     {"commonsense", graph_to_json(task.graphs.commonsense)}};
  j["question"] = task.question;
  j["answer"] = task.answer;
  j["answer_index"] = task.answer_index;
  j["hops"] = task.hops;
  j["program"] = task.program;
  return j;
}

SyntheticTask task_from_json(const Json& j) {
  SyntheticTask task;
  task.graphs.visual = graph_from_json(j.at("graphs").at("visual"));
  task.graphs.semantic = graph_from_json(j.at("graphs").at("semantic"));
  task.graphs.commonsense = graph_from_json(j.at("graphs").at("commonsense"));
  task.question = j.at("question").get<std::vector<std::string>>();
  task.answer = j.at("answer").get<std::string>();
  task.answer_index = j.at("answer_index").get<int>();
  task.hops = j.at("hops").get<int>();
  task.program = j.at("program").get<std::vector<std::string>>();
  return task;
}

}  // namespace

Json dataset_to_json(const Dataset& data) {
  Json j;
  j["format"] = "gmn-dataset";
  j["version"] = kDatasetVersion;
  j["embedding_dim"] = data.embeddings.dim();
  Json emb = Json::object();
  for (const auto& [word, vec] : data.embeddings.entries()) emb[word] = vec;
  j["embeddings"] = emb;
  j["answer_vocab"] = data.answer_vocab;
  Json train = Json::array(), test = Json::array();
  for (const auto& t : data.train) train.push_back(task_to_json(t));
  for (const auto& t : data.test) test.push_back(task_to_json(t));
  j["train"] = train;
  j["test"] = test;
  return j;
}

Dataset dataset_from_json(const Json& j) {
  if (j.value("format", "") != "gmn-dataset")
    throw std::runtime_error("dataset: not a gmn-dataset file");
  const int version = j.value("version", -1);
  if (version != kDatasetVersion)
    throw std::runtime_error("dataset: file version " + std::to_string(version) +
                             " unsupported; expected " + std::to_string(kDatasetVersion));
  Dataset data;
  data.embeddings = EmbeddingTable(j.at("embedding_dim").get<int>());
  for (const auto& [word, vec] : j.at("embeddings").items())
    data.embeddings.insert(word, vec.get<std::vector<double>>());
  data.answer_vocab = j.at("answer_vocab").get<std::vector<std::string>>();
  for (const auto& t : j.at("train")) data.train.push_back(task_from_json(t));
  for (const auto& t : j.at("test")) data.test.push_back(task_from_json(t));
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  write_json_file(dataset_to_json(data), path);
}

Dataset load_dataset(const std::string& path) { return dataset_from_json(load_json_file(path)); }

Json checkpoint_to_json(Model& model, const std::string& rng_state) {
  const ModelConfig& cfg = model.config();
  Json j;
  j["format"] = "gmn-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = Json{{"embed_dim", cfg.embed_dim},
                     {"hidden_dim", cfg.hidden_dim},
                     {"question_len", cfg.question_len},
                     {"steps", cfg.steps},
                     {"node_dims", cfg.node_dims},
                     {"edge_dims", cfg.edge_dims},
                     {"answer_vocab", cfg.answer_vocab},
                     {"ablation", ablation_names(cfg.ablation)},
                     {"init_seed", cfg.init_seed}};
  j["rng_state"] = rng_state;
  Json params = Json::object();
  for (auto& [name, tensor] : model.named_parameters()) params[name] = tensor_to_json(tensor);
  j["params"] = params;
  return j;
}

Model checkpoint_from_json(const Json& j, std::string* rng_state) {
  if (j.value("format", "") != "gmn-checkpoint")
    throw std::runtime_error("checkpoint: not a gmn-checkpoint file");
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: file version " + std::to_string(version) +
                             " unsupported; expected " + std::to_string(kCheckpointVersion));
  const Json& c = j.at("config");
  ModelConfig cfg;
  cfg.embed_dim = c.at("embed_dim").get<int>();
  cfg.hidden_dim = c.at("hidden_dim").get<int>();
  cfg.question_len = c.at("question_len").get<int>();
  cfg.steps = c.at("steps").get<int>();
  cfg.node_dims = c.at("node_dims").get<std::array<int, 3>>();
  cfg.edge_dims = c.at("edge_dims").get<std::array<int, 3>>();
  cfg.answer_vocab = c.at("answer_vocab").get<std::vector<std::string>>();
  for (const auto& name : c.at("ablation").get<std::vector<std::string>>())
    apply_ablation_name(&cfg.ablation, name);
  cfg.init_seed = c.at("init_seed").get<std::uint64_t>();

  Model model(cfg);
  const Json& params = j.at("params");
  std::size_t used = 0;
  for (auto& [name, tensor] : model.named_parameters()) {
    if (!params.contains(name)) throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
    Tensor stored = tensor_from_json(params.at(name));
    if (stored.shape() != tensor.shape())
      throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " + shape_str(stored.shape()) +
                               ", expected " + shape_str(tensor.shape()));
    const_cast<Tensor&>(tensor).data() = stored.data();
    ++used;
  }
  if (used != params.size())
    throw std::runtime_error("checkpoint: file carries " + std::to_string(params.size()) +
                             " parameters, model expects " + std::to_string(used));
  if (rng_state) *rng_state = j.value("rng_state", "");
  return model;
}

void save_checkpoint(Model& model, const std::string& rng_state, const std::string& path) {
  write_json_file(checkpoint_to_json(model, rng_state), path);
}

Model load_checkpoint(const std::string& path, std::string* rng_state) {
  return checkpoint_from_json(load_json_file(path), rng_state);
}

Json trace_to_json(const ReasoningTrace& trace, const std::vector<std::string>& answer_vocab,
                   bool omit_noop) {
  std::size_t keep = trace.steps.size();
  if (omit_noop) {
    while (keep > 0) {
      const StepRecord& rec = trace.steps[keep - 1];
      const std::string& name = trace.module_names[static_cast<std::size_t>(rec.argmax_module)];
      if (name.rfind("NoOp", 0) != 0) break;
      --keep;
    }
  }

  Json j;
  j["format"] = "gmn-trace";
  j["version"] = kTraceVersion;
  j["question"] = trace.question_tokens;
  j["modules"] = trace.module_names;
  j["graphs"] = Json{{"visual", Json{{"node_labels", trace.node_labels[0]}}},
                     {"semantic", Json{{"node_labels", trace.node_labels[1]}}},
                     {"commonsense", Json{{"node_labels", trace.node_labels[2]}}}};
  Json steps = Json::array();
  const char* layer_names[3] = {"visual", "semantic", "commonsense"};
  for (std::size_t s = 0; s < keep; ++s) {
    const StepRecord& rec = trace.steps[s];
    Json step;
    step["step"] = rec.step;
    step["module_weights"] = rec.module_weights;
    step["argmax_module"] = trace.module_names[static_cast<std::size_t>(rec.argmax_module)];
    step["word_attention"] = rec.word_attention;
    step["argmax_token"] = trace.question_tokens[static_cast<std::size_t>(rec.argmax_word)];
    Json node_attention = Json::object(), argmax_nodes = Json::object();
    for (int g = 0; g < 3; ++g) {
      node_attention[layer_names[g]] = rec.graph_attention[static_cast<std::size_t>(g)];
      argmax_nodes[layer_names[g]] =
          trace.node_labels[static_cast<std::size_t>(g)][static_cast<std::size_t>(rec.graph_argmax[static_cast<std::size_t>(g)])];
    }
    step["node_attention"] = node_attention;
    step["argmax_nodes"] = argmax_nodes;
    steps.push_back(step);
  }
  j["steps"] = steps;
  j["answer"] = answer_vocab.at(static_cast<std::size_t>(trace.answer_index));
  j["answer_index"] = trace.answer_index;
  j["logits"] = trace.logits;
  return j;
}

namespace {

const char* json_type_name(const Json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  return "null";
}

bool matches_type(const std::string& type, const Json& v) {
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer() || v.is_number_unsigned();
  return type == json_type_name(v);
}

bool validate_node(const Json& schema, const Json& value, const std::string& where, std::string* error) {
  if (schema.contains("type")) {
    const std::string type = schema.at("type").get<std::string>();
    if (!matches_type(type, value)) {
      *error = where + ": expected " + type + ", got " + json_type_name(value);
      return false;
    }
  }
  if (schema.contains("enum")) {
    bool hit = false;
    for (const auto& option : schema.at("enum"))
      if (option == value) hit = true;
    if (!hit) {
      *error = where + ": value not in enum";
      return false;
    }
  }
  if (schema.contains("required")) {
    for (const auto& key : schema.at("required")) {
      if (!value.contains(key.get<std::string>())) {
        *error = where + ": missing required key '" + key.get<std::string>() + "'";
        return false;
      }
    }
  }
  if (schema.contains("properties") && value.is_object()) {
    for (const auto& [key, sub] : schema.at("properties").items()) {
      if (!value.contains(key)) continue;
      if (!validate_node(sub, value.at(key), where + "." + key, error)) return false;
    }
  }
  if (schema.contains("items") && value.is_array()) {
    const Json& item_schema = schema.at("items");
    for (std::size_t i = 0; i < value.size(); ++i)
      if (!validate_node(item_schema, value[i], where + "[" + std::to_string(i) + "]", error)) return false;
  }
  return true;
}

}  // namespace

bool validate_against_schema(const Json& schema, const Json& value, std::string* error) {
  std::string local;
  if (!validate_node(schema, value, "$", error ? error : &local)) return false;
  return true;
}

const Json& trace_schema() {
  static const Json kSchema = Json::parse(R"({
  "type": "object",
  "required": ["format", "version", "question", "modules", "graphs", "steps", "answer", "answer_index", "logits"],
  "properties": {
    "format": {"type": "string", "enum": ["gmn-trace"]},
    "version": {"type": "integer"},
    "question": {"type": "array", "items": {"type": "string"}},
    "modules": {"type": "array", "items": {"type": "string"}},
    "graphs": {
      "type": "object",
      "required": ["visual", "semantic", "commonsense"],
      "properties": {
        "visual": {"type": "object", "required": ["node_labels"], "properties": {"node_labels": {"type": "array", "items": {"type": "string"}}}},
        "semantic": {"type": "object", "required": ["node_labels"], "properties": {"node_labels": {"type": "array", "items": {"type": "string"}}}},
        "commonsense": {"type": "object", "required": ["node_labels"], "properties": {"node_labels": {"type": "array", "items": {"type": "string"}}}}
      }
    },
    "steps": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["step", "module_weights", "argmax_module", "word_attention", "argmax_token", "node_attention", "argmax_nodes"],
        "properties": {
          "step": {"type": "integer"},
          "module_weights": {"type": "array", "items": {"type": "number"}},
          "argmax_module": {"type": "string"},
          "word_attention": {"type": "array", "items": {"type": "number"}},
          "argmax_token": {"type": "string"},
          "node_attention": {
            "type": "object",
            "required": ["visual", "semantic", "commonsense"],
            "properties": {
              "visual": {"type": "array", "items": {"type": "number"}},
              "semantic": {"type": "array", "items": {"type": "number"}},
              "commonsense": {"type": "array", "items": {"type": "number"}}
            }
          },
          "argmax_nodes": {
            "type": "object",
            "required": ["visual", "semantic", "commonsense"]
          }
        }
      }
    },
    "answer": {"type": "string"},
    "answer_index": {"type": "integer"},
    "logits": {"type": "array", "items": {"type": "number"}}
  }
})");
  return kSchema;
}

Json metrics_to_json(const Metrics& m) {
  Json per_hop = Json::object();
  for (const auto& [hops, acc] : m.per_hop_accuracy) per_hop[std::to_string(hops)] = acc;
  Json counts = Json::object();
  for (const auto& [hops, count] : m.per_hop_counts) counts[std::to_string(hops)] = count;
  return Json{{"accuracy", m.accuracy},
              {"per_hop_accuracy", per_hop},
              {"per_hop_counts", counts},
              {"loss_curve", m.loss_curve},
              {"epochs_run", m.epochs_run}};
}

namespace {

void expect(bool ok, std::vector<std::string>* errors, const std::string& message) {
  if (!ok) errors->push_back(message);
}

}  // namespace

Annotations load_annotations(const AnnotationPaths& paths) {
  Annotations out;
  std::vector<std::string> errors;

  // detections: JSON array of {bbox, label, score, feature}
  {
    Json j = load_json_file(paths.detections);
    if (!j.is_array()) {
      errors.push_back("detections: expected a JSON array");
    } else {
      int feature_dim = -1;
      for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "detections[" + std::to_string(i) + "]";
        const Json& rec = j[i];
        if (!rec.is_object() || !rec.contains("bbox") || !rec.contains("label") || !rec.contains("score") ||
            !rec.contains("feature")) {
          errors.push_back(where + ": missing one of bbox/label/score/feature");
          continue;
        }
        Detection det;
        const auto bbox = rec.at("bbox").get<std::vector<double>>();
        if (bbox.size() != 4) {
          errors.push_back(where + ": bbox must have 4 entries");
          continue;
        }
        std::copy(bbox.begin(), bbox.end(), det.bbox.begin());
        det.label = rec.at("label").get<std::string>();
        det.score = rec.at("score").get<double>();
        det.feature = rec.at("feature").get<std::vector<double>>();
        expect(det.bbox[2] > 0.0, &errors, where + ": nonpositive bbox width");
        expect(det.bbox[3] > 0.0, &errors, where + ": nonpositive bbox height");
        expect(det.score >= 0.0 && det.score <= 1.0, &errors, where + ": score outside [0,1]");
        expect(!det.feature.empty(), &errors, where + ": empty feature vector");
        if (feature_dim < 0) feature_dim = static_cast<int>(det.feature.size());
        expect(static_cast<int>(det.feature.size()) == feature_dim, &errors,
               where + ": feature dimension differs from earlier records");
        out.detections.push_back(std::move(det));
      }
    }
  }

  // captions: JSON array of {subject, relation, object, attributes};
  // at most 10 tuples are kept.
  {
    Json j = load_json_file(paths.captions);
    if (!j.is_array()) {
      errors.push_back("captions: expected a JSON array");
    } else {
      for (std::size_t i = 0; i < j.size() && i < static_cast<std::size_t>(kDefaultMaxCaptions); ++i) {
        const std::string where = "captions[" + std::to_string(i) + "]";
        const Json& rec = j[i];
        CaptionTuple tup;
        tup.subject = rec.value("subject", "");
        tup.relation = rec.value("relation", "");
        tup.object = rec.value("object", "");
        if (rec.contains("attributes")) tup.subject_attributes = rec.at("attributes").get<std::vector<std::string>>();
        expect(!tup.subject.empty(), &errors, where + ": empty subject");
        expect(!tup.object.empty(), &errors, where + ": empty object");
        out.tuples.push_back(std::move(tup));
      }
    }
  }

  // triples: head <TAB> relation <TAB> tail <TAB> score
  {
    std::ifstream in(paths.triples);
    if (!in) {
      errors.push_back("triples: cannot open " + paths.triples);
    } else {
      const auto& whitelist = default_relation_whitelist();
      std::string line;
      int lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = "triples line " + std::to_string(lineno);
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
          const auto tab = line.find('\t', start);
          fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
          if (tab == std::string::npos) break;
          start = tab + 1;
        }
        if (fields.size() != 4) {
          errors.push_back(where + ": expected 4 tab-separated fields, got " + std::to_string(fields.size()));
          continue;
        }
        KnowledgeTriple t{fields[0], fields[1], fields[2], 0.0};
        try {
          t.score = std::stod(fields[3]);
        } catch (const std::exception&) {
          errors.push_back(where + ": score is not a number");
          continue;
        }
        expect(std::find(whitelist.begin(), whitelist.end(), t.relation) != whitelist.end(), &errors,
               where + ": relation '" + t.relation + "' not in whitelist");
        expect(t.score >= 0.0 && t.score <= 1.0, &errors, where + ": score outside [0,1]");
        out.triples.push_back(std::move(t));
      }
    }
  }

  // embeddings: "word v1 v2 ... vd" per line
  {
    std::ifstream in(paths.embeddings);
    if (!in) {
      errors.push_back("embeddings: cannot open " + paths.embeddings);
    } else {
      std::string line;
      int lineno = 0;
      int dim = -1;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = "embeddings line " + std::to_string(lineno);
        std::istringstream is(line);
        std::string word;
        is >> word;
        std::vector<double> vec;
        double v;
        while (is >> v) vec.push_back(v);
        if (word.empty() || vec.empty()) {
          errors.push_back(where + ": expected 'word v1 ... vd'");
          continue;
        }
        if (dim < 0) dim = static_cast<int>(vec.size());
        if (static_cast<int>(vec.size()) != dim) {
          errors.push_back(where + ": dimension " + std::to_string(vec.size()) + " differs from " +
                           std::to_string(dim));
          continue;
        }
        if (out.embeddings.dim() == 0) out.embeddings = EmbeddingTable(dim);
        out.embeddings.insert(word, std::move(vec));
      }
    }
  }

  if (!errors.empty()) {
    std::string msg = "annotation validation failed:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  return out;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

TrainSpec train_spec_from_kv(const std::map<std::string, std::string>& kv) {
  TrainSpec spec;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "data") spec.data_path = value;
      else if (key == "learning_rate") spec.config.learning_rate = std::stod(value);
      else if (key == "steps") spec.config.steps = std::stoi(value);
      else if (key == "hidden_dim") spec.config.hidden_dim = std::stoi(value);
      else if (key == "question_len") spec.config.question_len = std::stoi(value);
      else if (key == "epochs") spec.config.epochs = std::stoi(value);
      else if (key == "batch_size") spec.config.batch_size = std::stoi(value);
      else if (key == "seed") spec.config.seed = std::stoull(value);
      else if (key == "stop_accuracy") spec.config.stop_accuracy = std::stod(value);
      else if (key == "patience") spec.config.patience = std::stoi(value);
      else if (key == "eval_every") spec.config.eval_every = std::stoi(value);
      else if (key == "verbose") spec.config.verbose = (value == "1" || value == "true");
      else if (key == "ablate") {
        std::istringstream is(value);
        std::string name;
        while (std::getline(is, name, ','))
          if (!name.empty()) apply_ablation_name(&spec.config.ablation, name);
      } else {
        throw std::runtime_error("config: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config: bad value '" + value + "' for key '" + key + "'");
    }
  }
  if (spec.data_path.empty()) throw std::runtime_error("config: missing required key 'data'");
  spec.config.validate();
  return spec;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("cannot parse " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace gmn
