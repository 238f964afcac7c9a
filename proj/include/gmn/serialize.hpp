#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gmn/annotations.hpp"
#include "gmn/controller.hpp"
#include "gmn/synthetic.hpp"
#include "gmn/training.hpp"

namespace gmn {

using Json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kDatasetVersion = 1;
inline constexpr int kTraceVersion = 1;

// ---- dataset ----

Json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const Json& j);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

// ---- checkpoint ----

Json checkpoint_to_json(Model& model, const std::string& rng_state);
// Rebuilds the model from the stored config and parameter tensors.
// A version mismatch raises an error naming both versions.
Model checkpoint_from_json(const Json& j, std::string* rng_state = nullptr);
void save_checkpoint(Model& model, const std::string& rng_state, const std::string& path);
Model load_checkpoint(const std::string& path, std::string* rng_state = nullptr);

// ---- reasoning trace ----

// Serializes a trace. With omit_noop, trailing steps whose argmax
// module is a NoOp are dropped.
Json trace_to_json(const ReasoningTrace& trace, const std::vector<std::string>& answer_vocab,
                   bool omit_noop);

// Minimal JSON-Schema validator covering the subset the shipped trace
// schema uses: type, properties, required, items, enum. Returns true on
// success; otherwise fills *error with the first violation found.
bool validate_against_schema(const Json& schema, const Json& value, std::string* error);

// The schema the trace files are validated against (the same document
// shipped at schemas/trace.schema.json).
const Json& trace_schema();

// ---- metrics ----

Json metrics_to_json(const Metrics& m);

// ---- annotation ingestion ----

struct AnnotationPaths {
  std::string detections;
  std::string captions;
  std::string triples;
  std::string embeddings;
};

struct Annotations {
  std::vector<Detection> detections;
  std::vector<CaptionTuple> tuples;
  std::vector<KnowledgeTriple> triples;
  EmbeddingTable embeddings;
};

// Parses and validates the four annotation formats. All schema
// violations are collected and reported together, each naming its
// record or line number. Caption tuples beyond the first 10 are
// dropped at ingestion.
Annotations load_annotations(const AnnotationPaths& paths);

// ---- flat key-value config files ----

// Lines of "key = value"; '#' starts a comment.
std::map<std::string, std::string> parse_kv_file(const std::string& path);

struct TrainSpec {
  TrainConfig config;
  std::string data_path;
};

// Builds a training spec from a parsed config file. Unknown keys raise.
TrainSpec train_spec_from_kv(const std::map<std::string, std::string>& kv);

Json load_json_file(const std::string& path);
void write_json_file(const Json& j, const std::string& path);
std::string read_text_file(const std::string& path);

}  // namespace gmn
