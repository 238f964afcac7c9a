#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace gmn {

// Object detector output, ingested from file. bbox is (x, y, w, h) in
// pixels; score is the detector's label probability.
struct Detection {
  std::array<double, 4> bbox{};
  std::string label;
  double score = 0.0;
  std::vector<double> feature;
};

// One parsed caption tuple: subject --relation--> object, with optional
// attributes attached to the subject.
struct CaptionTuple {
  std::string subject;
  std::string relation;
  std::string object;
  std::vector<std::string> subject_attributes;
};

// Knowledge-base triple (head, relation, tail) with retrieval score.
struct KnowledgeTriple {
  std::string head;
  std::string relation;
  std::string tail;
  double score = 0.0;

  bool operator==(const KnowledgeTriple&) const = default;
};

// The 10 knowledge relation types kept during retrieval.
const std::vector<std::string>& default_relation_whitelist();

// Pretrained word-embedding table. Unknown words map to the zero
// vector; lookups of unknown words are counted so builders can report
// them.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(int dim) : dim_(dim) {}

  void insert(const std::string& word, std::vector<double> vec);
  bool contains(const std::string& word) const { return vecs_.count(word) > 0; }
  int dim() const { return dim_; }
  std::size_t size() const { return vecs_.size(); }

  // Embedding of a single word; zero vector when out of vocabulary.
  std::vector<double> lookup(const std::string& word) const;

  // Mean of the word embeddings of a whitespace-separated phrase.
  std::vector<double> embed_phrase(const std::string& phrase) const;

  std::size_t oov_count() const { return oov_count_; }
  void reset_oov_count() { oov_count_ = 0; }

  const std::map<std::string, std::vector<double>>& entries() const { return vecs_; }

 private:
  int dim_ = 0;
  std::map<std::string, std::vector<double>> vecs_;
  mutable std::size_t oov_count_ = 0;
};

std::vector<std::string> split_tokens(const std::string& phrase);
std::string lowercase(const std::string& s);

}  // namespace gmn
