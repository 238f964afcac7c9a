#include "gmn/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace gmn {

const std::vector<std::string>& default_relation_whitelist() {
  static const std::vector<std::string> kRelations = {
      "UsedFor", "MadeOf", "CapableOf", "IsA",     "AtLocation",
      "PartOf",  "HasA",   "Causes",    "Desires", "HasProperty"};
  return kRelations;
}

void EmbeddingTable::insert(const std::string& word, std::vector<double> vec) {
  if (dim_ == 0) dim_ = static_cast<int>(vec.size());
  if (static_cast<int>(vec.size()) != dim_)
    throw std::invalid_argument("embedding table: vector for '" + word + "' has dimension " +
                                std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
  vecs_[word] = std::move(vec);
}

std::vector<double> EmbeddingTable::lookup(const std::string& word) const {
  auto it = vecs_.find(lowercase(word));
  if (it == vecs_.end()) {
    ++oov_count_;
    return std::vector<double>(static_cast<std::size_t>(dim_), 0.0);
  }
  return it->second;
}

std::vector<double> EmbeddingTable::embed_phrase(const std::string& phrase) const {
  const auto tokens = split_tokens(phrase);
  std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
  if (tokens.empty()) return acc;
  for (const auto& tok : tokens) {
    const auto v = lookup(tok);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  for (double& v : acc) v /= static_cast<double>(tokens.size());
  return acc;
}

std::vector<std::string> split_tokens(const std::string& phrase) {
  std::vector<std::string> out;
  std::istringstream is(phrase);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace gmn
