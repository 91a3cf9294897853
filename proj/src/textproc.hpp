#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace ilmt {

using Tokens = std::vector<std::string>;

struct SentencePair {
  Tokens src;
  Tokens tgt;
  std::size_t id = 0;
};

// Rule-based tokenizer: split on whitespace, then detach leading/trailing
// punctuation runs from alphanumeric material as separate tokens. Idempotent
// on its own output.
Tokens tokenize(std::string_view line);

// Most-frequent-casing table keyed by lowercased form. Only the first token
// of a sentence is ever re-cased.
class TruecaseModel {
 public:
  void learn(const Tokens& sentence);
  Tokens apply(const Tokens& sentence) const;

  void save(const std::string& path) const;
  static TruecaseModel load(const std::string& path);

  std::size_t size() const { return best_.size(); }

 private:
  struct Entry {
    std::string casing;
    std::uint64_t count = 0;
  };
  // lowercased form -> winning casing. Ties resolved toward the casing that
  // reached the count first; counts tracked per exact casing.
  std::unordered_map<std::string, std::unordered_map<std::string, std::uint64_t>> counts_;
  std::unordered_map<std::string, Entry> best_;
};

// Keeps pairs whose sides are both within [1, max_len] tokens.
std::vector<SentencePair> filter_pairs(const std::vector<SentencePair>& pairs,
                                       std::size_t max_len = 100);

// Uniform sample of n pairs without replacement, original order preserved.
// Throws std::invalid_argument when n exceeds the corpus size.
std::vector<SentencePair> downsample(const std::vector<SentencePair>& pairs, std::size_t n,
                                     std::uint64_t seed);

}  // namespace ilmt
