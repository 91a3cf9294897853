#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "common.hpp"
#include "textproc.hpp"

namespace ilmt {

// Returns true for tokens that must stay atomic (tags). Default: none.
using TagPredicate = std::function<bool(const std::string&)>;

struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;  // learning order
  std::string marker = "@@";

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);
};

// Standard BPE over surface words: repeatedly merge the most frequent
// adjacent symbol pair (ties broken by lexicographic pair order), stopping
// after num_merges or once no pair occurs twice. Tokens matched by is_tag
// are excluded from the statistics.
BpeModel bpe_learn(const std::vector<Tokens>& corpus, std::size_t num_merges,
                   const TagPredicate& is_tag = nullptr);

// Applies a fixed model to words one at a time, caching segmentations.
class BpeApplier {
 public:
  explicit BpeApplier(const BpeModel& model);
  // Segments one word into marker-suffixed pieces ("happen@@", "ed").
  const Tokens& word(const std::string& w);
  // Segments every non-tag token in the stream; tags pass through whole.
  Tokens stream(const Tokens& toks, const TagPredicate& is_tag = nullptr);

 private:
  const BpeModel& model_;
  std::unordered_map<std::string, std::size_t> rank_;  // "left\tright" -> index
  std::unordered_map<std::string, Tokens> cache_;
};

Tokens bpe_apply(const Tokens& stream, const BpeModel& model,
                 const TagPredicate& is_tag = nullptr);

// Joins each maximal run of marker-suffixed units with its final unit. A
// stream-final unit still carrying the marker is joined anyway and counted
// in *dangling when given.
Tokens bpe_undo(const Tokens& stream, std::size_t* dangling = nullptr);

}  // namespace ilmt
