#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "model.hpp"
#include "vocab.hpp"

namespace ilmt {

// Anything beam search can drive: a trained model or a hand-built fixture.
// `logprobs(prefix)` returns the full next-symbol distribution after the
// emitted prefix (BOS handling is the scorer's business).
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual Eigen::RowVectorXd logprobs(const std::vector<int>& prefix) = 0;
};

// Scores prefixes against one encoded source sentence.
class ModelScorer : public Scorer {
 public:
  ModelScorer(Model& model, const std::vector<int>& src)
      : model_(model), enc_(model.encode(src)) {}
  std::size_t vocab_size() const override { return model_.tgt_vocab().size(); }
  Eigen::RowVectorXd logprobs(const std::vector<int>& prefix) override {
    return model_.next_logprobs(enc_, prefix);
  }
  const Vocabulary& model_vocab() const { return model_.tgt_vocab(); }

 private:
  Model& model_;
  EncodedSource enc_;
};

enum class ConstraintMode { Free, ForceTags, ForceWords, RestrictPOS };

struct DecodeConstraint {
  ConstraintMode mode = ConstraintMode::Free;
  // ForceTags: reference tag per word; RestrictPOS: reference POS per word;
  // ForceWords: reference words, each already segmented into subword units.
  std::vector<std::string> ref_tags;
  std::vector<std::string> ref_pos;
  std::vector<Tokens> ref_words;
};

// Classifies each target-vocabulary entry for parity masking.
struct SymbolClasses {
  enum Class : unsigned char { Reserved, Tag, WordContinue, WordFinal };
  std::vector<Class> cls;           // indexed by symbol id
  std::vector<int> tag_ids;         // all tag symbols
  bool tagged_model = false;        // masking applies only when true

  static SymbolClasses build(const Vocabulary& vocab, bool tagged_model);
};

struct DecodeOptions {
  std::size_t beam = 5;
  std::size_t max_len = 0;      // 0: use 2 × src_len + 10
  bool class_mask = true;       // parity masking for tag-trained models
};

struct DecodeStats {
  std::size_t positions = 0;       // steps where the mask was consulted
  std::size_t class_matches = 0;   // unmasked argmax class equals masked class
};

struct DecodeResult {
  std::vector<int> ids;      // emitted symbols, EOS not included
  double logprob = 0.0;      // cumulative, un-normalized
  double score = 0.0;        // logprob / emitted length (EOS counted)
  std::size_t length = 0;    // emitted length including EOS
};

DecodeResult beam_search(Scorer& scorer, const SymbolClasses& classes,
                         const DecodeConstraint& constraint, std::size_t src_len,
                         const DecodeOptions& opts, DecodeStats* stats = nullptr);

// Sentence-parallel decoding, outputs in input order. Constraints are given
// per sentence (empty vector means Free for all).
struct BatchDecodeItem {
  Tokens tokens;         // interleaved subword stream
  DecodeResult result;
};
std::vector<BatchDecodeItem> batch_translate(Model& model,
                                             const std::vector<std::vector<int>>& srcs,
                                             const std::vector<DecodeConstraint>& constraints,
                                             const DecodeOptions& opts, std::size_t threads,
                                             DecodeStats* stats = nullptr);

}  // namespace ilmt
