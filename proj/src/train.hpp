#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "model.hpp"

namespace ilmt {

struct TrainingConfig {
  double base_lr = 0.0;  // 0 → family default: 0.0004 recurrent, 0.0003 transformer
  std::size_t warmup_steps = 8000;
  double label_smoothing = 0.1;
  double dropout = 0.1;
  std::size_t validate_every = 1000;   // minibatches between validations
  std::size_t patience = 10;           // validations without ppl improvement
  std::size_t minibatch_token_cap = 4500;  // interleaved src+tgt tokens per batch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  double clip_norm = 1.0;  // global gradient-norm clip; 0 disables
  std::uint64_t seed = 1;
  std::size_t max_steps = 0;  // optional hard cap; 0 = patience only
  std::size_t beam = 5;       // dev decoding width for checkpoint selection
  std::size_t threads = 1;    // dev decoding parallelism

  void validate() const;
  KvMap to_kv() const;
  static TrainingConfig from_kv(const KvMap& kv);
};

// Inverse-square-root schedule with linear warmup:
// lr = base · min(step / warmup, sqrt(warmup / step)); peak base at warmup.
double lr_at(std::size_t step, double base_lr, std::size_t warmup_steps);
double default_base_lr(const std::string& family);

// Encoded parallel corpus (vocabulary indices, no BOS/EOS — train adds them).
struct EncodedCorpus {
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> tgt;
};

struct TrainResult {
  std::unique_ptr<Model> model;  // parameters of the best dev-BLEU validation
  double best_dev_bleu = -1.0;
  double best_dev_ppl = 0.0;
  std::uint64_t best_step = 0;
  std::uint64_t steps = 0;
  std::size_t validations = 0;
};

// Adam + the schedule above; validates dev perplexity every validate_every
// minibatches, stops once `patience` validations pass without perplexity
// improvement, and returns the parameters of the validation with the best
// dev BLEU (hypotheses un-BPE'd and tag-stripped before scoring).
// dev_ref_surface holds the matching plain reference sentences.
TrainResult train(const ModelConfig& mcfg, const TrainingConfig& tcfg,
                  const EncodedCorpus& train_data, const EncodedCorpus& dev_data,
                  const std::vector<Tokens>& dev_ref_surface, const Vocabulary& src_vocab,
                  const Vocabulary& tgt_vocab, std::ostream* log = nullptr);

// Central-difference verification of analytic gradients on a toy batch.
// Returns the maximum relative error over a spread of parameter coordinates.
double grad_check(ModelConfig mcfg, double eps);

}  // namespace ilmt
