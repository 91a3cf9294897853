#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "graph.hpp"
#include "vocab.hpp"

namespace ilmt {

// Paper-scale grids (Appendix A); desk-scale sizes below them are allowed
// but reported as non-paper by paper_scale().
struct ModelConfig {
  std::string family = "transformer";  // "recurrent" | "transformer"

  // recurrent family: (hidden, embedding); grid {(1024,512),(512,512),(512,256),(256,256)}
  int hidden = 64;
  int embedding = 32;

  // transformer family: (model_dim, layers, heads); grid {(512,6,8),(256,4,4),(128,2,2)}
  int model_dim = 64;
  int layers = 2;
  int heads = 2;

  bool tied_embeddings = true;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  bool tl_tags = false;  // target side carries interleaved tags

  void validate() const;
  bool paper_scale() const;
  KvMap to_kv() const;
  static ModelConfig from_kv(const KvMap& kv);
};

// Encoder output captured once per source sentence so beam search can score
// many prefixes against it.
struct EncodedSource {
  Mat memory;   // recurrent: n×2h bidirectional states; transformer: n×d
  Mat s0;       // recurrent decoder start state (1×h); unused for transformer
  std::size_t src_len = 0;
};

class Model {
 public:
  Model(ModelConfig cfg, Vocabulary src_vocab, Vocabulary tgt_vocab, std::uint64_t seed);

  // Label-smoothed cross-entropy summed over the target tokens of one pair
  // (teacher forcing, gold = tgt + EOS). Gradients flow when backward() is
  // later called on the returned node. drop_rng enables dropout (training).
  Tape::Id sentence_loss_sum(Tape& tape, const std::vector<int>& src,
                             const std::vector<int>& tgt, Rng* drop_rng);

  // Plain negative log-likelihood (no smoothing) summed over target tokens;
  // used for validation perplexity.
  double sentence_nll(const std::vector<int>& src, const std::vector<int>& tgt);

  // Inference path for decoding: encode once, then log-probabilities of the
  // next symbol after an emitted prefix (no BOS in `prefix`).
  EncodedSource encode(const std::vector<int>& src);
  Eigen::RowVectorXd next_logprobs(const EncodedSource& enc, const std::vector<int>& prefix);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& src_vocab() const { return src_vocab_; }
  const Vocabulary& tgt_vocab() const { return tgt_vocab_; }
  // Deque keeps Tensor addresses stable while parameters are being added.
  std::deque<Tensor>& params() { return params_; }
  const std::deque<Tensor>& params() const { return params_; }
  Tensor* find_param(const std::string& name);

  void zero_grads();

  // Checkpoint container: magic, version, step, config text, vocabularies,
  // named tensors (row-major doubles, little-endian). Round-trips bit-exactly.
  void save(const std::string& path, std::uint64_t step, const KvMap& extra) const;
  struct Loaded {
    std::unique_ptr<Model> model;
    std::uint64_t step = 0;
    KvMap config;
  };
  static Loaded load(const std::string& path);

 private:
  struct GruCell;  // one gate-parameter bundle

  void build_params(std::uint64_t seed);
  Tensor& add_param(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  // family-specific teacher-forced logits over tgt_in rows
  Tape::Id recurrent_logits(Tape& tape, const std::vector<int>& src,
                            const std::vector<int>& tgt_in, Rng* drop_rng);
  Tape::Id transformer_logits(Tape& tape, const std::vector<int>& src,
                              const std::vector<int>& tgt_in, Rng* drop_rng);
  Tape::Id encode_recurrent(Tape& tape, const std::vector<int>& src, Rng* drop_rng,
                            Tape::Id* s0_out);
  Tape::Id encode_transformer(Tape& tape, const std::vector<int>& src, Rng* drop_rng);
  Tape::Id decode_recurrent(Tape& tape, Tape::Id memory, Tape::Id s0,
                            const std::vector<int>& tgt_in, Rng* drop_rng);
  Tape::Id decode_transformer(Tape& tape, Tape::Id memory, const std::vector<int>& tgt_in,
                              Rng* drop_rng);
  Tape::Id gru_step(Tape& tape, const GruCell& cell, Tape::Id x, Tape::Id h);
  Tape::Id attention_context(Tape& tape, Tape::Id memory, Tape::Id state);
  Tape::Id mha(Tape& tape, Tape::Id queries_in, Tape::Id keys_in, const std::string& prefix,
               bool causal, Rng* drop_rng);
  Tape::Id output_logits(Tape& tape, Tape::Id features);
  Mat positional_encoding(Eigen::Index n) const;

  ModelConfig cfg_;
  Vocabulary src_vocab_;
  Vocabulary tgt_vocab_;
  std::deque<Tensor> params_;
  std::map<std::string, std::size_t> by_name_;
};

}  // namespace ilmt
