#include "model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ilmt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'I', 'L', 'M', 'T'};
constexpr std::uint32_t kVersion = 1;

struct GridPointR {
  int hidden, embedding;
};
struct GridPointT {
  int model_dim, layers, heads;
};
constexpr GridPointR kRecurrentGrid[] = {{1024, 512}, {512, 512}, {512, 256}, {256, 256}};
constexpr GridPointT kTransformerGrid[] = {{512, 6, 8}, {256, 4, 4}, {128, 2, 2}};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_str(std::istream& in) {
  std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}
void write_vocab(std::ostream& out, const Vocabulary& v) {
  write_u64(out, v.size());
  for (const std::string& s : v.symbols()) write_str(out, s);
}
Vocabulary read_vocab(std::istream& in) {
  std::uint64_t n = read_u64(in);
  std::ostringstream block;
  block << n << '\n';
  for (std::uint64_t i = 0; i < n; ++i) block << read_str(in) << '\n';
  std::istringstream repl(block.str());
  return Vocabulary::read(repl);
}

}  // namespace

void ModelConfig::validate() const {
  if (family != "recurrent" && family != "transformer") {
    throw std::invalid_argument("model family must be recurrent or transformer, got '" +
                                family + "'");
  }
  if (dropout < 0.0 || dropout >= 1.0 || label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw std::invalid_argument("dropout and label_smoothing must lie in [0, 1)");
  }
  if (family == "recurrent") {
    if (hidden <= 0 || embedding <= 0) {
      throw std::invalid_argument("recurrent sizes must be positive");
    }
  } else {
    if (model_dim <= 0 || layers <= 0 || heads <= 0) {
      throw std::invalid_argument("transformer sizes must be positive");
    }
    if (model_dim % heads != 0) {
      throw std::invalid_argument("model_dim must be divisible by heads");
    }
  }
}

bool ModelConfig::paper_scale() const {
  if (family == "recurrent") {
    for (const auto& g : kRecurrentGrid) {
      if (g.hidden == hidden && g.embedding == embedding) return true;
    }
  } else {
    for (const auto& g : kTransformerGrid) {
      if (g.model_dim == model_dim && g.layers == layers && g.heads == heads) return true;
    }
  }
  return false;
}

KvMap ModelConfig::to_kv() const {
  KvMap kv;
  kv["model.family"] = family;
  kv["model.hidden"] = std::to_string(hidden);
  kv["model.embedding"] = std::to_string(embedding);
  kv["model.model_dim"] = std::to_string(model_dim);
  kv["model.layers"] = std::to_string(layers);
  kv["model.heads"] = std::to_string(heads);
  kv["model.tied_embeddings"] = tied_embeddings ? "true" : "false";
  kv["model.dropout"] = double_repr(dropout);
  kv["model.label_smoothing"] = double_repr(label_smoothing);
  kv["model.tl_tags"] = tl_tags ? "true" : "false";
  return kv;
}

ModelConfig ModelConfig::from_kv(const KvMap& kv) {
  ModelConfig cfg;
  cfg.family = kv_str(kv, "model.family", cfg.family);
  cfg.hidden = static_cast<int>(kv_int(kv, "model.hidden", cfg.hidden));
  cfg.embedding = static_cast<int>(kv_int(kv, "model.embedding", cfg.embedding));
  cfg.model_dim = static_cast<int>(kv_int(kv, "model.model_dim", cfg.model_dim));
  cfg.layers = static_cast<int>(kv_int(kv, "model.layers", cfg.layers));
  cfg.heads = static_cast<int>(kv_int(kv, "model.heads", cfg.heads));
  cfg.tied_embeddings = kv_bool(kv, "model.tied_embeddings", cfg.tied_embeddings);
  cfg.dropout = kv_double(kv, "model.dropout", cfg.dropout);
  cfg.label_smoothing = kv_double(kv, "model.label_smoothing", cfg.label_smoothing);
  cfg.tl_tags = kv_bool(kv, "model.tl_tags", cfg.tl_tags);
  cfg.validate();
  return cfg;
}

struct Model::GruCell {
  Tensor *Wz, *Uz, *bz, *Wr, *Ur, *br, *Wh, *Uh, *bh;
};

Model::Model(ModelConfig cfg, Vocabulary src_vocab, Vocabulary tgt_vocab, std::uint64_t seed)
    : cfg_(std::move(cfg)), src_vocab_(std::move(src_vocab)), tgt_vocab_(std::move(tgt_vocab)) {
  cfg_.validate();
  build_params(seed);
}

Tensor& Model::add_param(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  params_.emplace_back();
  Tensor& t = params_.back();
  t.name = name;
  t.init_shape(rows, cols);
  by_name_.emplace(name, params_.size() - 1);
  return t;
}

Tensor* Model::find_param(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &params_[it->second];
}

void Model::build_params(std::uint64_t seed) {
  const int vs = static_cast<int>(src_vocab_.size());
  const int vt = static_cast<int>(tgt_vocab_.size());

  auto gru = [&](const std::string& prefix, int in_dim, int h) {
    add_param(prefix + "_Wz", in_dim, h);
    add_param(prefix + "_Uz", h, h);
    add_param(prefix + "_bz", 1, h);
    add_param(prefix + "_Wr", in_dim, h);
    add_param(prefix + "_Ur", h, h);
    add_param(prefix + "_br", 1, h);
    add_param(prefix + "_Wh", in_dim, h);
    add_param(prefix + "_Uh", h, h);
    add_param(prefix + "_bh", 1, h);
  };

  if (cfg_.family == "recurrent") {
    const int h = cfg_.hidden, e = cfg_.embedding;
    add_param("src_emb", vs, e);
    add_param("tgt_emb", vt, e);
    gru("enc_f", e, h);
    gru("enc_b", e, h);
    add_param("dec_init_W", h, h);
    add_param("dec_init_b", 1, h);
    add_param("att_W", 2 * h, h);
    add_param("att_U", h, h);
    add_param("att_b", 1, h);
    add_param("att_v", h, 1);
    gru("dec", e + 2 * h, h);
    add_param("out_W", h + 2 * h + e, e);
    add_param("out_b", 1, e);
    if (!cfg_.tied_embeddings) add_param("out_proj", vt, e);
    add_param("out_bias", 1, vt);
  } else {
    const int d = cfg_.model_dim, ff = 4 * cfg_.model_dim;
    add_param("src_emb", vs, d);
    add_param("tgt_emb", vt, d);
    auto block = [&](const std::string& prefix) {
      add_param(prefix + "_Wq", d, d);
      add_param(prefix + "_Wk", d, d);
      add_param(prefix + "_Wv", d, d);
      add_param(prefix + "_Wo", d, d);
    };
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string p = "enc" + std::to_string(l);
      add_param(p + "_ln1_g", 1, d);
      add_param(p + "_ln1_b", 1, d);
      block(p + "_self");
      add_param(p + "_ln2_g", 1, d);
      add_param(p + "_ln2_b", 1, d);
      add_param(p + "_ff_W1", d, ff);
      add_param(p + "_ff_b1", 1, ff);
      add_param(p + "_ff_W2", ff, d);
      add_param(p + "_ff_b2", 1, d);
    }
    add_param("enc_ln_g", 1, d);
    add_param("enc_ln_b", 1, d);
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string p = "dec" + std::to_string(l);
      add_param(p + "_ln1_g", 1, d);
      add_param(p + "_ln1_b", 1, d);
      block(p + "_self");
      add_param(p + "_ln2_g", 1, d);
      add_param(p + "_ln2_b", 1, d);
      block(p + "_cross");
      add_param(p + "_ln3_g", 1, d);
      add_param(p + "_ln3_b", 1, d);
      add_param(p + "_ff_W1", d, ff);
      add_param(p + "_ff_b1", 1, ff);
      add_param(p + "_ff_W2", ff, d);
      add_param(p + "_ff_b2", 1, d);
    }
    add_param("dec_ln_g", 1, d);
    add_param("dec_ln_b", 1, d);
    if (!cfg_.tied_embeddings) add_param("out_proj", vt, d);
    add_param("out_bias", 1, vt);
  }

  // Glorot-uniform weights, zero biases, unit layer-norm gains; the fixed
  // creation order plus a seeded stream makes initialization reproducible.
  Rng rng(mix_seed(seed, /*stream=*/0x1417));
  for (Tensor& t : params_) {
    if (ends_with(t.name, "_g")) {
      t.value.setOnes();
    } else if (ends_with(t.name, "_b") || ends_with(t.name, "_bz") ||
               ends_with(t.name, "_br") || ends_with(t.name, "_bh") ||
               ends_with(t.name, "bias") || ends_with(t.name, "_b1") ||
               ends_with(t.name, "_b2")) {
      t.value.setZero();
    } else {
      double limit = std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
      for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
          t.value(r, c) = rng.uniform(-limit, limit);
        }
      }
    }
  }
}

void Model::zero_grads() {
  for (Tensor& t : params_) t.zero_grad();
}

Tape::Id Model::gru_step(Tape& tape, const GruCell& cell, Tape::Id x, Tape::Id h) {
  auto gate = [&](Tensor* W, Tensor* U, Tensor* b) {
    return tape.add(
        tape.add(tape.matmul(x, tape.param(*W)), tape.matmul(h, tape.param(*U))),
        tape.param(*b));
  };
  Tape::Id z = tape.sigmoid_of(gate(cell.Wz, cell.Uz, cell.bz));
  Tape::Id r = tape.sigmoid_of(gate(cell.Wr, cell.Ur, cell.br));
  Tape::Id rh = tape.hadamard(r, h);
  Tape::Id cand = tape.tanh_of(tape.add(
      tape.add(tape.matmul(x, tape.param(*cell.Wh)), tape.matmul(rh, tape.param(*cell.Uh))),
      tape.param(*cell.bh)));
  return tape.add(tape.hadamard(tape.one_minus(z), h), tape.hadamard(z, cand));
}

Tape::Id Model::attention_context(Tape& tape, Tape::Id memory, Tape::Id state) {
  Tape::Id s_proj = tape.add(tape.matmul(state, tape.param(*find_param("att_U"))),
                             tape.param(*find_param("att_b")));
  Tape::Id energies = tape.tanh_of(
      tape.add_rowvec(tape.matmul(memory, tape.param(*find_param("att_W"))), s_proj));
  Tape::Id scores = tape.matmul(energies, tape.param(*find_param("att_v")));  // n×1
  Tape::Id weights = tape.softmax_rows(tape.transpose_of(scores));            // 1×n
  return tape.matmul(weights, memory);                                        // 1×2h
}

Tape::Id Model::encode_recurrent(Tape& tape, const std::vector<int>& src, Rng* drop_rng,
                                 Tape::Id* s0_out) {
  auto cell = [&](const std::string& prefix) {
    return GruCell{find_param(prefix + "_Wz"), find_param(prefix + "_Uz"),
                   find_param(prefix + "_bz"), find_param(prefix + "_Wr"),
                   find_param(prefix + "_Ur"), find_param(prefix + "_br"),
                   find_param(prefix + "_Wh"), find_param(prefix + "_Uh"),
                   find_param(prefix + "_bh")};
  };
  const GruCell fwd = cell("enc_f"), bwd = cell("enc_b");
  const auto n = static_cast<Eigen::Index>(src.size());

  Tape::Id emb = tape.gather_rows(tape.param(*find_param("src_emb")), src);
  if (drop_rng) emb = tape.dropout(emb, cfg_.dropout, *drop_rng);

  const Tape::Id h_zero = tape.constant(Mat::Zero(1, cfg_.hidden));
  std::vector<Tape::Id> hf(src.size()), hb(src.size());
  Tape::Id state = h_zero;
  for (Eigen::Index t = 0; t < n; ++t) {
    state = gru_step(tape, fwd, tape.slice_rows(emb, t, 1), state);
    hf[static_cast<std::size_t>(t)] = state;
  }
  state = h_zero;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    state = gru_step(tape, bwd, tape.slice_rows(emb, t, 1), state);
    hb[static_cast<std::size_t>(t)] = state;
  }

  std::vector<Tape::Id> rows(src.size());
  for (std::size_t t = 0; t < src.size(); ++t) rows[t] = tape.concat_cols(hf[t], hb[t]);
  Tape::Id memory = tape.vstack(rows);

  if (s0_out) {
    *s0_out = tape.tanh_of(
        tape.add(tape.matmul(hb[0], tape.param(*find_param("dec_init_W"))),
                 tape.param(*find_param("dec_init_b"))));
  }
  return memory;
}

Tape::Id Model::decode_recurrent(Tape& tape, Tape::Id memory, Tape::Id s0,
                                 const std::vector<int>& tgt_in, Rng* drop_rng) {
  const GruCell dec{find_param("dec_Wz"), find_param("dec_Uz"), find_param("dec_bz"),
                    find_param("dec_Wr"), find_param("dec_Ur"), find_param("dec_br"),
                    find_param("dec_Wh"), find_param("dec_Uh"), find_param("dec_bh")};
  Tape::Id emb = tape.gather_rows(tape.param(*find_param("tgt_emb")), tgt_in);
  if (drop_rng) emb = tape.dropout(emb, cfg_.dropout, *drop_rng);

  Tape::Id state = s0;
  std::vector<Tape::Id> features;
  features.reserve(tgt_in.size());
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(tgt_in.size()); ++t) {
    Tape::Id y = tape.slice_rows(emb, t, 1);
    Tape::Id ctx = attention_context(tape, memory, state);
    state = gru_step(tape, dec, tape.concat_cols(y, ctx), state);
    Tape::Id feat_in = tape.concat_cols(tape.concat_cols(state, ctx), y);
    if (drop_rng) feat_in = tape.dropout(feat_in, cfg_.dropout, *drop_rng);
    features.push_back(tape.tanh_of(
        tape.add(tape.matmul(feat_in, tape.param(*find_param("out_W"))),
                 tape.param(*find_param("out_b")))));
  }
  return output_logits(tape, tape.vstack(features));
}

Mat Model::positional_encoding(Eigen::Index n) const {
  const int d = cfg_.model_dim;
  Mat pe(n, d);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    for (int i = 0; i < d; i += 2) {
      double angle = static_cast<double>(pos) /
                     std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Tape::Id Model::mha(Tape& tape, Tape::Id queries_in, Tape::Id keys_in,
                    const std::string& prefix, bool causal, Rng* drop_rng) {
  const int d = cfg_.model_dim;
  const int dk = d / cfg_.heads;
  Tape::Id q = tape.matmul(queries_in, tape.param(*find_param(prefix + "_Wq")));
  Tape::Id k = tape.matmul(keys_in, tape.param(*find_param(prefix + "_Wk")));
  Tape::Id v = tape.matmul(keys_in, tape.param(*find_param(prefix + "_Wv")));

  Mat mask;
  if (causal) {
    Eigen::Index tq = tape.value(q).rows();
    mask = Mat::Zero(tq, tq);
    for (Eigen::Index i = 0; i < tq; ++i) {
      for (Eigen::Index j = i + 1; j < tq; ++j) mask(i, j) = -1e30;
    }
  }

  Tape::Id heads_out = -1;
  for (int h = 0; h < cfg_.heads; ++h) {
    Tape::Id qh = tape.slice_cols(q, h * dk, dk);
    Tape::Id kh = tape.slice_cols(k, h * dk, dk);
    Tape::Id vh = tape.slice_cols(v, h * dk, dk);
    Tape::Id scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dk)));
    if (causal) scores = tape.add_constant(scores, mask);
    Tape::Id ctx = tape.matmul(tape.softmax_rows(scores), vh);
    heads_out = h == 0 ? ctx : tape.concat_cols(heads_out, ctx);
  }
  Tape::Id out = tape.matmul(heads_out, tape.param(*find_param(prefix + "_Wo")));
  if (drop_rng) out = tape.dropout(out, cfg_.dropout, *drop_rng);
  return out;
}

Tape::Id Model::encode_transformer(Tape& tape, const std::vector<int>& src, Rng* drop_rng) {
  const int d = cfg_.model_dim;
  Tape::Id x = tape.scale(tape.gather_rows(tape.param(*find_param("src_emb")), src),
                          std::sqrt(static_cast<double>(d)));
  x = tape.add_constant(x, positional_encoding(static_cast<Eigen::Index>(src.size())));
  if (drop_rng) x = tape.dropout(x, cfg_.dropout, *drop_rng);

  auto ln = [&](const std::string& name, Tape::Id in) {
    return tape.layer_norm_rows(in, tape.param(*find_param(name + "_g")),
                                tape.param(*find_param(name + "_b")));
  };
  auto ff = [&](const std::string& p, Tape::Id in) {
    Tape::Id hidden = tape.relu_of(
        tape.add_rowvec(tape.matmul(in, tape.param(*find_param(p + "_ff_W1"))),
                        tape.param(*find_param(p + "_ff_b1"))));
    Tape::Id out = tape.add_rowvec(tape.matmul(hidden, tape.param(*find_param(p + "_ff_W2"))),
                                   tape.param(*find_param(p + "_ff_b2")));
    if (drop_rng) out = tape.dropout(out, cfg_.dropout, *drop_rng);
    return out;
  };

  for (int l = 0; l < cfg_.layers; ++l) {
    std::string p = "enc" + std::to_string(l);
    Tape::Id normed = ln(p + "_ln1", x);
    x = tape.add(x, mha(tape, normed, normed, p + "_self", /*causal=*/false, drop_rng));
    x = tape.add(x, ff(p, ln(p + "_ln2", x)));
  }
  return ln("enc_ln", x);
}

Tape::Id Model::decode_transformer(Tape& tape, Tape::Id memory, const std::vector<int>& tgt_in,
                                   Rng* drop_rng) {
  const int d = cfg_.model_dim;
  Tape::Id x = tape.scale(tape.gather_rows(tape.param(*find_param("tgt_emb")), tgt_in),
                          std::sqrt(static_cast<double>(d)));
  x = tape.add_constant(x, positional_encoding(static_cast<Eigen::Index>(tgt_in.size())));
  if (drop_rng) x = tape.dropout(x, cfg_.dropout, *drop_rng);

  auto ln = [&](const std::string& name, Tape::Id in) {
    return tape.layer_norm_rows(in, tape.param(*find_param(name + "_g")),
                                tape.param(*find_param(name + "_b")));
  };
  auto ff = [&](const std::string& p, Tape::Id in) {
    Tape::Id hidden = tape.relu_of(
        tape.add_rowvec(tape.matmul(in, tape.param(*find_param(p + "_ff_W1"))),
                        tape.param(*find_param(p + "_ff_b1"))));
    Tape::Id out = tape.add_rowvec(tape.matmul(hidden, tape.param(*find_param(p + "_ff_W2"))),
                                   tape.param(*find_param(p + "_ff_b2")));
    if (drop_rng) out = tape.dropout(out, cfg_.dropout, *drop_rng);
    return out;
  };

  for (int l = 0; l < cfg_.layers; ++l) {
    std::string p = "dec" + std::to_string(l);
    Tape::Id normed = ln(p + "_ln1", x);
    x = tape.add(x, mha(tape, normed, normed, p + "_self", /*causal=*/true, drop_rng));
    x = tape.add(x, mha(tape, ln(p + "_ln2", x), memory, p + "_cross", /*causal=*/false,
                        drop_rng));
    x = tape.add(x, ff(p, ln(p + "_ln3", x)));
  }
  return output_logits(tape, ln("dec_ln", x));
}

Tape::Id Model::output_logits(Tape& tape, Tape::Id features) {
  Tensor* proj = cfg_.tied_embeddings ? find_param("tgt_emb") : find_param("out_proj");
  return tape.add_rowvec(tape.matmul_nt(features, tape.param(*proj)),
                         tape.param(*find_param("out_bias")));
}

Tape::Id Model::recurrent_logits(Tape& tape, const std::vector<int>& src,
                                 const std::vector<int>& tgt_in, Rng* drop_rng) {
  Tape::Id s0 = -1;
  Tape::Id memory = encode_recurrent(tape, src, drop_rng, &s0);
  return decode_recurrent(tape, memory, s0, tgt_in, drop_rng);
}

Tape::Id Model::transformer_logits(Tape& tape, const std::vector<int>& src,
                                   const std::vector<int>& tgt_in, Rng* drop_rng) {
  Tape::Id memory = encode_transformer(tape, src, drop_rng);
  return decode_transformer(tape, memory, tgt_in, drop_rng);
}

Tape::Id Model::sentence_loss_sum(Tape& tape, const std::vector<int>& src,
                                  const std::vector<int>& tgt, Rng* drop_rng) {
  if (src.empty()) throw data_error("cannot train on an empty source sequence");
  if (tgt.empty()) throw data_error("cannot train on an empty target sequence");
  std::vector<int> tgt_in;
  tgt_in.reserve(tgt.size() + 1);
  tgt_in.push_back(Vocabulary::kBos);
  tgt_in.insert(tgt_in.end(), tgt.begin(), tgt.end());
  std::vector<int> gold(tgt.begin(), tgt.end());
  gold.push_back(Vocabulary::kEos);

  Tape::Id logits = cfg_.family == "recurrent"
                        ? recurrent_logits(tape, src, tgt_in, drop_rng)
                        : transformer_logits(tape, src, tgt_in, drop_rng);
  return tape.smoothed_ce_sum(logits, gold, cfg_.label_smoothing);
}

double Model::sentence_nll(const std::vector<int>& src, const std::vector<int>& tgt) {
  if (src.empty() || tgt.empty()) throw data_error("empty sequence in perplexity input");
  Tape tape;
  std::vector<int> tgt_in;
  tgt_in.reserve(tgt.size() + 1);
  tgt_in.push_back(Vocabulary::kBos);
  tgt_in.insert(tgt_in.end(), tgt.begin(), tgt.end());
  std::vector<int> gold(tgt.begin(), tgt.end());
  gold.push_back(Vocabulary::kEos);
  Tape::Id logits = cfg_.family == "recurrent" ? recurrent_logits(tape, src, tgt_in, nullptr)
                                               : transformer_logits(tape, src, tgt_in, nullptr);
  return tape.value(tape.smoothed_ce_sum(logits, gold, 0.0))(0, 0);
}

EncodedSource Model::encode(const std::vector<int>& src) {
  if (src.empty()) throw data_error("cannot encode an empty source sequence");
  Tape tape;
  EncodedSource enc;
  enc.src_len = src.size();
  if (cfg_.family == "recurrent") {
    Tape::Id s0 = -1;
    Tape::Id memory = encode_recurrent(tape, src, nullptr, &s0);
    enc.memory = tape.value(memory);
    enc.s0 = tape.value(s0);
  } else {
    enc.memory = tape.value(encode_transformer(tape, src, nullptr));
  }
  return enc;
}

Eigen::RowVectorXd Model::next_logprobs(const EncodedSource& enc,
                                        const std::vector<int>& prefix) {
  Tape tape;
  std::vector<int> tgt_in;
  tgt_in.reserve(prefix.size() + 1);
  tgt_in.push_back(Vocabulary::kBos);
  tgt_in.insert(tgt_in.end(), prefix.begin(), prefix.end());

  Tape::Id memory = tape.constant(enc.memory);
  Tape::Id logits;
  if (cfg_.family == "recurrent") {
    logits = decode_recurrent(tape, memory, tape.constant(enc.s0), tgt_in, nullptr);
  } else {
    logits = decode_transformer(tape, memory, tgt_in, nullptr);
  }
  const Mat& lv = tape.value(logits);
  Mat last = log_softmax_rows_value(lv.bottomRows(1));
  return last.row(0);
}

void Model::save(const std::string& path, std::uint64_t step, const KvMap& extra) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u64(out, step);
  KvMap kv = cfg_.to_kv();
  for (const auto& [k, v] : extra) kv[k] = v;
  write_str(out, render_kv(kv));
  write_vocab(out, src_vocab_);
  write_vocab(out, tgt_vocab_);
  write_u32(out, static_cast<std::uint32_t>(params_.size()));
  std::vector<double> row;
  for (const Tensor& t : params_) {
    write_str(out, t.name);
    write_u64(out, static_cast<std::uint64_t>(t.value.rows()));
    write_u64(out, static_cast<std::uint64_t>(t.value.cols()));
    row.resize(static_cast<std::size_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
        row[static_cast<std::size_t>(c)] = t.value(r, c);
      }
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  }
  if (!out) throw io_error("error writing " + path);
}

Model::Loaded Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw data_error(path + ": not a model checkpoint (bad magic)");
  }
  std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw data_error(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Loaded loaded;
  loaded.step = read_u64(in);
  loaded.config = parse_kv(read_str(in), path);
  Vocabulary src_v = read_vocab(in);
  Vocabulary tgt_v = read_vocab(in);
  ModelConfig cfg = ModelConfig::from_kv(loaded.config);
  loaded.model = std::make_unique<Model>(cfg, std::move(src_v), std::move(tgt_v), 0);

  std::uint32_t n_tensors = read_u32(in);
  if (n_tensors != loaded.model->params_.size()) {
    throw data_error(path + ": tensor count mismatch with config");
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = read_str(in);
    auto rows = static_cast<Eigen::Index>(read_u64(in));
    auto cols = static_cast<Eigen::Index>(read_u64(in));
    Tensor* t = loaded.model->find_param(name);
    if (!t) throw data_error(path + ": unknown tensor '" + name + "'");
    if (t->value.rows() != rows || t->value.cols() != cols) {
      throw data_error(path + ": shape mismatch for tensor '" + name + "'");
    }
    std::vector<double> row(static_cast<std::size_t>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
      for (Eigen::Index c = 0; c < cols; ++c) t->value(r, c) = row[static_cast<std::size_t>(c)];
    }
  }
  if (!in) throw data_error(path + ": truncated checkpoint");
  return loaded;
}

}  // namespace ilmt
