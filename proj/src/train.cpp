#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "annotate.hpp"
#include "bpe.hpp"
#include "decode.hpp"
#include "eval.hpp"

namespace ilmt {

void TrainingConfig::validate() const {
  if (base_lr < 0.0) throw std::invalid_argument("base_lr must be non-negative");
  if (warmup_steps == 0) throw std::invalid_argument("warmup_steps must be positive");
  if (validate_every == 0) throw std::invalid_argument("validate_every must be positive");
  if (minibatch_token_cap == 0) {
    throw std::invalid_argument("minibatch_token_cap must be positive");
  }
  if (beam == 0) throw std::invalid_argument("beam must be positive");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0 || dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("label_smoothing and dropout must lie in [0, 1)");
  }
}

KvMap TrainingConfig::to_kv() const {
  KvMap kv;
  kv["train.base_lr"] = double_repr(base_lr);
  kv["train.warmup_steps"] = std::to_string(warmup_steps);
  kv["train.label_smoothing"] = double_repr(label_smoothing);
  kv["train.dropout"] = double_repr(dropout);
  kv["train.validate_every"] = std::to_string(validate_every);
  kv["train.patience"] = std::to_string(patience);
  kv["train.minibatch_token_cap"] = std::to_string(minibatch_token_cap);
  kv["train.adam_beta1"] = double_repr(adam_beta1);
  kv["train.adam_beta2"] = double_repr(adam_beta2);
  kv["train.adam_eps"] = double_repr(adam_eps);
  kv["train.clip_norm"] = double_repr(clip_norm);
  kv["train.seed"] = std::to_string(seed);
  kv["train.max_steps"] = std::to_string(max_steps);
  kv["train.beam"] = std::to_string(beam);
  return kv;
}

TrainingConfig TrainingConfig::from_kv(const KvMap& kv) {
  TrainingConfig cfg;
  cfg.base_lr = kv_double(kv, "train.base_lr", cfg.base_lr);
  cfg.warmup_steps = static_cast<std::size_t>(kv_int(kv, "train.warmup_steps",
                                                     static_cast<long long>(cfg.warmup_steps)));
  cfg.label_smoothing = kv_double(kv, "train.label_smoothing", cfg.label_smoothing);
  cfg.dropout = kv_double(kv, "train.dropout", cfg.dropout);
  cfg.validate_every = static_cast<std::size_t>(
      kv_int(kv, "train.validate_every", static_cast<long long>(cfg.validate_every)));
  cfg.patience =
      static_cast<std::size_t>(kv_int(kv, "train.patience", static_cast<long long>(cfg.patience)));
  cfg.minibatch_token_cap = static_cast<std::size_t>(kv_int(
      kv, "train.minibatch_token_cap", static_cast<long long>(cfg.minibatch_token_cap)));
  cfg.adam_beta1 = kv_double(kv, "train.adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = kv_double(kv, "train.adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = kv_double(kv, "train.adam_eps", cfg.adam_eps);
  cfg.clip_norm = kv_double(kv, "train.clip_norm", cfg.clip_norm);
  cfg.seed = static_cast<std::uint64_t>(kv_int(kv, "train.seed", static_cast<long long>(cfg.seed)));
  cfg.max_steps =
      static_cast<std::size_t>(kv_int(kv, "train.max_steps", static_cast<long long>(cfg.max_steps)));
  cfg.beam = static_cast<std::size_t>(kv_int(kv, "train.beam", static_cast<long long>(cfg.beam)));
  cfg.validate();
  return cfg;
}

double default_base_lr(const std::string& family) {
  return family == "recurrent" ? 0.0004 : 0.0003;
}

double lr_at(std::size_t step, double base_lr, std::size_t warmup_steps) {
  if (step == 0) throw std::invalid_argument("lr_at is defined for steps >= 1");
  double s = static_cast<double>(step);
  double w = static_cast<double>(warmup_steps);
  return base_lr * std::min(s / w, std::sqrt(w / s));
}

namespace {

struct Batch {
  std::vector<std::size_t> idx;
  std::size_t target_tokens = 0;  // Σ (tgt_len + 1), the EOS counted
};

std::vector<Batch> make_batches(const EncodedCorpus& data, std::size_t token_cap) {
  std::vector<std::size_t> order(data.src.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto cost = [&](std::size_t i) { return data.src[i].size() + data.tgt[i].size(); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cost(a) != cost(b)) return cost(a) < cost(b);
    return a < b;
  });
  std::vector<Batch> batches;
  Batch cur;
  std::size_t cur_tokens = 0;
  for (std::size_t i : order) {
    if (!cur.idx.empty() && cur_tokens + cost(i) > token_cap) {
      batches.push_back(std::move(cur));
      cur = Batch{};
      cur_tokens = 0;
    }
    cur.idx.push_back(i);
    cur_tokens += cost(i);
    cur.target_tokens += data.tgt[i].size() + 1;
  }
  if (!cur.idx.empty()) batches.push_back(std::move(cur));
  return batches;
}

void shuffle_batches(std::vector<Batch>& batches, Rng& rng) {
  for (std::size_t i = batches.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(batches[i - 1], batches[j]);
  }
}

double grad_global_norm(const Model& model) {
  double sq = 0.0;
  for (const Tensor& t : model.params()) sq += t.grad.squaredNorm();
  return std::sqrt(sq);
}

void adam_update(Model& model, const TrainingConfig& cfg, double lr, std::uint64_t t) {
  double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
  for (Tensor& p : model.params()) {
    p.adam_m = cfg.adam_beta1 * p.adam_m + (1.0 - cfg.adam_beta1) * p.grad;
    p.adam_v = cfg.adam_beta2 * p.adam_v + (1.0 - cfg.adam_beta2) * p.grad.cwiseProduct(p.grad);
    Mat mhat = p.adam_m / bc1;
    Mat vhat = p.adam_v / bc2;
    p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg.adam_eps);
  }
}

double dev_perplexity(Model& model, const EncodedCorpus& dev) {
  double nll = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < dev.src.size(); ++i) {
    nll += model.sentence_nll(dev.src[i], dev.tgt[i]);
    tokens += dev.tgt[i].size() + 1;
  }
  return std::exp(nll / static_cast<double>(std::max<std::size_t>(1, tokens)));
}

double dev_bleu(Model& model, const EncodedCorpus& dev,
                const std::vector<Tokens>& dev_ref_surface, std::size_t beam,
                std::size_t threads) {
  DecodeOptions opts;
  opts.beam = beam;
  std::vector<BatchDecodeItem> items = batch_translate(model, dev.src, {}, opts, threads);
  std::vector<Tokens> hyps;
  hyps.reserve(items.size());
  for (const BatchDecodeItem& item : items) {
    hyps.push_back(strip_tags(bpe_undo(item.tokens)));
  }
  return bleu(hyps, dev_ref_surface).score;
}

std::vector<Mat> snapshot_params(const Model& model) {
  std::vector<Mat> snap;
  snap.reserve(model.params().size());
  for (const Tensor& t : model.params()) snap.push_back(t.value);
  return snap;
}

void restore_params(Model& model, const std::vector<Mat>& snap) {
  std::size_t i = 0;
  for (Tensor& t : model.params()) t.value = snap[i++];
}

}  // namespace

TrainResult train(const ModelConfig& mcfg, const TrainingConfig& tcfg,
                  const EncodedCorpus& train_data, const EncodedCorpus& dev_data,
                  const std::vector<Tokens>& dev_ref_surface, const Vocabulary& src_vocab,
                  const Vocabulary& tgt_vocab, std::ostream* log) {
  mcfg.validate();
  tcfg.validate();
  if (train_data.src.size() != train_data.tgt.size() ||
      dev_data.src.size() != dev_data.tgt.size()) {
    throw std::invalid_argument("training and dev corpora must pair src with tgt");
  }
  if (train_data.src.empty()) throw std::invalid_argument("empty training corpus");
  if (dev_data.src.empty()) throw std::invalid_argument("empty dev corpus");
  if (dev_ref_surface.size() != dev_data.src.size()) {
    throw std::invalid_argument("dev reference count must match the dev corpus");
  }

  ModelConfig effective = mcfg;
  effective.label_smoothing = tcfg.label_smoothing;
  effective.dropout = tcfg.dropout;

  TrainResult result;
  result.model =
      std::make_unique<Model>(effective, src_vocab, tgt_vocab, tcfg.seed);
  Model& model = *result.model;

  const double base_lr = tcfg.base_lr > 0.0 ? tcfg.base_lr : default_base_lr(effective.family);
  Rng drop_rng(mix_seed(tcfg.seed, /*stream=*/0xD0));

  std::vector<Batch> batches = make_batches(train_data, tcfg.minibatch_token_cap);

  std::vector<Mat> best_snapshot;
  double best_ppl = std::numeric_limits<double>::infinity();
  std::size_t since_ppl_improved = 0;
  std::uint64_t step = 0;
  bool stop = false;

  for (std::size_t epoch = 0; !stop; ++epoch) {
    Rng shuffle_rng(mix_seed(tcfg.seed, 0xE90c + epoch));
    shuffle_batches(batches, shuffle_rng);

    for (const Batch& batch : batches) {
      ++step;
      model.zero_grads();
      double batch_loss = 0.0;
      double denom = static_cast<double>(batch.target_tokens);
      for (std::size_t i : batch.idx) {
        Tape tape;
        Tape::Id loss = model.sentence_loss_sum(tape, train_data.src[i], train_data.tgt[i],
                                                tcfg.dropout > 0.0 ? &drop_rng : nullptr);
        Tape::Id scaled = tape.scale(loss, 1.0 / denom);
        tape.backward(scaled);
        batch_loss += tape.value(loss)(0, 0) / denom;
      }
      if (!std::isfinite(batch_loss)) {
        throw divergence_error("non-finite loss at step " + std::to_string(step) +
                               " (lr " + std::to_string(lr_at(step, base_lr, tcfg.warmup_steps)) +
                               ")");
      }
      if (tcfg.clip_norm > 0.0) {
        double norm = grad_global_norm(model);
        if (norm > tcfg.clip_norm) {
          double factor = tcfg.clip_norm / norm;
          for (Tensor& t : model.params()) t.grad *= factor;
        }
      }
      adam_update(model, tcfg, lr_at(step, base_lr, tcfg.warmup_steps), step);

      if (step % tcfg.validate_every == 0) {
        ++result.validations;
        double ppl = dev_perplexity(model, dev_data);
        double bleu_score =
            dev_bleu(model, dev_data, dev_ref_surface, tcfg.beam, tcfg.threads);
        if (log) {
          (*log) << "step " << step << " loss " << batch_loss << " dev_ppl " << ppl
                 << " dev_bleu " << bleu_score << '\n';
        }
        if (!std::isfinite(ppl)) {
          throw divergence_error("non-finite dev perplexity at step " + std::to_string(step));
        }
        if (bleu_score > result.best_dev_bleu) {
          result.best_dev_bleu = bleu_score;
          result.best_step = step;
          best_snapshot = snapshot_params(model);
        }
        if (ppl < best_ppl) {
          best_ppl = ppl;
          since_ppl_improved = 0;
        } else {
          ++since_ppl_improved;
        }
        result.best_dev_ppl = best_ppl;
        if (since_ppl_improved >= tcfg.patience) {
          stop = true;
          break;
        }
      }
      if (tcfg.max_steps && step >= tcfg.max_steps) {
        stop = true;
        break;
      }
    }
  }

  result.steps = step;
  if (!best_snapshot.empty()) {
    restore_params(model, best_snapshot);
  } else {
    // No validation ever ran (max_steps below validate_every): keep final
    // parameters and score them once so the result is well-defined.
    ++result.validations;
    result.best_dev_ppl = dev_perplexity(model, dev_data);
    result.best_dev_bleu = dev_bleu(model, dev_data, dev_ref_surface, tcfg.beam, tcfg.threads);
    result.best_step = step;
  }
  return result;
}

double grad_check(ModelConfig mcfg, double eps) {
  mcfg.dropout = 0.0;  // the mask is not differentiable state
  mcfg.validate();

  // Tiny deterministic bilingual fixture.
  std::vector<Tokens> src_corpus = {{"a", "b", "c"}, {"b", "c", "d"}, {"a", "d"}};
  std::vector<Tokens> tgt_corpus = {{"x", "y"}, {"y", "z", "x"}, {"z"}};
  Vocabulary sv = Vocabulary::build(src_corpus);
  Vocabulary tv = Vocabulary::build(tgt_corpus);
  Model model(mcfg, sv, tv, /*seed=*/7);

  std::vector<std::vector<int>> srcs, tgts;
  for (std::size_t i = 0; i < src_corpus.size(); ++i) {
    srcs.push_back(sv.encode(src_corpus[i]));
    tgts.push_back(tv.encode(tgt_corpus[i]));
  }

  auto loss_value = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < srcs.size(); ++i) {
      Tape tape;
      total += tape.value(model.sentence_loss_sum(tape, srcs[i], tgts[i], nullptr))(0, 0);
    }
    return total;
  };

  model.zero_grads();
  for (std::size_t i = 0; i < srcs.size(); ++i) {
    Tape tape;
    tape.backward(model.sentence_loss_sum(tape, srcs[i], tgts[i], nullptr));
  }

  double max_rel = 0.0;
  for (Tensor& t : model.params()) {
    const Eigen::Index total = t.value.size();
    const Eigen::Index step = std::max<Eigen::Index>(1, total / 8);  // spread, ≤ 8 per tensor
    for (Eigen::Index k = 0; k < total; k += step) {
      Eigen::Index r = k % t.value.rows();
      Eigen::Index c = k / t.value.rows();
      double saved = t.value(r, c);
      t.value(r, c) = saved + eps;
      double up = loss_value();
      t.value(r, c) = saved - eps;
      double down = loss_value();
      t.value(r, c) = saved;
      double numeric = (up - down) / (2.0 * eps);
      double analytic = t.grad(r, c);
      double scale = std::max({1.0, std::abs(numeric), std::abs(analytic)});
      max_rel = std::max(max_rel, std::abs(numeric - analytic) / scale);
    }
  }
  return max_rel;
}

}  // namespace ilmt
