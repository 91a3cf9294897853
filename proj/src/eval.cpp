#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace ilmt {

namespace {

constexpr int kMaxOrder = 4;

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const Tokens& sent, int order) {
  NgramCounts counts;
  if (static_cast<int>(sent.size()) < order) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(order) <= sent.size(); ++i) {
    std::string key;
    for (int k = 0; k < order; ++k) {
      if (k) key += '\x01';
      key += sent[i + static_cast<std::size_t>(k)];
    }
    ++counts[key];
  }
  return counts;
}

// Per-sentence sufficient statistics; corpus BLEU over any multiset of
// sentences is computable from their sums, which is what the bootstrap needs.
struct SentenceStats {
  std::size_t matches[kMaxOrder] = {0, 0, 0, 0};
  std::size_t totals[kMaxOrder] = {0, 0, 0, 0};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

SentenceStats sentence_stats(const Tokens& hyp, const Tokens& ref) {
  SentenceStats st;
  st.hyp_len = hyp.size();
  st.ref_len = ref.size();
  for (int n = 1; n <= kMaxOrder; ++n) {
    NgramCounts h = count_ngrams(hyp, n);
    NgramCounts r = count_ngrams(ref, n);
    std::size_t total = 0, matched = 0;
    for (const auto& [gram, count] : h) {
      total += count;
      auto it = r.find(gram);
      if (it != r.end()) matched += std::min(count, it->second);
    }
    st.totals[n - 1] = total;
    st.matches[n - 1] = matched;
  }
  return st;
}

BleuReport bleu_from_sums(const SentenceStats& sums) {
  BleuReport rep;
  rep.hyp_tokens = sums.hyp_len;
  rep.ref_tokens = sums.ref_len;
  bool degenerate = false;
  double log_precision_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    double p = sums.totals[n] == 0
                   ? 0.0
                   : static_cast<double>(sums.matches[n]) / static_cast<double>(sums.totals[n]);
    rep.precisions[n] = p;
    if (p <= 0.0) {
      degenerate = true;
    } else {
      log_precision_sum += std::log(p);
    }
  }
  if (sums.hyp_len == 0) {
    rep.brevity_penalty = 0.0;
    rep.score = 0.0;
    return rep;
  }
  rep.brevity_penalty =
      sums.hyp_len >= sums.ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(sums.ref_len) / static_cast<double>(sums.hyp_len));
  rep.score = degenerate ? 0.0 : 100.0 * rep.brevity_penalty * std::exp(log_precision_sum / 4.0);
  return rep;
}

void accumulate(SentenceStats& sums, const SentenceStats& one) {
  for (int n = 0; n < kMaxOrder; ++n) {
    sums.matches[n] += one.matches[n];
    sums.totals[n] += one.totals[n];
  }
  sums.hyp_len += one.hyp_len;
  sums.ref_len += one.ref_len;
}

}  // namespace

BleuReport bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  if (hyps.size() != refs.size()) {
    throw std::invalid_argument("BLEU needs equal hypothesis and reference counts (" +
                                std::to_string(hyps.size()) + " vs " +
                                std::to_string(refs.size()) + ")");
  }
  SentenceStats sums;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    accumulate(sums, sentence_stats(hyps[i], refs[i]));
  }
  return bleu_from_sums(sums);
}

BootstrapResult paired_bootstrap(const std::vector<Tokens>& hyps_a,
                                 const std::vector<Tokens>& hyps_b,
                                 const std::vector<Tokens>& refs, std::size_t iters,
                                 double alpha, std::uint64_t seed) {
  if (hyps_a.size() != refs.size() || hyps_b.size() != refs.size()) {
    throw std::invalid_argument("paired bootstrap needs aligned sentence lists");
  }
  if (refs.empty()) throw std::invalid_argument("paired bootstrap on an empty test set");

  std::vector<SentenceStats> stats_a(refs.size()), stats_b(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    stats_a[i] = sentence_stats(hyps_a[i], refs[i]);
    stats_b[i] = sentence_stats(hyps_b[i], refs[i]);
  }

  BootstrapResult res;
  res.iterations = iters;
  res.alpha = alpha;
  res.seed = seed;
  const std::size_t n = refs.size();
  for (std::size_t it = 0; it < iters; ++it) {
    Rng rng(mix_seed(seed, it));  // per-resample stream: order-independent
    SentenceStats sums_a, sums_b;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t idx = static_cast<std::size_t>(rng.below(n));
      accumulate(sums_a, stats_a[idx]);
      accumulate(sums_b, stats_b[idx]);
    }
    double a = bleu_from_sums(sums_a).score;
    double b = bleu_from_sums(sums_b).score;
    if (a > b) {
      ++res.wins_a;
    } else if (b > a) {
      ++res.wins_b;
    } else {
      ++res.ties;
    }
  }
  double effective_wins = static_cast<double>(res.wins_a) + static_cast<double>(res.ties) / 2.0;
  res.a_significantly_better =
      effective_wins >= (1.0 - alpha) * static_cast<double>(iters);
  return res;
}

namespace {

std::string pos_prefix(const std::string& tag) {
  std::size_t us = tag.find('_');
  return us == std::string::npos ? tag : tag.substr(0, us);
}

AccuracyReport walk_positions(const std::vector<Tokens>& decoded,
                              const std::vector<Tokens>& reference, AccuracyTarget target,
                              const std::map<std::string, std::uint64_t>* train_freq) {
  if (decoded.size() != reference.size()) {
    throw std::invalid_argument("accuracy needs aligned decoded/reference corpora");
  }
  AccuracyReport rep;
  std::size_t inf_correct = 0, oov_correct = 0;
  for (std::size_t s = 0; s < decoded.size(); ++s) {
    const Tokens& dec = decoded[s];
    const Tokens& ref = reference[s];
    if (dec.size() != ref.size()) {
      throw data_error("sentence " + std::to_string(s) +
                       ": decoded/reference position counts differ (" +
                       std::to_string(dec.size()) + " vs " + std::to_string(ref.size()) + ")");
    }
    for (std::size_t p = 0; p < ref.size(); ++p) {
      bool tag_position = p % 2 == 0;  // streams are tag word tag word ...
      bool measured = (target == AccuracyTarget::SurfaceForms) ? !tag_position : tag_position;
      if (!measured) continue;
      bool correct = target == AccuracyTarget::PosOfMsd
                         ? pos_prefix(dec[p]) == pos_prefix(ref[p])
                         : dec[p] == ref[p];
      ++rep.positions;
      if (correct) ++rep.correct;
      if (train_freq) {
        // Bucket by the training frequency of the reference *word* — for a
        // tag position, the word it precedes.
        std::size_t word_pos = tag_position ? p + 1 : p;
        if (word_pos >= ref.size()) continue;
        auto it = train_freq->find(ref[word_pos]);
        std::uint64_t freq = it == train_freq->end() ? 0 : it->second;
        if (freq == 0) {
          ++rep.oov_positions;
          if (correct) ++oov_correct;
        } else if (freq <= 10) {
          ++rep.infrequent_positions;
          if (correct) ++inf_correct;
        }
      }
    }
  }
  rep.overall = rep.positions
                    ? static_cast<double>(rep.correct) / static_cast<double>(rep.positions)
                    : 0.0;
  if (rep.infrequent_positions) {
    rep.infrequent =
        static_cast<double>(inf_correct) / static_cast<double>(rep.infrequent_positions);
  }
  if (rep.oov_positions) {
    rep.oov = static_cast<double>(oov_correct) / static_cast<double>(rep.oov_positions);
  }
  return rep;
}

}  // namespace

AccuracyReport prediction_accuracy(const std::vector<Tokens>& decoded,
                                   const std::vector<Tokens>& reference,
                                   AccuracyTarget target) {
  return walk_positions(decoded, reference, target, nullptr);
}

AccuracyReport bucket_accuracy(const std::vector<Tokens>& decoded,
                               const std::vector<Tokens>& reference, AccuracyTarget target,
                               const std::map<std::string, std::uint64_t>& train_freq) {
  return walk_positions(decoded, reference, target, &train_freq);
}

std::string accuracy_report_rows(const std::string& label, const AccuracyReport& r) {
  auto fixed6 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  std::ostringstream os;
  auto row = [&](const char* metric, const std::string& value) {
    os << label << '\t' << metric << '\t' << value << '\n';
  };
  row("overall", fixed6(r.overall));
  row("positions", std::to_string(r.positions));
  row("correct", std::to_string(r.correct));
  row("infrequent", r.infrequent ? fixed6(*r.infrequent) : "n/a");
  row("infrequent_positions", std::to_string(r.infrequent_positions));
  row("oov", r.oov ? fixed6(*r.oov) : "n/a");
  row("oov_positions", std::to_string(r.oov_positions));
  return os.str();
}

}  // namespace ilmt
