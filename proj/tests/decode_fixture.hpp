#pragma once

// Hand-built scorer fixture and a brute-force reference search, shared by the
// decoder unit tests and the acceptance checks. The scorer defines a
// deterministic distribution over {a, b, c} (plus the reserved symbols) for
// each (input id, emitted prefix), so beam search results can be compared
// against exhaustive enumeration.

#include <cmath>
#include <vector>

#include "common.hpp"
#include "decode.hpp"
#include "vocab.hpp"

namespace ilmt::fixture {

inline Vocabulary three_word_vocab() {
  return Vocabulary::build({{"a"}, {"b"}, {"c"}});
}

class FixtureScorer : public Scorer {
 public:
  explicit FixtureScorer(std::uint64_t input) : input_(input) {}

  std::size_t vocab_size() const override { return 7; }

  Eigen::RowVectorXd logprobs(const std::vector<int>& prefix) override {
    std::uint64_t h = mix_seed(input_, 0xF1C5);
    for (int id : prefix) h = mix_seed(h, static_cast<std::uint64_t>(id) + 101);
    Rng rng(h);
    Eigen::RowVectorXd logits(7);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = 4.0 * rng.uniform();
    logits(Vocabulary::kUnk) = -50.0;  // keeps the live alphabet at three words
    double mx = logits.maxCoeff();
    double lse = std::log((logits.array() - mx).exp().sum()) + mx;
    return (logits.array() - lse).matrix();
  }

 private:
  std::uint64_t input_;
};

inline void consider(DecodeResult& best, bool& have, const DecodeResult& cand) {
  if (!have || cand.score > best.score ||
      (cand.score == best.score && cand.logprob > best.logprob)) {
    best = cand;
    have = true;
  }
}

// Enumerates every hypothesis the beam could finish: word sequences shorter
// than max_len terminated by EOS, and unterminated sequences of exactly
// max_len symbols. Log-probabilities accumulate left to right, matching the
// beam's summation order bit for bit.
inline void brute_walk(Scorer& scorer, const std::vector<int>& word_ids,
                       std::vector<int>& prefix, double run, std::size_t max_len,
                       DecodeResult& best, bool& have) {
  if (prefix.size() == max_len) {
    DecodeResult cand;
    cand.ids = prefix;
    cand.logprob = run;
    cand.length = prefix.size();
    cand.score = cand.logprob / static_cast<double>(cand.length);
    consider(best, have, cand);
    return;
  }
  Eigen::RowVectorXd lp = scorer.logprobs(prefix);
  DecodeResult eos_cand;
  eos_cand.ids = prefix;
  eos_cand.logprob = run + lp(Vocabulary::kEos);
  eos_cand.length = prefix.size() + 1;
  eos_cand.score = eos_cand.logprob / static_cast<double>(eos_cand.length);
  consider(best, have, eos_cand);
  for (int w : word_ids) {
    prefix.push_back(w);
    brute_walk(scorer, word_ids, prefix, run + lp(w), max_len, best, have);
    prefix.pop_back();
  }
}

inline DecodeResult brute_force_best(Scorer& scorer, const std::vector<int>& word_ids,
                                     std::size_t max_len) {
  DecodeResult best;
  bool have = false;
  std::vector<int> prefix;
  brute_walk(scorer, word_ids, prefix, 0.0, max_len, best, have);
  return best;
}

}  // namespace ilmt::fixture
