#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "textproc.hpp"

namespace ilmt {

struct BleuReport {
  double score = 0.0;           // 0..100
  double precisions[4] = {0, 0, 0, 0};
  double brevity_penalty = 1.0;
  std::size_t hyp_tokens = 0;
  std::size_t ref_tokens = 0;
};

// Corpus-level case-sensitive 4-gram BLEU on tokenized text. No smoothing:
// any zero n-gram precision zeroes the score.
BleuReport bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

struct BootstrapResult {
  std::size_t iterations = 0;
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;
  double alpha = 0.05;
  bool a_significantly_better = false;
  std::uint64_t seed = 0;
};

// Paired bootstrap over sentence resamples: A beats B when its resampled
// corpus BLEU is strictly higher; ties are split evenly between the systems
// when testing the (1 − alpha) winning threshold.
BootstrapResult paired_bootstrap(const std::vector<Tokens>& hyps_a,
                                 const std::vector<Tokens>& hyps_b,
                                 const std::vector<Tokens>& refs, std::size_t iters,
                                 double alpha, std::uint64_t seed);

struct AccuracyReport {
  double overall = 0.0;
  std::size_t positions = 0;
  std::size_t correct = 0;
  // Buckets keyed by reference-word training frequency; absent when empty.
  std::optional<double> infrequent;      // frequency 1..10
  std::size_t infrequent_positions = 0;
  std::optional<double> oov;             // frequency 0
  std::size_t oov_positions = 0;
};

enum class AccuracyTarget { Tags, SurfaceForms, PosOfMsd };

// Position-by-position comparison of interleaved word-level streams
// (tag word tag word ...), produced under complementary forcing so the
// streams align. `target` selects which positions are measured.
AccuracyReport prediction_accuracy(const std::vector<Tokens>& decoded,
                                   const std::vector<Tokens>& reference,
                                   AccuracyTarget target);

// As prediction_accuracy, with word positions additionally bucketed by the
// reference word's frequency in the training-side vocabulary.
AccuracyReport bucket_accuracy(const std::vector<Tokens>& decoded,
                               const std::vector<Tokens>& reference, AccuracyTarget target,
                               const std::map<std::string, std::uint64_t>& train_freq);

// Long-format "label\tmetric\tvalue" rows of one report; absent buckets
// render as "n/a".
std::string accuracy_report_rows(const std::string& label, const AccuracyReport& r);

}  // namespace ilmt
