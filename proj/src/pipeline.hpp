#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "annotate.hpp"
#include "decode.hpp"
#include "errcat.hpp"
#include "eval.hpp"
#include "train.hpp"

namespace ilmt {

// Which side(s) carry interleaved tags, and of which kind. The both-sides
// arm pairs source MSD with target POS; no other combination is trained.
enum class TagArm { None, SlDum, SlPos, SlMsd, TlDum, TlPos, TlMsd, SlMsdTlPos };

std::string to_string(TagArm arm);
TagArm tag_arm_from_string(std::string_view s);
std::optional<TagKind> source_tag_kind(TagArm arm);
std::optional<TagKind> target_tag_kind(TagArm arm);

// One end-to-end run: corpus paths (CoNLL-U, both sides of three splits),
// the tag arm, per-side BPE operations, model and optimizer settings, and
// the master seed. Serializes to line-oriented `key = value` text.
struct ExperimentConfig {
  std::string pair = "src-tgt";
  std::string train_src, train_tgt;  // CoNLL-U files; forms give the tokens
  std::string dev_src, dev_tgt;
  std::string test_src, test_tgt;
  std::size_t downsample = 0;  // training pairs to keep; 0 keeps all
  TagArm arm = TagArm::None;
  std::size_t bpe_src_ops = 10000;
  std::size_t bpe_tgt_ops = 10000;
  ModelConfig model;
  TrainingConfig train;
  std::uint64_t seed = 1;
  std::string baseline_run;  // run directory to compare against; "" skips
  std::size_t bootstrap_iterations = 1000;
  double bootstrap_alpha = 0.05;

  void validate() const;
  KvMap to_kv() const;
  static ExperimentConfig from_kv(const KvMap& kv);
  std::string render() const;  // canonical config text (to_kv rendered)
  static ExperimentConfig parse(const std::string& text,
                                const std::string& source_name = "<config>");
  static ExperimentConfig parse_file(const std::string& path);
};

// Accuracy of one forced-decoding diagnostic, with frequency buckets.
struct ForcedReport {
  std::string mode;  // force_tags | force_words | restrict_pos | restrict_pos_prefix
  AccuracyReport accuracy;
};

struct RunOutcome {
  std::string run_dir;
  std::uint64_t config_hash = 0;
  double dev_bleu = -1.0;
  double dev_ppl = 0.0;
  std::uint64_t train_steps = 0;
  double test_bleu = 0.0;
  ErrorCounts errors;
  std::optional<BootstrapResult> significance;
  std::optional<RelativeChange> errors_vs_baseline;
  DecodeStats translate_stats;
  std::vector<ForcedReport> forced;
};

// Runs prep → annotate → bpe → train → translate → evaluate → forced into
// run_dir, writing config.txt, manifest.tsv and the artifact tree
// (corpus/, bpe/, model/, translations/, reports/). A stage failure writes
// the failed manifest row, keeps earlier artifacts, and rethrows with the
// stage name prefixed. Reruns with the same config are byte-identical.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& run_dir,
                          std::size_t threads = 1, std::ostream* log = nullptr);

// One point of the architecture-size stage; which fields matter depends on
// the model family of the base config.
struct SizePoint {
  int hidden = 0, embedding = 0;           // recurrent family
  int model_dim = 0, layers = 0, heads = 0;  // transformer family
  std::string slug(const std::string& family) const;
};

// Staged hyper-parameter search: BPE operations first, then tied embeddings,
// then sizes; each stage keeps earlier winners fixed, so the number of
// trained models is the sum (never the product) of the stage sizes.
struct GridSpace {
  std::vector<std::size_t> bpe_ops;
  std::vector<bool> tied_embeddings;
  std::vector<SizePoint> sizes;

  static GridSpace paper_grid(const std::string& family);
};

struct GridOutcome {
  ExperimentConfig best;
  std::string ranking_tsv;  // stage, point, dev_bleu, selected
  std::size_t trained = 0;
};

// Requires an untagged base config (the search is run on the baselines; the
// winners are reused for every tag arm). Selection metric is dev BLEU,
// first-listed point winning ties. Empty stage grids are a config error.
GridOutcome grid_search(const GridSpace& space, const ExperimentConfig& base,
                        const std::string& work_dir, std::size_t threads = 1,
                        std::ostream* log = nullptr);

// Raw-text corpus preparation for the standalone prep command: tokenize,
// truecase (model learned on the full tokenized corpus), drop pairs with a
// side over max_len words, optionally downsample. Writes src.txt / tgt.txt
// and the two truecasing tables into out_dir.
struct PrepOutcome {
  std::size_t read = 0;
  std::size_t kept = 0;     // after the length filter
  std::size_t written = 0;  // after downsampling
};
PrepOutcome prep_corpus(const std::string& src_in, const std::string& tgt_in,
                        const std::string& out_dir, std::size_t max_len,
                        std::size_t downsample_n, std::uint64_t seed);

// Reads an error_report_tsv back into counts (composite rows are ignored).
ErrorCounts parse_error_report(const std::string& text);

}  // namespace ilmt
