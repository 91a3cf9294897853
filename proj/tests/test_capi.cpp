// Drives the shared library exactly the way an external consumer would:
// through ilmt.h alone, never the core headers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ilmt.h"

namespace fs = std::filesystem;

namespace {

const std::string kDir = "capi_tmp";

void write(const std::string& path, const std::string& content) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  out << content;
  REQUIRE(out.good());
}

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

// Takes ownership of a report string and hands it back as std::string.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  ilmt_string_free(s);
  return out;
}

bool has_row(const std::string& report, const std::string& prefix) {
  std::istringstream in(report);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("version and error slot basics") {
  REQUIRE(ilmt_version() != nullptr);
  CHECK(std::string(ilmt_version()).find('.') != std::string::npos);
  REQUIRE(ilmt_last_error() != nullptr);

  // A failure leaves a message, the next success clears it.
  CHECK(ilmt_annotate(nullptr, "pos", "x") == ILMT_ERR_USAGE);
  CHECK(std::string(ilmt_last_error()).find("conllu_path") != std::string::npos);
  CHECK(ilmt_synth(kDir.c_str(), "probe", 1, 1) == ILMT_OK);
  CHECK(std::string(ilmt_last_error()).empty());

  ilmt_string_free(nullptr);  // free(NULL) semantics
}

TEST_CASE("status codes mirror the failure class") {
  CHECK(ilmt_eval_bleu(nullptr, "x", nullptr) == ILMT_ERR_USAGE);
  CHECK(ilmt_annotate((kDir + "/no_such_file.conllu").c_str(), "pos",
                      (kDir + "/out.txt").c_str()) == ILMT_ERR_IO);

  write(kDir + "/broken.conllu", "1\tonly-two-columns\n\n");
  CHECK(ilmt_annotate((kDir + "/broken.conllu").c_str(), "pos",
                      (kDir + "/out.txt").c_str()) == ILMT_ERR_DATA);
  CHECK(std::string(ilmt_last_error()).find('1') != std::string::npos);

  CHECK(ilmt_annotate((kDir + "/broken.conllu").c_str(), "fancy",
                      (kDir + "/out.txt").c_str()) == ILMT_ERR_USAGE);

  // Aligned-file commands reject disagreeing sentence counts as data errors.
  write(kDir + "/two.txt", "a b\nc d\n");
  write(kDir + "/three.txt", "a b\nc d\ne f\n");
  char* report = nullptr;
  CHECK(ilmt_eval_bleu((kDir + "/two.txt").c_str(), (kDir + "/three.txt").c_str(), &report) ==
        ILMT_ERR_DATA);
  CHECK(ilmt_eval_signif((kDir + "/two.txt").c_str(), (kDir + "/two.txt").c_str(),
                         (kDir + "/three.txt").c_str(), 10, 0.05, 1, &report) ==
        ILMT_ERR_DATA);
}

TEST_CASE("synthetic corpus, annotation streams and subword round trip") {
  REQUIRE(ilmt_synth(kDir.c_str(), "toy", 7, 25) == ILMT_OK);
  const std::string src_conllu = kDir + "/toy.src.conllu";
  const std::string tgt_conllu = kDir + "/toy.tgt.conllu";
  REQUIRE(fs::exists(src_conllu));
  REQUIRE(fs::exists(tgt_conllu));

  REQUIRE(ilmt_annotate(src_conllu.c_str(), "none", (kDir + "/toy.src.txt").c_str()) ==
          ILMT_OK);
  REQUIRE(ilmt_annotate(tgt_conllu.c_str(), "pos", (kDir + "/toy.tgt.pos.txt").c_str()) ==
          ILMT_OK);
  std::vector<std::string> plain = lines_of(kDir + "/toy.src.txt");
  std::vector<std::string> tagged = lines_of(kDir + "/toy.tgt.pos.txt");
  REQUIRE(plain.size() == 25);
  REQUIRE(tagged.size() == 25);
  for (const std::string& line : tagged) {
    CHECK(tokens_of(line).size() % 2 == 0);  // tag word tag word ...
  }

  // Plain-side merges reassemble to the original text.
  REQUIRE(ilmt_bpe_learn((kDir + "/toy.src.txt").c_str(), 20, 0,
                         (kDir + "/src.bpe").c_str()) == ILMT_OK);
  REQUIRE(ilmt_bpe_apply((kDir + "/src.bpe").c_str(), (kDir + "/toy.src.txt").c_str(), 0,
                         (kDir + "/toy.src.bpe.txt").c_str()) == ILMT_OK);
  std::vector<std::string> segmented = lines_of(kDir + "/toy.src.bpe.txt");
  REQUIRE(segmented.size() == plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    std::string rejoined = segmented[i];
    for (std::size_t at = rejoined.find("@@ "); at != std::string::npos;
         at = rejoined.find("@@ ", at)) {
      rejoined.erase(at, 3);
    }
    CHECK(rejoined == plain[i]);
  }

  // Protected tags stay atomic on the tagged side: every tag (here an
  // all-caps POS label) survives segmentation as one unit.
  REQUIRE(ilmt_bpe_learn((kDir + "/toy.tgt.pos.txt").c_str(), 20, 1,
                         (kDir + "/tgt.bpe").c_str()) == ILMT_OK);
  REQUIRE(ilmt_bpe_apply((kDir + "/tgt.bpe").c_str(), (kDir + "/toy.tgt.pos.txt").c_str(), 1,
                         (kDir + "/toy.tgt.bpe.txt").c_str()) == ILMT_OK);
  std::vector<std::string> tagged_units = lines_of(kDir + "/toy.tgt.bpe.txt");
  REQUIRE(tagged_units.size() == tagged.size());
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    std::string padded = " " + tagged_units[i] + " ";
    for (const std::string& tok : tokens_of(tagged[i])) {
      bool all_caps = !tok.empty();
      for (char c : tok) all_caps = all_caps && c >= 'A' && c <= 'Z';
      if (all_caps) CHECK(padded.find(" " + tok + " ") != std::string::npos);
    }
  }
}

TEST_CASE("evaluation reports through the C boundary") {
  write(kDir + "/hyp.txt", "the cat sat\nit happened before .\n");
  write(kDir + "/ref.txt", "the cat sat\nit happened before .\n");

  char* raw = nullptr;
  REQUIRE(ilmt_eval_bleu((kDir + "/hyp.txt").c_str(), (kDir + "/ref.txt").c_str(), &raw) ==
          ILMT_OK);
  std::string bleu_report = take(raw);
  CHECK(has_row(bleu_report, "bleu\t100.000000"));
  CHECK(has_row(bleu_report, "brevity_penalty\t1.000000"));
  CHECK(has_row(bleu_report, "hyp_tokens\t7"));

  raw = nullptr;
  REQUIRE(ilmt_eval_signif((kDir + "/hyp.txt").c_str(), (kDir + "/hyp.txt").c_str(),
                           (kDir + "/ref.txt").c_str(), 200, 0.05, 42, &raw) == ILMT_OK);
  std::string signif_report = take(raw);
  CHECK(has_row(signif_report, "iterations\t200"));
  CHECK(has_row(signif_report, "significant\t0"));  // identical systems never win
  CHECK(has_row(signif_report, "seed\t42"));
}

TEST_CASE("error categorization with and without a baseline report") {
  REQUIRE(ilmt_synth(kDir.c_str(), "err", 3, 12) == ILMT_OK);
  const std::string conllu = kDir + "/err.tgt.conllu";
  REQUIRE(ilmt_annotate(conllu.c_str(), "none", (kDir + "/err.ref.txt").c_str()) == ILMT_OK);
  fs::copy_file(kDir + "/err.ref.txt", kDir + "/err.hyp.txt",
                fs::copy_options::overwrite_existing);

  char* raw = nullptr;
  REQUIRE(ilmt_errcat((kDir + "/err.hyp.txt").c_str(), conllu.c_str(), conllu.c_str(), nullptr,
                      &raw) == ILMT_OK);
  std::string report = take(raw);
  CHECK(has_row(report, "total\t0"));
  CHECK(has_row(report, "inflection\t0"));
  write(kDir + "/err.base.tsv", report);

  raw = nullptr;
  REQUIRE(ilmt_errcat((kDir + "/err.hyp.txt").c_str(), conllu.c_str(), conllu.c_str(),
                      (kDir + "/err.base.tsv").c_str(), &raw) == ILMT_OK);
  std::string relative = take(raw);
  CHECK(has_row(relative, "relative.total\tundefined"));  // zero baseline
}

TEST_CASE("training, translation and forced evaluation on a tiny model") {
  // Corpus: synthetic pairs, plain source, POS-tagged target.
  REQUIRE(ilmt_synth(kDir.c_str(), "mt", 13, 48) == ILMT_OK);
  REQUIRE(ilmt_annotate((kDir + "/mt.src.conllu").c_str(), "none",
                        (kDir + "/mt.src.txt").c_str()) == ILMT_OK);
  REQUIRE(ilmt_annotate((kDir + "/mt.tgt.conllu").c_str(), "pos",
                        (kDir + "/mt.tgt.txt").c_str()) == ILMT_OK);
  REQUIRE(ilmt_bpe_learn((kDir + "/mt.src.txt").c_str(), 40, 0,
                         (kDir + "/mt.src.bpe").c_str()) == ILMT_OK);
  REQUIRE(ilmt_bpe_learn((kDir + "/mt.tgt.txt").c_str(), 40, 1,
                         (kDir + "/mt.tgt.bpe").c_str()) == ILMT_OK);
  REQUIRE(ilmt_bpe_apply((kDir + "/mt.src.bpe").c_str(), (kDir + "/mt.src.txt").c_str(), 0,
                         (kDir + "/mt.train.src").c_str()) == ILMT_OK);
  REQUIRE(ilmt_bpe_apply((kDir + "/mt.tgt.bpe").c_str(), (kDir + "/mt.tgt.txt").c_str(), 1,
                         (kDir + "/mt.train.tgt").c_str()) == ILMT_OK);

  // First eight pairs double as the validation set.
  auto head = [](const std::string& in, const std::string& out, std::size_t n) {
    std::vector<std::string> lines = lines_of(in);
    REQUIRE(lines.size() >= n);
    std::ostringstream os;
    for (std::size_t i = 0; i < n; ++i) os << lines[i] << '\n';
    write(out, os.str());
  };
  head(kDir + "/mt.train.src", kDir + "/mt.dev.src", 8);
  head(kDir + "/mt.train.tgt", kDir + "/mt.dev.tgt", 8);

  write(kDir + "/mt.config",
        "model.family = recurrent\n"
        "model.hidden = 16\n"
        "model.embedding = 12\n"
        "model.tl_tags = true\n"
        "model.dropout = 0\n"
        "model.label_smoothing = 0\n"
        "train.base_lr = 0.01\n"
        "train.warmup_steps = 20\n"
        "train.validate_every = 20\n"
        "train.patience = 2\n"
        "train.max_steps = 40\n"
        "train.beam = 2\n"
        "seed = 3\n");
  REQUIRE(ilmt_train((kDir + "/mt.config").c_str(), (kDir + "/mt.train.src").c_str(),
                     (kDir + "/mt.train.tgt").c_str(), (kDir + "/mt.dev.src").c_str(),
                     (kDir + "/mt.dev.tgt").c_str(), (kDir + "/mt.ckpt").c_str(),
                     (kDir + "/mt.log").c_str(), 1) == ILMT_OK);
  REQUIRE(fs::exists(kDir + "/mt.ckpt"));
  CHECK(!lines_of(kDir + "/mt.log").empty());

  ilmt_model* model = nullptr;
  REQUIRE(ilmt_model_load((kDir + "/mt.ckpt").c_str(), &model) == ILMT_OK);
  REQUIRE(model != nullptr);

  char* raw = nullptr;
  REQUIRE(ilmt_model_config(model, &raw) == ILMT_OK);
  std::string config_echo = take(raw);
  CHECK(has_row(config_echo, "model.family = recurrent"));
  CHECK(has_row(config_echo, "model.tl_tags = true"));
  CHECK(has_row(config_echo, "step = "));
  CHECK(has_row(config_echo, "run.dev_bleu = "));

  REQUIRE(ilmt_translate(model, (kDir + "/mt.dev.src").c_str(), 2, 0, 2,
                         (kDir + "/mt.out.units").c_str(), (kDir + "/mt.out.txt").c_str(),
                         (kDir + "/mt.out.scores").c_str()) == ILMT_OK);
  std::vector<std::string> units = lines_of(kDir + "/mt.out.units");
  std::vector<std::string> text = lines_of(kDir + "/mt.out.txt");
  std::vector<std::string> scores = lines_of(kDir + "/mt.out.scores");
  REQUIRE(units.size() == 8);
  REQUIRE(text.size() == 8);
  REQUIRE(scores.size() == 9);  // header + one row per sentence
  CHECK(scores[0] == "id\tlogprob\tlength");
  for (const std::string& line : text) {
    CHECK(line.find("@@") == std::string::npos);  // de-segmented
  }

  // Forced diagnostics: with the reference tags fixed we measure words, with
  // bad arguments we get usage errors.
  raw = nullptr;
  REQUIRE(ilmt_forced_eval(model, (kDir + "/no_such_units.txt").c_str(),
                           (kDir + "/mt.tgt.conllu").c_str(), "force-tags", "pos",
                           (kDir + "/mt.tgt.bpe").c_str(), nullptr, 2, 1,
                           &raw) == ILMT_ERR_IO);  // missing src file
  head(kDir + "/mt.src.txt", kDir + "/mt.src8.raw", 8);
  REQUIRE(ilmt_bpe_apply((kDir + "/mt.src.bpe").c_str(), (kDir + "/mt.src8.raw").c_str(), 0,
                         (kDir + "/mt.src8.units").c_str()) == ILMT_OK);

  // Cut the reference CoNLL-U down to the first eight sentences.
  {
    std::vector<std::string> all = lines_of(kDir + "/mt.tgt.conllu");
    std::ostringstream os;
    std::size_t sentences = 0;
    for (const std::string& line : all) {
      os << line << '\n';
      if (line.empty() && ++sentences == 8) break;
    }
    write(kDir + "/mt.tgt8.conllu", os.str());
  }

  raw = nullptr;
  REQUIRE(ilmt_forced_eval(model, (kDir + "/mt.src8.units").c_str(),
                           (kDir + "/mt.tgt8.conllu").c_str(), "force-tags", "pos",
                           (kDir + "/mt.tgt.bpe").c_str(),
                           (kDir + "/mt.tgt.conllu").c_str(), 2, 1, &raw) == ILMT_OK);
  std::string forced = take(raw);
  CHECK(has_row(forced, "mode\tmetric\tvalue"));
  CHECK(has_row(forced, "force_tags\toverall\t"));
  CHECK(has_row(forced, "force_tags\tpositions\t"));

  raw = nullptr;
  CHECK(ilmt_forced_eval(model, (kDir + "/mt.src8.units").c_str(),
                         (kDir + "/mt.tgt8.conllu").c_str(), "sideways", "pos",
                         (kDir + "/mt.tgt.bpe").c_str(), nullptr, 2, 1,
                         &raw) == ILMT_ERR_USAGE);
  CHECK(std::string(ilmt_last_error()).find("force-tags") != std::string::npos);

  ilmt_model_free(model);
  ilmt_model_free(nullptr);
}

TEST_CASE("experiment runner and grid search entry points") {
  // Three tiny annotated splits via the generator, then a full quiet run.
  REQUIRE(ilmt_synth(kDir.c_str(), "run_train", 31, 60) == ILMT_OK);
  REQUIRE(ilmt_synth(kDir.c_str(), "run_dev", 32, 8) == ILMT_OK);
  REQUIRE(ilmt_synth(kDir.c_str(), "run_test", 33, 8) == ILMT_OK);
  std::string cfg =
      "pair = synth\n"
      "arm = none\n"
      "seed = 5\n"
      "data.train.src = " + kDir + "/run_train.src.conllu\n" +
      "data.train.tgt = " + kDir + "/run_train.tgt.conllu\n" +
      "data.dev.src = " + kDir + "/run_dev.src.conllu\n" +
      "data.dev.tgt = " + kDir + "/run_dev.tgt.conllu\n" +
      "data.test.src = " + kDir + "/run_test.src.conllu\n" +
      "data.test.tgt = " + kDir + "/run_test.tgt.conllu\n" +
      "bpe.src_ops = 60\n"
      "bpe.tgt_ops = 60\n"
      "model.family = recurrent\n"
      "model.hidden = 16\n"
      "model.embedding = 12\n"
      "model.dropout = 0\n"
      "model.label_smoothing = 0\n"
      "train.base_lr = 0.01\n"
      "train.warmup_steps = 20\n"
      "train.validate_every = 20\n"
      "train.patience = 2\n"
      "train.max_steps = 40\n"
      "train.beam = 2\n";
  write(kDir + "/run.config", cfg);

  char* raw = nullptr;
  REQUIRE(ilmt_run_experiment((kDir + "/run.config").c_str(), (kDir + "/run_out").c_str(), 2,
                              0, &raw) == ILMT_OK);
  std::string summary = take(raw);
  CHECK(has_row(summary, "config_hash\t"));
  CHECK(has_row(summary, "dev_bleu\t"));
  CHECK(has_row(summary, "test_bleu\t"));
  CHECK(has_row(summary, "errors_total\t"));
  CHECK(fs::exists(kDir + "/run_out/manifest.tsv"));
  CHECK(fs::exists(kDir + "/run_out/reports/bleu.tsv"));

  // Grid configuration errors surface as usage failures before any training.
  write(kDir + "/grid_empty.config", cfg + "grid.bpe_ops = \n");
  CHECK(ilmt_grid_search((kDir + "/grid_empty.config").c_str(), (kDir + "/grid_out").c_str(),
                         1, 0, &raw) == ILMT_ERR_USAGE);
  write(kDir + "/grid_bad.config", cfg + "grid.tied = maybe\n");
  CHECK(ilmt_grid_search((kDir + "/grid_bad.config").c_str(), (kDir + "/grid_out").c_str(), 1,
                         0, &raw) == ILMT_ERR_USAGE);
  write(kDir + "/grid_shape.config", cfg + "grid.sizes = 16:2:2\n");  // transformer shape
  CHECK(ilmt_grid_search((kDir + "/grid_shape.config").c_str(), (kDir + "/grid_out").c_str(),
                         1, 0, &raw) == ILMT_ERR_USAGE);
}

TEST_CASE("cleanup") { fs::remove_all(kDir); }
