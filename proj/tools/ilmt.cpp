// Command-line front end. Everything goes through the C API in ilmt.h; this
// translation unit never touches the core headers, so it doubles as a live
// check that the shared library is usable on its own.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ilmt.h"

namespace {

// 0 success, 1 usage, 2 data (including I/O and internal faults), 3 training
// divergence.
int exit_code(ilmt_status st) {
  switch (st) {
    case ILMT_OK: return 0;
    case ILMT_ERR_USAGE: return 1;
    case ILMT_ERR_DIVERGED: return 3;
    default: return 2;
  }
}

int finish(ilmt_status st) {
  if (st != ILMT_OK) std::cerr << "ilmt: " << ilmt_last_error() << '\n';
  return exit_code(st);
}

// Reports land on stdout unless the command was given an --out file.
int finish_report(ilmt_status st, char* report, const std::string& out_path) {
  if (st != ILMT_OK) return finish(st);
  const char* text = report ? report : "";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    out << text;
    if (!out) {
      std::cerr << "ilmt: cannot write " << out_path << '\n';
      ilmt_string_free(report);
      return 2;
    }
  }
  ilmt_string_free(report);
  return 0;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

struct LoadedModel {
  ilmt_model* handle = nullptr;
  ~LoadedModel() { ilmt_model_free(handle); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural MT experiments with interleaved word-level annotations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ilmt_version());

  // Shared flags; fallthrough lets them appear after the subcommand name.
  std::uint64_t seed = 1;
  std::string config, out_dir;
  std::size_t threads = 1;
  app.add_option("--seed", seed, "Random seed for data and resampling commands");
  app.add_option("--config", config, "Configuration file (key = value lines)");
  app.add_option("--out-dir", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads for decoding");

  auto add_cmd = [&](const char* name, const char* desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->fallthrough();
    return sub;
  };
  auto need_dir = [&](const char* who) {
    if (out_dir.empty()) throw CLI::RequiredError(std::string(who) + " needs --out-dir");
    return out_dir.c_str();
  };
  auto need_config = [&](const char* who) {
    if (config.empty()) throw CLI::RequiredError(std::string(who) + " needs --config");
    return config.c_str();
  };

  int rc = 0;

  struct {
    std::string src, tgt;
    std::size_t max_len = 100, downsample = 0;
  } prep;
  {
    auto* cmd = add_cmd("prep", "Tokenize, truecase and filter a raw parallel corpus");
    cmd->add_option("--src", prep.src, "Raw source text, one sentence per line")->required();
    cmd->add_option("--tgt", prep.tgt, "Raw target text, one sentence per line")->required();
    cmd->add_option("--max-len", prep.max_len, "Drop pairs with a longer side (words)");
    cmd->add_option("--downsample", prep.downsample, "Keep this many random pairs (0 = all)");
    cmd->callback([&] {
      rc = finish(ilmt_prep(prep.src.c_str(), prep.tgt.c_str(), need_dir("prep"),
                            prep.max_len, prep.downsample, seed));
    });
  }

  struct {
    std::string name = "synth";
    std::size_t pairs = 0;
  } synth;
  {
    auto* cmd = add_cmd("synth", "Generate the annotated synthetic language pair");
    cmd->add_option("--name", synth.name, "Basename for the .src/.tgt CoNLL-U files");
    cmd->add_option("--pairs", synth.pairs, "Number of sentence pairs")->required();
    cmd->callback([&] {
      rc = finish(ilmt_synth(need_dir("synth"), synth.name.c_str(), seed, synth.pairs));
    });
  }

  struct {
    std::string conllu, kind = "none", out;
  } annotate;
  {
    auto* cmd = add_cmd("annotate", "Render a CoNLL-U file as token lines");
    cmd->add_option("--conllu", annotate.conllu, "Annotated input")->required();
    cmd->add_option("--kind", annotate.kind, "Interleaved tag kind: dum, pos, msd or none");
    cmd->add_option("--out", annotate.out, "Output token file")->required();
    cmd->callback([&] {
      rc = finish(ilmt_annotate(annotate.conllu.c_str(), annotate.kind.c_str(),
                                annotate.out.c_str()));
    });
  }

  struct {
    std::string corpus, model;
    std::size_t operations = 10000;
    bool protect_tags = false;
  } bpe_learn;
  {
    auto* cmd = add_cmd("bpe-learn", "Learn subword merge operations");
    cmd->add_option("--corpus", bpe_learn.corpus, "Token lines to learn from")->required();
    cmd->add_option("--operations", bpe_learn.operations, "Number of merge operations");
    cmd->add_option("--model", bpe_learn.model, "Where to store the merge table")->required();
    cmd->add_flag("--protect-tags", bpe_learn.protect_tags, "Keep interleaved tags atomic");
    cmd->callback([&] {
      rc = finish(ilmt_bpe_learn(bpe_learn.corpus.c_str(), bpe_learn.operations,
                                 bpe_learn.protect_tags ? 1 : 0, bpe_learn.model.c_str()));
    });
  }

  struct {
    std::string model, input, out;
    bool protect_tags = false;
  } bpe_apply;
  {
    auto* cmd = add_cmd("bpe-apply", "Segment token lines with a learned merge table");
    cmd->add_option("--model", bpe_apply.model, "Merge table from bpe-learn")->required();
    cmd->add_option("--input", bpe_apply.input, "Token lines to segment")->required();
    cmd->add_option("--out", bpe_apply.out, "Segmented output")->required();
    cmd->add_flag("--protect-tags", bpe_apply.protect_tags, "Keep interleaved tags atomic");
    cmd->callback([&] {
      rc = finish(ilmt_bpe_apply(bpe_apply.model.c_str(), bpe_apply.input.c_str(),
                                 bpe_apply.protect_tags ? 1 : 0, bpe_apply.out.c_str()));
    });
  }

  struct {
    std::string train_src, train_tgt, dev_src, dev_tgt, checkpoint, log;
  } train;
  {
    auto* cmd = add_cmd("train", "Train one model on segmented unit streams");
    cmd->add_option("--train-src", train.train_src, "Training source units")->required();
    cmd->add_option("--train-tgt", train.train_tgt, "Training target units")->required();
    cmd->add_option("--dev-src", train.dev_src, "Validation source units")->required();
    cmd->add_option("--dev-tgt", train.dev_tgt, "Validation target units")->required();
    cmd->add_option("--checkpoint", train.checkpoint, "Where to store the best model")
        ->required();
    cmd->add_option("--log", train.log, "Training log file");
    cmd->callback([&] {
      rc = finish(ilmt_train(need_config("train"), train.train_src.c_str(),
                             train.train_tgt.c_str(), train.dev_src.c_str(),
                             train.dev_tgt.c_str(), train.checkpoint.c_str(), opt(train.log),
                             threads));
    });
  }

  struct {
    std::string checkpoint, input, units_out, text_out, scores_out;
    std::size_t beam = 5, max_len = 0;
  } translate;
  {
    auto* cmd = add_cmd("translate", "Beam-decode source unit streams");
    cmd->add_option("--checkpoint", translate.checkpoint, "Trained model")->required();
    cmd->add_option("--input", translate.input, "Source units, one sentence per line")
        ->required();
    cmd->add_option("--beam", translate.beam, "Beam width");
    cmd->add_option("--max-len", translate.max_len, "Length cap (0 = 2 x source + 10)");
    cmd->add_option("--units-out", translate.units_out, "Raw output units");
    cmd->add_option("--text-out", translate.text_out, "De-segmented, tag-stripped text");
    cmd->add_option("--scores-out", translate.scores_out, "Per-sentence score table");
    cmd->callback([&] {
      LoadedModel model;
      ilmt_status st = ilmt_model_load(translate.checkpoint.c_str(), &model.handle);
      if (st == ILMT_OK) {
        st = ilmt_translate(model.handle, translate.input.c_str(), translate.beam,
                            translate.max_len, threads, opt(translate.units_out),
                            opt(translate.text_out), opt(translate.scores_out));
      }
      rc = finish(st);
    });
  }

  struct {
    std::string hyp, ref, out;
  } eval_bleu;
  {
    auto* cmd = add_cmd("eval-bleu", "Corpus BLEU of hypothesis vs. reference text");
    cmd->add_option("--hyp", eval_bleu.hyp, "Hypothesis token lines")->required();
    cmd->add_option("--ref", eval_bleu.ref, "Reference token lines")->required();
    cmd->add_option("--out", eval_bleu.out, "Report file (default: stdout)");
    cmd->callback([&] {
      char* report = nullptr;
      ilmt_status st = ilmt_eval_bleu(eval_bleu.hyp.c_str(), eval_bleu.ref.c_str(), &report);
      rc = finish_report(st, report, eval_bleu.out);
    });
  }

  struct {
    std::string system, baseline, ref, out;
    std::size_t iterations = 1000;
    double alpha = 0.05;
  } signif;
  {
    auto* cmd = add_cmd("eval-signif", "Paired bootstrap significance of system vs. baseline");
    cmd->add_option("--system", signif.system, "System hypothesis token lines")->required();
    cmd->add_option("--baseline", signif.baseline, "Baseline hypothesis token lines")
        ->required();
    cmd->add_option("--ref", signif.ref, "Reference token lines")->required();
    cmd->add_option("--iterations", signif.iterations, "Bootstrap resamples");
    cmd->add_option("--alpha", signif.alpha, "Significance level");
    cmd->add_option("--out", signif.out, "Report file (default: stdout)");
    cmd->callback([&] {
      char* report = nullptr;
      ilmt_status st =
          ilmt_eval_signif(signif.system.c_str(), signif.baseline.c_str(), signif.ref.c_str(),
                           signif.iterations, signif.alpha, seed, &report);
      rc = finish_report(st, report, signif.out);
    });
  }

  struct {
    std::string hyp, ref_conllu, lemma_conllu, baseline_report, out;
  } errcat;
  {
    auto* cmd = add_cmd("errcat", "Categorize word errors against annotated references");
    cmd->add_option("--hyp", errcat.hyp, "Hypothesis token lines")->required();
    cmd->add_option("--ref-conllu", errcat.ref_conllu, "Annotated references")->required();
    cmd->add_option("--lemma-conllu", errcat.lemma_conllu,
                    "Corpus for the form-to-lemma table")
        ->required();
    cmd->add_option("--baseline-report", errcat.baseline_report,
                    "Earlier errcat report for relative rows");
    cmd->add_option("--out", errcat.out, "Report file (default: stdout)");
    cmd->callback([&] {
      char* report = nullptr;
      ilmt_status st = ilmt_errcat(errcat.hyp.c_str(), errcat.ref_conllu.c_str(),
                                   errcat.lemma_conllu.c_str(), opt(errcat.baseline_report),
                                   &report);
      rc = finish_report(st, report, errcat.out);
    });
  }

  struct {
    std::string checkpoint, src_units, ref_conllu, mode, tag_kind, bpe_model, freq_conllu, out;
    std::size_t beam = 5;
  } forced;
  {
    auto* cmd = add_cmd("forced-eval", "Constrained decoding accuracy against references");
    cmd->add_option("--checkpoint", forced.checkpoint, "Trained model")->required();
    cmd->add_option("--src-units", forced.src_units, "Source units, one sentence per line")
        ->required();
    cmd->add_option("--ref-conllu", forced.ref_conllu, "Annotated references")->required();
    cmd->add_option("--mode", forced.mode, "force-tags, force-words or restrict-pos")
        ->required();
    cmd->add_option("--tag-kind", forced.tag_kind, "Tag vocabulary the model was trained with")
        ->required();
    cmd->add_option("--bpe-model", forced.bpe_model, "Target-side merge table")->required();
    cmd->add_option("--freq-conllu", forced.freq_conllu, "Corpus for frequency buckets");
    cmd->add_option("--beam", forced.beam, "Beam width");
    cmd->add_option("--out", forced.out, "Report file (default: stdout)");
    cmd->callback([&] {
      LoadedModel model;
      ilmt_status st = ilmt_model_load(forced.checkpoint.c_str(), &model.handle);
      char* report = nullptr;
      if (st == ILMT_OK) {
        st = ilmt_forced_eval(model.handle, forced.src_units.c_str(),
                              forced.ref_conllu.c_str(), forced.mode.c_str(),
                              forced.tag_kind.c_str(), forced.bpe_model.c_str(),
                              opt(forced.freq_conllu), forced.beam, threads, &report);
      }
      rc = finish_report(st, report, forced.out);
    });
  }

  bool run_quiet = false;
  {
    auto* cmd = add_cmd("run", "Run one experiment end to end into --out-dir");
    cmd->add_flag("--quiet", run_quiet, "Suppress stage progress on stderr");
    cmd->callback([&] {
      char* summary = nullptr;
      ilmt_status st = ilmt_run_experiment(need_config("run"), need_dir("run"), threads,
                                           run_quiet ? 0 : 1, &summary);
      rc = finish_report(st, summary, "");
    });
  }

  bool grid_quiet = false;
  {
    auto* cmd = add_cmd("grid", "Staged hyper-parameter search around a baseline config");
    cmd->add_flag("--quiet", grid_quiet, "Suppress stage progress on stderr");
    cmd->callback([&] {
      char* best = nullptr;
      ilmt_status st = ilmt_grid_search(need_config("grid"), need_dir("grid"), threads,
                                        grid_quiet ? 0 : 1, &best);
      rc = finish_report(st, best, "");
    });
  }

  // CLI11's own exit codes are normalized to the documented 0/1 contract.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  return rc;
}
