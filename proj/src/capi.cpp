// C shim over the core modules. Every call funnels through guarded(), which
// maps the exception taxonomy onto status codes and keeps the message in a
// thread-local slot for ilmt_last_error().
#include "ilmt.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "annotate.hpp"
#include "bpe.hpp"
#include "common.hpp"
#include "decode.hpp"
#include "errcat.hpp"
#include "eval.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "synth.hpp"
#include "textproc.hpp"
#include "train.hpp"
#include "vocab.hpp"

namespace fs = std::filesystem;

struct ilmt_model {
  std::unique_ptr<ilmt::Model> model;
  std::uint64_t step = 0;
  ilmt::KvMap config;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
ilmt_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return ILMT_OK;
  } catch (const ilmt::data_error& e) {
    g_last_error = e.what();
    return ILMT_ERR_DATA;
  } catch (const ilmt::io_error& e) {
    g_last_error = e.what();
    return ILMT_ERR_IO;
  } catch (const ilmt::divergence_error& e) {
    g_last_error = e.what();
    return ILMT_ERR_DIVERGED;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return ILMT_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ILMT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return ILMT_ERR_INTERNAL;
  }
}

std::string need(const char* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be NULL");
  return p;
}

// Outputs travel as malloc'd strings so the caller frees them with plain
// free() semantics (ilmt_string_free) regardless of the C++ runtime.
void give_string(char** out, const std::string& s) {
  if (!out) return;
  char* buf = static_cast<char*>(std::malloc(s.size() + 1));
  if (!buf) throw std::bad_alloc();
  std::memcpy(buf, s.c_str(), s.size() + 1);
  *out = buf;
}

void ensure_parent(const std::string& path) {
  fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::vector<ilmt::Tokens> read_token_lines(const std::string& path) {
  std::vector<ilmt::Tokens> out;
  for (const std::string& line : ilmt::read_lines(path)) out.push_back(ilmt::split_ws(line));
  return out;
}

void write_token_lines(const std::string& path, const std::vector<ilmt::Tokens>& lines) {
  ensure_parent(path);
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const ilmt::Tokens& t : lines) out.push_back(ilmt::join(t));
  ilmt::write_lines(path, out);
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

ilmt::TagPredicate tag_predicate(bool protect) {
  if (!protect) return nullptr;
  return [](const std::string& t) { return ilmt::parse_tag(t).has_value(); };
}

std::size_t thread_count(size_t threads) { return threads ? threads : 1; }

// "none" → plain surface stream, otherwise one of the tag vocabularies.
std::optional<ilmt::TagKind> stream_kind(const std::string& kind) {
  if (kind == "none") return std::nullopt;
  return ilmt::tag_kind_from_string(kind);
}

}  // namespace

extern "C" {

const char* ilmt_version(void) { return "0.1.0"; }

const char* ilmt_last_error(void) { return g_last_error.c_str(); }

void ilmt_string_free(char* s) { std::free(s); }

ilmt_status ilmt_prep(const char* src_path, const char* tgt_path, const char* out_dir,
                      size_t max_len, size_t downsample, uint64_t seed) {
  return guarded([&] {
    ilmt::prep_corpus(need(src_path, "src_path"), need(tgt_path, "tgt_path"),
                      need(out_dir, "out_dir"), max_len, downsample, seed);
  });
}

ilmt_status ilmt_synth(const char* out_dir, const char* name, uint64_t seed, size_t pairs) {
  return guarded([&] {
    std::string dir = need(out_dir, "out_dir");
    std::string base = need(name, "name");
    std::vector<ilmt::SynthPair> corpus = ilmt::synth_corpus(seed, pairs);
    std::vector<ilmt::AnnotatedSentence> src, tgt;
    src.reserve(corpus.size());
    tgt.reserve(corpus.size());
    for (ilmt::SynthPair& p : corpus) {
      src.push_back(std::move(p.src));
      tgt.push_back(std::move(p.tgt));
    }
    fs::create_directories(dir);
    ilmt::write_conllu(src, dir + "/" + base + ".src.conllu");
    ilmt::write_conllu(tgt, dir + "/" + base + ".tgt.conllu");
  });
}

ilmt_status ilmt_annotate(const char* conllu_path, const char* kind, const char* out_path) {
  return guarded([&] {
    std::optional<ilmt::TagKind> tag = stream_kind(need(kind, "kind"));
    std::vector<ilmt::AnnotatedSentence> sents =
        ilmt::parse_conllu_file(need(conllu_path, "conllu_path"));
    std::vector<ilmt::Tokens> lines;
    lines.reserve(sents.size());
    for (const ilmt::AnnotatedSentence& s : sents) {
      lines.push_back(tag ? ilmt::interleave(s, *tag) : ilmt::surface(s));
    }
    write_token_lines(need(out_path, "out_path"), lines);
  });
}

ilmt_status ilmt_bpe_learn(const char* corpus_path, size_t operations, int protect_tags,
                           const char* model_path) {
  return guarded([&] {
    std::vector<ilmt::Tokens> corpus = read_token_lines(need(corpus_path, "corpus_path"));
    ilmt::BpeModel model = ilmt::bpe_learn(corpus, operations, tag_predicate(protect_tags != 0));
    std::string out = need(model_path, "model_path");
    ensure_parent(out);
    model.save(out);
  });
}

ilmt_status ilmt_bpe_apply(const char* model_path, const char* input_path, int protect_tags,
                           const char* output_path) {
  return guarded([&] {
    ilmt::BpeModel model = ilmt::BpeModel::load(need(model_path, "model_path"));
    ilmt::BpeApplier applier(model);
    ilmt::TagPredicate pred = tag_predicate(protect_tags != 0);
    std::vector<ilmt::Tokens> lines = read_token_lines(need(input_path, "input_path"));
    for (ilmt::Tokens& line : lines) line = applier.stream(line, pred);
    write_token_lines(need(output_path, "output_path"), lines);
  });
}

ilmt_status ilmt_train(const char* config_path, const char* train_src, const char* train_tgt,
                       const char* dev_src, const char* dev_tgt, const char* checkpoint_out,
                       const char* log_path, size_t threads) {
  return guarded([&] {
    ilmt::KvMap kv =
        ilmt::parse_kv(ilmt::read_file(need(config_path, "config_path")), config_path);
    ilmt::ModelConfig mcfg = ilmt::ModelConfig::from_kv(kv);
    ilmt::TrainingConfig tcfg = ilmt::TrainingConfig::from_kv(kv);
    if (kv.count("seed") && !kv.count("train.seed")) {
      tcfg.seed = static_cast<std::uint64_t>(ilmt::kv_int(kv, "seed", 1));
    }
    tcfg.threads = thread_count(threads);
    mcfg.validate();
    tcfg.validate();

    std::vector<ilmt::Tokens> train_src_units = read_token_lines(need(train_src, "train_src"));
    std::vector<ilmt::Tokens> train_tgt_units = read_token_lines(need(train_tgt, "train_tgt"));
    std::vector<ilmt::Tokens> dev_src_units = read_token_lines(need(dev_src, "dev_src"));
    std::vector<ilmt::Tokens> dev_tgt_units = read_token_lines(need(dev_tgt, "dev_tgt"));
    if (train_src_units.size() != train_tgt_units.size()) {
      throw ilmt::data_error("train sides differ: " + std::to_string(train_src_units.size()) +
                             " vs " + std::to_string(train_tgt_units.size()) + " sentences");
    }
    if (dev_src_units.size() != dev_tgt_units.size()) {
      throw ilmt::data_error("dev sides differ: " + std::to_string(dev_src_units.size()) +
                             " vs " + std::to_string(dev_tgt_units.size()) + " sentences");
    }

    ilmt::Vocabulary src_vocab = ilmt::Vocabulary::build(train_src_units);
    ilmt::Vocabulary tgt_vocab = ilmt::Vocabulary::build(train_tgt_units);
    auto encode_all = [](const ilmt::Vocabulary& v, const std::vector<ilmt::Tokens>& lines) {
      std::vector<std::vector<int>> out;
      out.reserve(lines.size());
      for (const ilmt::Tokens& line : lines) out.push_back(v.encode(line));
      return out;
    };
    ilmt::EncodedCorpus train_data{encode_all(src_vocab, train_src_units),
                                   encode_all(tgt_vocab, train_tgt_units)};
    ilmt::EncodedCorpus dev_data{encode_all(src_vocab, dev_src_units),
                                 encode_all(tgt_vocab, dev_tgt_units)};
    // Checkpoint selection scores plain text, so recover it from the units.
    std::vector<ilmt::Tokens> dev_refs;
    dev_refs.reserve(dev_tgt_units.size());
    for (const ilmt::Tokens& units : dev_tgt_units) {
      dev_refs.push_back(ilmt::strip_tags(ilmt::bpe_undo(units)));
    }

    std::ofstream log_file;
    if (log_path) {
      ensure_parent(log_path);
      log_file.open(log_path);
      if (!log_file) throw ilmt::io_error(std::string("cannot write ") + log_path);
    }
    ilmt::TrainResult result =
        ilmt::train(mcfg, tcfg, train_data, dev_data, dev_refs, src_vocab, tgt_vocab,
                    log_file.is_open() ? &log_file : nullptr);

    ilmt::KvMap extra;
    extra["run.dev_bleu"] = fixed6(result.best_dev_bleu);
    extra["run.dev_ppl"] = fixed6(result.best_dev_ppl);
    std::string out = need(checkpoint_out, "checkpoint_out");
    ensure_parent(out);
    result.model->save(out, result.best_step, extra);
  });
}

ilmt_status ilmt_model_load(const char* checkpoint_path, ilmt_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    if (!out) throw std::invalid_argument("out must not be NULL");
    ilmt::Model::Loaded loaded = ilmt::Model::load(checkpoint_path);
    auto* handle = new ilmt_model;
    handle->model = std::move(loaded.model);
    handle->step = loaded.step;
    handle->config = std::move(loaded.config);
    *out = handle;
  });
}

void ilmt_model_free(ilmt_model* model) { delete model; }

ilmt_status ilmt_model_config(const ilmt_model* model, char** kv_text) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model must not be NULL");
    ilmt::KvMap kv = model->config;
    kv["step"] = std::to_string(model->step);
    give_string(kv_text, ilmt::render_kv(kv));
  });
}

ilmt_status ilmt_translate(ilmt_model* model, const char* input_path, size_t beam,
                           size_t max_len, size_t threads, const char* units_out,
                           const char* text_out, const char* scores_out) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model must not be NULL");
    if (beam == 0) throw std::invalid_argument("beam must be positive");
    std::vector<ilmt::Tokens> lines = read_token_lines(need(input_path, "input_path"));
    std::vector<std::vector<int>> srcs;
    srcs.reserve(lines.size());
    for (const ilmt::Tokens& line : lines) srcs.push_back(model->model->src_vocab().encode(line));

    ilmt::DecodeOptions opts;
    opts.beam = beam;
    opts.max_len = max_len;
    std::vector<ilmt::BatchDecodeItem> items =
        ilmt::batch_translate(*model->model, srcs, {}, opts, thread_count(threads));

    if (units_out) {
      std::vector<ilmt::Tokens> unit_lines;
      for (const ilmt::BatchDecodeItem& item : items) unit_lines.push_back(item.tokens);
      write_token_lines(units_out, unit_lines);
    }
    if (text_out) {
      std::vector<ilmt::Tokens> surface_lines;
      for (const ilmt::BatchDecodeItem& item : items) {
        surface_lines.push_back(ilmt::strip_tags(ilmt::bpe_undo(item.tokens)));
      }
      write_token_lines(text_out, surface_lines);
    }
    if (scores_out) {
      std::vector<std::string> rows;
      rows.push_back("id\tlogprob\tlength");
      for (std::size_t i = 0; i < items.size(); ++i) {
        rows.push_back(std::to_string(i) + '\t' + fixed6(items[i].result.logprob) + '\t' +
                       std::to_string(items[i].result.length));
      }
      ensure_parent(scores_out);
      ilmt::write_lines(scores_out, rows);
    }
  });
}

ilmt_status ilmt_forced_eval(ilmt_model* model, const char* src_units_path,
                             const char* ref_conllu_path, const char* mode,
                             const char* tag_kind, const char* bpe_model_path,
                             const char* freq_conllu_path, size_t beam, size_t threads,
                             char** report_tsv) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model must not be NULL");
    if (beam == 0) throw std::invalid_argument("beam must be positive");
    std::string mode_name = need(mode, "mode");
    ilmt::ConstraintMode cmode;
    if (mode_name == "force-tags") {
      cmode = ilmt::ConstraintMode::ForceTags;
    } else if (mode_name == "force-words") {
      cmode = ilmt::ConstraintMode::ForceWords;
    } else if (mode_name == "restrict-pos") {
      cmode = ilmt::ConstraintMode::RestrictPOS;
    } else {
      throw std::invalid_argument("unknown mode '" + mode_name +
                                  "' (expected force-tags, force-words or restrict-pos)");
    }
    ilmt::TagKind kind = ilmt::tag_kind_from_string(need(tag_kind, "tag_kind"));

    std::vector<ilmt::Tokens> src_units = read_token_lines(need(src_units_path, "src_units_path"));
    std::vector<ilmt::AnnotatedSentence> refs =
        ilmt::parse_conllu_file(need(ref_conllu_path, "ref_conllu_path"));
    if (src_units.size() != refs.size()) {
      throw ilmt::data_error("source has " + std::to_string(src_units.size()) +
                             " sentences, references have " + std::to_string(refs.size()));
    }
    ilmt::BpeModel bpe = ilmt::BpeModel::load(need(bpe_model_path, "bpe_model_path"));
    ilmt::BpeApplier applier(bpe);

    std::vector<std::vector<int>> srcs;
    std::vector<ilmt::Tokens> ref_streams;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      srcs.push_back(model->model->src_vocab().encode(src_units[i]));
      ref_streams.push_back(ilmt::interleave(refs[i], kind));
    }

    std::vector<ilmt::DecodeConstraint> constraints(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      constraints[i].mode = cmode;
      for (const ilmt::AnnotatedToken& tok : refs[i].tokens) {
        if (cmode == ilmt::ConstraintMode::ForceTags) {
          constraints[i].ref_tags.push_back(ilmt::render_tag(tok, kind));
        } else if (cmode == ilmt::ConstraintMode::ForceWords) {
          constraints[i].ref_words.push_back(applier.word(tok.form));
        } else {
          constraints[i].ref_pos.push_back(tok.upos);
        }
      }
    }

    ilmt::DecodeOptions opts;
    opts.beam = beam;
    // One tag per reference word before the hypothesis may finish; leave the
    // model room to segment words into more pieces than the reference does.
    std::size_t longest = 0;
    for (const ilmt::AnnotatedSentence& s : refs) {
      std::size_t units = s.tokens.size();
      for (const ilmt::AnnotatedToken& tok : s.tokens) units += applier.word(tok.form).size();
      longest = std::max(longest, units);
    }
    opts.max_len = 4 * longest + 16;

    std::vector<ilmt::BatchDecodeItem> items =
        ilmt::batch_translate(*model->model, srcs, constraints, opts, thread_count(threads));
    std::vector<ilmt::Tokens> decoded;
    decoded.reserve(items.size());
    for (const ilmt::BatchDecodeItem& item : items) decoded.push_back(ilmt::bpe_undo(item.tokens));

    std::map<std::string, std::uint64_t> freq;
    bool bucketed = freq_conllu_path != nullptr;
    if (bucketed) {
      for (const ilmt::AnnotatedSentence& s : ilmt::parse_conllu_file(freq_conllu_path)) {
        for (const ilmt::AnnotatedToken& tok : s.tokens) ++freq[tok.form];
      }
    }
    auto measure = [&](ilmt::AccuracyTarget target) {
      return bucketed ? ilmt::bucket_accuracy(decoded, ref_streams, target, freq)
                      : ilmt::prediction_accuracy(decoded, ref_streams, target);
    };

    std::string report = "mode\tmetric\tvalue\n";
    if (cmode == ilmt::ConstraintMode::ForceTags) {
      report += ilmt::accuracy_report_rows("force_tags", measure(ilmt::AccuracyTarget::SurfaceForms));
    } else if (cmode == ilmt::ConstraintMode::ForceWords) {
      report += ilmt::accuracy_report_rows("force_words", measure(ilmt::AccuracyTarget::Tags));
    } else {
      report += ilmt::accuracy_report_rows("restrict_pos", measure(ilmt::AccuracyTarget::Tags));
      if (kind == ilmt::TagKind::Msd) {
        report += ilmt::accuracy_report_rows("restrict_pos_prefix",
                                             measure(ilmt::AccuracyTarget::PosOfMsd));
      }
    }
    give_string(report_tsv, report);
  });
}

ilmt_status ilmt_eval_bleu(const char* hyp_path, const char* ref_path, char** report_tsv) {
  return guarded([&] {
    std::vector<ilmt::Tokens> hyps = read_token_lines(need(hyp_path, "hyp_path"));
    std::vector<ilmt::Tokens> refs = read_token_lines(need(ref_path, "ref_path"));
    if (hyps.size() != refs.size()) {
      throw ilmt::data_error("hypothesis has " + std::to_string(hyps.size()) +
                             " sentences, references have " + std::to_string(refs.size()));
    }
    ilmt::BleuReport br = ilmt::bleu(hyps, refs);
    std::ostringstream os;
    os << "bleu\t" << fixed6(br.score) << '\n'
       << "brevity_penalty\t" << fixed6(br.brevity_penalty) << '\n';
    for (int n = 0; n < 4; ++n) os << "precision" << (n + 1) << '\t' << fixed6(br.precisions[n]) << '\n';
    os << "hyp_tokens\t" << br.hyp_tokens << '\n' << "ref_tokens\t" << br.ref_tokens << '\n';
    give_string(report_tsv, os.str());
  });
}

ilmt_status ilmt_eval_signif(const char* hyp_a_path, const char* hyp_b_path,
                             const char* ref_path, size_t iterations, double alpha,
                             uint64_t seed, char** report_tsv) {
  return guarded([&] {
    std::vector<ilmt::Tokens> hyps_a = read_token_lines(need(hyp_a_path, "hyp_a_path"));
    std::vector<ilmt::Tokens> hyps_b = read_token_lines(need(hyp_b_path, "hyp_b_path"));
    std::vector<ilmt::Tokens> refs = read_token_lines(need(ref_path, "ref_path"));
    if (hyps_a.size() != refs.size() || hyps_b.size() != refs.size()) {
      throw ilmt::data_error("hypothesis files and references disagree on sentence count (" +
                             std::to_string(hyps_a.size()) + ", " +
                             std::to_string(hyps_b.size()) + ", " +
                             std::to_string(refs.size()) + ")");
    }
    ilmt::BootstrapResult sig =
        ilmt::paired_bootstrap(hyps_a, hyps_b, refs, iterations, alpha, seed);
    std::ostringstream os;
    os << "iterations\t" << sig.iterations << '\n'
       << "wins_system\t" << sig.wins_a << '\n'
       << "wins_baseline\t" << sig.wins_b << '\n'
       << "ties\t" << sig.ties << '\n'
       << "alpha\t" << fixed6(sig.alpha) << '\n'
       << "significant\t" << (sig.a_significantly_better ? 1 : 0) << '\n'
       << "seed\t" << sig.seed << '\n';
    give_string(report_tsv, os.str());
  });
}

ilmt_status ilmt_errcat(const char* hyp_path, const char* ref_conllu_path,
                        const char* lemma_conllu_path, const char* baseline_report_path,
                        char** report_tsv) {
  return guarded([&] {
    std::vector<ilmt::Tokens> hyps = read_token_lines(need(hyp_path, "hyp_path"));
    std::vector<ilmt::AnnotatedSentence> refs =
        ilmt::parse_conllu_file(need(ref_conllu_path, "ref_conllu_path"));
    if (hyps.size() != refs.size()) {
      throw ilmt::data_error("hypothesis has " + std::to_string(hyps.size()) +
                             " sentences, references have " + std::to_string(refs.size()));
    }
    ilmt::LemmaTable lemmas;
    for (const ilmt::AnnotatedSentence& s :
         ilmt::parse_conllu_file(need(lemma_conllu_path, "lemma_conllu_path"))) {
      lemmas.learn(s);
    }

    std::vector<std::vector<ilmt::AnnotatedToken>> hyp_annot, ref_annot;
    for (const ilmt::Tokens& hyp : hyps) {
      std::vector<ilmt::AnnotatedToken> sent;
      for (const std::string& form : hyp) {
        ilmt::AnnotatedToken tok;
        tok.form = form;
        tok.lemma = lemmas.lemma(form);
        tok.upos = "X";
        sent.push_back(std::move(tok));
      }
      hyp_annot.push_back(std::move(sent));
    }
    for (const ilmt::AnnotatedSentence& s : refs) ref_annot.push_back(s.tokens);

    ilmt::ErrorCounts totals = ilmt::corpus_error_totals(hyp_annot, ref_annot);
    std::string report = ilmt::error_report_tsv(totals);
    if (baseline_report_path) {
      ilmt::ErrorCounts base =
          ilmt::parse_error_report(ilmt::read_file(baseline_report_path));
      std::string rel = ilmt::relative_change_tsv(ilmt::relative_change(totals, base));
      // Same category names as the absolute rows, namespaced to stay unique.
      std::istringstream in(rel);
      for (std::string line; std::getline(in, line);) {
        if (!line.empty()) report += "relative." + line + '\n';
      }
    }
    give_string(report_tsv, report);
  });
}

ilmt_status ilmt_run_experiment(const char* config_path, const char* run_dir, size_t threads,
                                int verbose, char** summary_tsv) {
  return guarded([&] {
    ilmt::ExperimentConfig cfg =
        ilmt::ExperimentConfig::parse_file(need(config_path, "config_path"));
    ilmt::RunOutcome out = ilmt::run_experiment(cfg, need(run_dir, "run_dir"),
                                                thread_count(threads),
                                                verbose ? &std::cerr : nullptr);
    std::ostringstream os;
    os << "run_dir\t" << out.run_dir << '\n'
       << "config_hash\t";
    {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "%016llx",
                    static_cast<unsigned long long>(out.config_hash));
      os << buf << '\n';
    }
    os << "dev_bleu\t" << fixed6(out.dev_bleu) << '\n'
       << "dev_ppl\t" << fixed6(out.dev_ppl) << '\n'
       << "train_steps\t" << out.train_steps << '\n'
       << "test_bleu\t" << fixed6(out.test_bleu) << '\n'
       << "errors_total\t" << out.errors.total() << '\n';
    if (out.significance) {
      os << "significant\t" << (out.significance->a_significantly_better ? 1 : 0) << '\n';
    }
    for (const ilmt::ForcedReport& fr : out.forced) {
      os << "forced." << fr.mode << '\t' << fixed6(fr.accuracy.overall) << '\n';
    }
    give_string(summary_tsv, os.str());
  });
}

ilmt_status ilmt_grid_search(const char* config_path, const char* work_dir, size_t threads,
                             int verbose, char** best_config_text) {
  return guarded([&] {
    std::string cfg_path = need(config_path, "config_path");
    ilmt::KvMap kv = ilmt::parse_kv(ilmt::read_file(cfg_path), cfg_path);
    ilmt::ExperimentConfig base = ilmt::ExperimentConfig::from_kv(kv);

    // grid.* keys override the published stage grids one stage at a time.
    ilmt::GridSpace space = ilmt::GridSpace::paper_grid(base.model.family);
    if (kv.count("grid.bpe_ops")) {
      space.bpe_ops.clear();
      for (const std::string& item : ilmt::split_char(kv.at("grid.bpe_ops"), ',')) {
        std::string t = ilmt::trim(item);
        if (!t.empty()) space.bpe_ops.push_back(static_cast<std::size_t>(std::stoll(t)));
      }
    }
    if (kv.count("grid.tied")) {
      space.tied_embeddings.clear();
      for (const std::string& item : ilmt::split_char(kv.at("grid.tied"), ',')) {
        std::string t = ilmt::trim(item);
        if (t == "true") {
          space.tied_embeddings.push_back(true);
        } else if (t == "false") {
          space.tied_embeddings.push_back(false);
        } else if (!t.empty()) {
          throw std::invalid_argument("grid.tied entries must be true or false, got '" + t + "'");
        }
      }
    }
    if (kv.count("grid.sizes")) {
      space.sizes.clear();
      for (const std::string& item : ilmt::split_char(kv.at("grid.sizes"), ',')) {
        std::string t = ilmt::trim(item);
        if (t.empty()) continue;
        std::vector<std::string> parts = ilmt::split_char(t, ':');
        ilmt::SizePoint p;
        if (base.model.family == "recurrent" && parts.size() == 2) {
          p.hidden = std::stoi(parts[0]);
          p.embedding = std::stoi(parts[1]);
        } else if (base.model.family == "transformer" && parts.size() == 3) {
          p.model_dim = std::stoi(parts[0]);
          p.layers = std::stoi(parts[1]);
          p.heads = std::stoi(parts[2]);
        } else {
          throw std::invalid_argument(
              "grid.sizes entries are hidden:embedding (recurrent) or "
              "dim:layers:heads (transformer), got '" + t + "'");
        }
        space.sizes.push_back(p);
      }
    }

    ilmt::GridOutcome out = ilmt::grid_search(space, base, need(work_dir, "work_dir"),
                                              thread_count(threads),
                                              verbose ? &std::cerr : nullptr);
    give_string(best_config_text, out.best.render());
  });
}

}  // extern "C"
