#include "pipeline.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "bpe.hpp"
#include "synth.hpp"

namespace fs = std::filesystem;

namespace ilmt {

std::string to_string(TagArm arm) {
  switch (arm) {
    case TagArm::None: return "none";
    case TagArm::SlDum: return "SL-DUM";
    case TagArm::SlPos: return "SL-POS";
    case TagArm::SlMsd: return "SL-MSD";
    case TagArm::TlDum: return "TL-DUM";
    case TagArm::TlPos: return "TL-POS";
    case TagArm::TlMsd: return "TL-MSD";
    case TagArm::SlMsdTlPos: return "SLMSD+TLPOS";
  }
  throw std::invalid_argument("unknown tag arm");
}

TagArm tag_arm_from_string(std::string_view s) {
  std::string u = to_lower_ascii(s);
  if (u == "none") return TagArm::None;
  if (u == "sl-dum") return TagArm::SlDum;
  if (u == "sl-pos") return TagArm::SlPos;
  if (u == "sl-msd") return TagArm::SlMsd;
  if (u == "tl-dum") return TagArm::TlDum;
  if (u == "tl-pos") return TagArm::TlPos;
  if (u == "tl-msd") return TagArm::TlMsd;
  if (u == "slmsd+tlpos") return TagArm::SlMsdTlPos;
  throw std::invalid_argument("unknown tag arm '" + std::string(s) +
                              "' (expected none, SL-DUM, SL-POS, SL-MSD, TL-DUM, "
                              "TL-POS, TL-MSD or SLMSD+TLPOS)");
}

std::optional<TagKind> source_tag_kind(TagArm arm) {
  switch (arm) {
    case TagArm::SlDum: return TagKind::Dum;
    case TagArm::SlPos: return TagKind::Pos;
    case TagArm::SlMsd:
    case TagArm::SlMsdTlPos: return TagKind::Msd;
    default: return std::nullopt;
  }
}

std::optional<TagKind> target_tag_kind(TagArm arm) {
  switch (arm) {
    case TagArm::TlDum: return TagKind::Dum;
    case TagArm::TlPos:
    case TagArm::SlMsdTlPos: return TagKind::Pos;
    case TagArm::TlMsd: return TagKind::Msd;
    default: return std::nullopt;
  }
}

void ExperimentConfig::validate() const {
  auto need = [](const std::string& v, const char* key) {
    if (v.empty()) throw std::invalid_argument(std::string("config: missing ") + key);
  };
  need(train_src, "data.train.src");
  need(train_tgt, "data.train.tgt");
  need(dev_src, "data.dev.src");
  need(dev_tgt, "data.dev.tgt");
  need(test_src, "data.test.src");
  need(test_tgt, "data.test.tgt");
  if (bpe_src_ops == 0 || bpe_tgt_ops == 0) {
    throw std::invalid_argument("config: BPE operations must be positive");
  }
  if (bootstrap_iterations == 0) {
    throw std::invalid_argument("config: signif.iterations must be positive");
  }
  if (!(bootstrap_alpha > 0.0 && bootstrap_alpha < 1.0)) {
    throw std::invalid_argument("config: signif.alpha must lie in (0, 1)");
  }
  model.validate();
  train.validate();
}

KvMap ExperimentConfig::to_kv() const {
  KvMap kv = model.to_kv();
  for (const auto& [k, v] : train.to_kv()) kv[k] = v;
  kv["pair"] = pair;
  kv["arm"] = to_string(arm);
  kv["seed"] = std::to_string(seed);
  kv["data.train.src"] = train_src;
  kv["data.train.tgt"] = train_tgt;
  kv["data.dev.src"] = dev_src;
  kv["data.dev.tgt"] = dev_tgt;
  kv["data.test.src"] = test_src;
  kv["data.test.tgt"] = test_tgt;
  kv["data.downsample"] = std::to_string(downsample);
  kv["bpe.src_ops"] = std::to_string(bpe_src_ops);
  kv["bpe.tgt_ops"] = std::to_string(bpe_tgt_ops);
  kv["baseline_run"] = baseline_run;
  kv["signif.iterations"] = std::to_string(bootstrap_iterations);
  kv["signif.alpha"] = double_repr(bootstrap_alpha);
  return kv;
}

ExperimentConfig ExperimentConfig::from_kv(const KvMap& kv) {
  ExperimentConfig cfg;
  cfg.model = ModelConfig::from_kv(kv);
  cfg.train = TrainingConfig::from_kv(kv);
  cfg.pair = kv_str(kv, "pair", cfg.pair);
  cfg.arm = tag_arm_from_string(kv_str(kv, "arm", to_string(cfg.arm)));
  cfg.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<long long>(cfg.seed)));
  // The master seed also seeds training unless train.seed is given explicitly.
  if (kv.count("seed") && !kv.count("train.seed")) cfg.train.seed = cfg.seed;
  cfg.train_src = kv_str(kv, "data.train.src", "");
  cfg.train_tgt = kv_str(kv, "data.train.tgt", "");
  cfg.dev_src = kv_str(kv, "data.dev.src", "");
  cfg.dev_tgt = kv_str(kv, "data.dev.tgt", "");
  cfg.test_src = kv_str(kv, "data.test.src", "");
  cfg.test_tgt = kv_str(kv, "data.test.tgt", "");
  cfg.downsample = static_cast<std::size_t>(kv_int(kv, "data.downsample", 0));
  cfg.bpe_src_ops =
      static_cast<std::size_t>(kv_int(kv, "bpe.src_ops", static_cast<long long>(cfg.bpe_src_ops)));
  cfg.bpe_tgt_ops =
      static_cast<std::size_t>(kv_int(kv, "bpe.tgt_ops", static_cast<long long>(cfg.bpe_tgt_ops)));
  cfg.baseline_run = kv_str(kv, "baseline_run", "");
  cfg.bootstrap_iterations = static_cast<std::size_t>(
      kv_int(kv, "signif.iterations", static_cast<long long>(cfg.bootstrap_iterations)));
  cfg.bootstrap_alpha = kv_double(kv, "signif.alpha", cfg.bootstrap_alpha);
  return cfg;
}

std::string ExperimentConfig::render() const { return render_kv(to_kv()); }

ExperimentConfig ExperimentConfig::parse(const std::string& text,
                                         const std::string& source_name) {
  return from_kv(parse_kv(text, source_name));
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  return parse(read_file(path), path);
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void write_token_lines(const std::string& path, const std::vector<Tokens>& lines) {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const Tokens& t : lines) out.push_back(join(t));
  write_lines(path, out);
}

Tokens forms_of(const AnnotatedSentence& sent) { return surface(sent); }

struct ManifestRow {
  std::string type, name, value;
};

// Incrementally rewritten after every stage so a failed run still documents
// how far it got.
class Manifest {
 public:
  Manifest(std::string path) : path_(std::move(path)) {}

  void meta(const std::string& name, const std::string& value) {
    rows_.push_back({"meta", name, value});
    flush();
  }
  void stage_ok(const std::string& name) {
    rows_.push_back({"stage", name, "ok"});
    flush();
  }
  void stage_failed(const std::string& name, const std::string& why) {
    rows_.push_back({"stage", name, "failed: " + why});
    flush();
  }

 private:
  void flush() const {
    std::ostringstream os;
    for (const ManifestRow& r : rows_) os << r.type << '\t' << r.name << '\t' << r.value << '\n';
    write_file(path_, os.str());
  }

  std::string path_;
  std::vector<ManifestRow> rows_;
};

[[noreturn]] void rethrow_with_stage(const std::string& stage) {
  const std::string prefix = "stage " + stage + ": ";
  try {
    throw;
  } catch (const data_error& e) {
    throw data_error(prefix + e.what());
  } catch (const io_error& e) {
    throw io_error(prefix + e.what());
  } catch (const divergence_error& e) {
    throw divergence_error(prefix + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(prefix + e.what());
  } catch (const std::exception& e) {
    throw data_error(prefix + e.what());
  }
}

template <class Fn>
void run_stage(Manifest& manifest, const std::string& name, std::ostream* log, Fn&& fn) {
  if (log) *log << "[stage] " << name << '\n';
  try {
    fn();
  } catch (const std::exception& e) {
    manifest.stage_failed(name, e.what());
    rethrow_with_stage(name);
  }
  manifest.stage_ok(name);
}

struct Split {
  std::vector<AnnotatedSentence> src, tgt;
};

Split load_split(const std::string& src_path, const std::string& tgt_path,
                 const std::string& split_name) {
  Split s;
  s.src = parse_conllu_file(src_path);
  s.tgt = parse_conllu_file(tgt_path);
  if (s.src.size() != s.tgt.size()) {
    throw data_error(split_name + ": " + std::to_string(s.src.size()) +
                     " source sentences vs " + std::to_string(s.tgt.size()) + " target");
  }
  if (s.src.empty()) throw data_error(split_name + ": empty corpus");
  return s;
}

TagPredicate tag_predicate(bool side_has_tags) {
  if (!side_has_tags) return nullptr;  // plain text may contain tag-shaped words
  return [](const std::string& t) { return parse_tag(t).has_value(); };
}

std::string bucket_rows(const std::string& mode, const AccuracyReport& r) {
  std::ostringstream os;
  os << mode << "\tall\t" << fixed6(r.overall) << '\n';
  if (r.infrequent) os << mode << "\tinfrequent\t" << fixed6(*r.infrequent) << '\n';
  if (r.oov) os << mode << "\toov\t" << fixed6(*r.oov) << '\n';
  return os.str();
}

}  // namespace

ErrorCounts parse_error_report(const std::string& text) {
  ErrorCounts counts;
  std::size_t lineno = 0;
  for (const std::string& raw : split_char(text, '\n')) {
    ++lineno;
    if (trim(raw).empty()) continue;
    std::vector<std::string> cols = split_char(raw, '\t');
    if (cols.size() != 2) {
      throw data_error("error report line " + std::to_string(lineno) + ": expected 2 columns");
    }
    std::size_t value = 0;
    try {
      value = static_cast<std::size_t>(std::stoull(cols[1]));
    } catch (const std::exception&) {
      throw data_error("error report line " + std::to_string(lineno) + ": bad count '" +
                       cols[1] + "'");
    }
    if (cols[0] == "inflection") counts.inflection = value;
    else if (cols[0] == "reordering") counts.reordering = value;
    else if (cols[0] == "missing") counts.missing = value;
    else if (cols[0] == "extra") counts.extra = value;
    else if (cols[0] == "lexical_choice") counts.lexical_choice = value;
    // grouped_lexical / total are recomputed, unknown rows are ignored
  }
  return counts;
}

RunOutcome run_experiment(const ExperimentConfig& cfg_in, const std::string& run_dir,
                          std::size_t threads, std::ostream* log) {
  ExperimentConfig cfg = cfg_in;
  // The arm decides whether the target stream is tagged; the model flag
  // follows it so checkpoints are self-describing.
  cfg.model.tl_tags = target_tag_kind(cfg.arm).has_value();
  cfg.validate();

  for (const char* sub : {"", "corpus", "bpe", "model", "translations", "reports"}) {
    fs::create_directories(fs::path(run_dir) / sub);
  }
  const std::string config_text = cfg.render();
  write_file(run_dir + "/config.txt", config_text);

  RunOutcome out;
  out.run_dir = run_dir;
  out.config_hash = fnv1a64(config_text);

  Manifest manifest(run_dir + "/manifest.tsv");
  manifest.meta("config_hash", hash_hex(out.config_hash));
  manifest.meta("seed", std::to_string(cfg.seed));
  manifest.meta("pair", cfg.pair);
  manifest.meta("arm", to_string(cfg.arm));

  const std::optional<TagKind> src_kind = source_tag_kind(cfg.arm);
  const std::optional<TagKind> tgt_kind = target_tag_kind(cfg.arm);

  Split train_split, dev_split, test_split;
  TruecaseModel tc_src, tc_tgt;

  run_stage(manifest, "prep", log, [&] {
    train_split = load_split(cfg.train_src, cfg.train_tgt, "train");
    dev_split = load_split(cfg.dev_src, cfg.dev_tgt, "dev");
    test_split = load_split(cfg.test_src, cfg.test_tgt, "test");

    // Length filter on the training split only; evaluation sets stay intact.
    Split filtered;
    for (std::size_t i = 0; i < train_split.src.size(); ++i) {
      std::size_t a = train_split.src[i].tokens.size();
      std::size_t b = train_split.tgt[i].tokens.size();
      if (a >= 1 && a <= 100 && b >= 1 && b <= 100) {
        filtered.src.push_back(std::move(train_split.src[i]));
        filtered.tgt.push_back(std::move(train_split.tgt[i]));
      }
    }
    train_split = std::move(filtered);
    if (train_split.src.empty()) throw data_error("train: no pairs survive the length filter");

    if (cfg.downsample > 0 && cfg.downsample < train_split.src.size()) {
      // Reuse the sampler's index selection so the choice matches the
      // standalone prep command given the same seed.
      std::vector<SentencePair> shells(train_split.src.size());
      for (std::size_t i = 0; i < shells.size(); ++i) shells[i].id = i;
      std::vector<SentencePair> picked =
          downsample(shells, cfg.downsample, mix_seed(cfg.seed, 0xDA7A));
      Split sampled;
      for (const SentencePair& p : picked) {
        sampled.src.push_back(std::move(train_split.src[p.id]));
        sampled.tgt.push_back(std::move(train_split.tgt[p.id]));
      }
      train_split = std::move(sampled);
    }

    for (const AnnotatedSentence& s : train_split.src) tc_src.learn(forms_of(s));
    for (const AnnotatedSentence& s : train_split.tgt) tc_tgt.learn(forms_of(s));
    auto recase = [](std::vector<AnnotatedSentence>& sents, const TruecaseModel& tc) {
      for (AnnotatedSentence& s : sents) {
        Tokens cased = tc.apply(forms_of(s));
        for (std::size_t i = 0; i < s.tokens.size(); ++i) s.tokens[i].form = cased[i];
      }
    };
    for (Split* split : {&train_split, &dev_split, &test_split}) {
      recase(split->src, tc_src);
      recase(split->tgt, tc_tgt);
    }
    tc_src.save(run_dir + "/corpus/truecase.src.tsv");
    tc_tgt.save(run_dir + "/corpus/truecase.tgt.tsv");

    auto dump = [&](const char* split_name, const Split& split) {
      std::vector<Tokens> src_lines, tgt_lines;
      for (const AnnotatedSentence& s : split.src) src_lines.push_back(forms_of(s));
      for (const AnnotatedSentence& s : split.tgt) tgt_lines.push_back(forms_of(s));
      write_token_lines(run_dir + "/corpus/" + split_name + ".src.txt", src_lines);
      write_token_lines(run_dir + "/corpus/" + split_name + ".tgt.txt", tgt_lines);
    };
    dump("train", train_split);
    dump("dev", dev_split);
    dump("test", test_split);
    if (log) *log << "  train pairs: " << train_split.src.size() << '\n';
  });

  // tag word tag word ... streams (or plain forms on untagged sides)
  std::vector<Tokens> train_src_units, train_tgt_units, dev_src_units, dev_tgt_units,
      test_src_units;
  run_stage(manifest, "annotate", log, [&] {
    auto stream_of = [](const std::vector<AnnotatedSentence>& sents,
                        const std::optional<TagKind>& kind) {
      std::vector<Tokens> out;
      out.reserve(sents.size());
      for (const AnnotatedSentence& s : sents) {
        out.push_back(kind ? interleave(s, *kind) : forms_of(s));
      }
      return out;
    };
    train_src_units = stream_of(train_split.src, src_kind);
    train_tgt_units = stream_of(train_split.tgt, tgt_kind);
    dev_src_units = stream_of(dev_split.src, src_kind);
    dev_tgt_units = stream_of(dev_split.tgt, tgt_kind);
    test_src_units = stream_of(test_split.src, src_kind);
    write_token_lines(run_dir + "/corpus/train.src.tagged.txt", train_src_units);
    write_token_lines(run_dir + "/corpus/train.tgt.tagged.txt", train_tgt_units);
  });

  BpeModel bpe_src, bpe_tgt;
  run_stage(manifest, "bpe", log, [&] {
    bpe_src = bpe_learn(train_src_units, cfg.bpe_src_ops, tag_predicate(src_kind.has_value()));
    bpe_tgt = bpe_learn(train_tgt_units, cfg.bpe_tgt_ops, tag_predicate(tgt_kind.has_value()));
    bpe_src.save(run_dir + "/bpe/src.model");
    bpe_tgt.save(run_dir + "/bpe/tgt.model");
    BpeApplier src_app(bpe_src), tgt_app(bpe_tgt);
    auto segment = [](BpeApplier& app, std::vector<Tokens>& lines, bool tagged) {
      TagPredicate pred = tag_predicate(tagged);
      for (Tokens& line : lines) line = app.stream(line, pred);
    };
    segment(src_app, train_src_units, src_kind.has_value());
    segment(tgt_app, train_tgt_units, tgt_kind.has_value());
    segment(src_app, dev_src_units, src_kind.has_value());
    segment(tgt_app, dev_tgt_units, tgt_kind.has_value());
    segment(src_app, test_src_units, src_kind.has_value());
    write_token_lines(run_dir + "/bpe/train.src.txt", train_src_units);
    write_token_lines(run_dir + "/bpe/train.tgt.txt", train_tgt_units);
    write_token_lines(run_dir + "/bpe/dev.src.txt", dev_src_units);
    write_token_lines(run_dir + "/bpe/dev.tgt.txt", dev_tgt_units);
    write_token_lines(run_dir + "/bpe/test.src.txt", test_src_units);
  });

  std::unique_ptr<Model> model;
  run_stage(manifest, "train", log, [&] {
    Vocabulary src_vocab = Vocabulary::build(train_src_units);
    Vocabulary tgt_vocab = Vocabulary::build(train_tgt_units);
    auto encode_all = [](const Vocabulary& v, const std::vector<Tokens>& lines) {
      std::vector<std::vector<int>> out;
      out.reserve(lines.size());
      for (const Tokens& line : lines) out.push_back(v.encode(line));
      return out;
    };
    EncodedCorpus train_data{encode_all(src_vocab, train_src_units),
                             encode_all(tgt_vocab, train_tgt_units)};
    EncodedCorpus dev_data{encode_all(src_vocab, dev_src_units),
                           encode_all(tgt_vocab, dev_tgt_units)};
    std::vector<Tokens> dev_refs;
    for (const AnnotatedSentence& s : dev_split.tgt) dev_refs.push_back(forms_of(s));

    TrainingConfig tcfg = cfg.train;
    tcfg.threads = threads;
    std::ofstream train_log(run_dir + "/model/train.log");
    TrainResult result = train(cfg.model, tcfg, train_data, dev_data, dev_refs, src_vocab,
                               tgt_vocab, train_log.is_open() ? &train_log : nullptr);
    out.dev_bleu = result.best_dev_bleu;
    out.dev_ppl = result.best_dev_ppl;
    out.train_steps = result.steps;
    model = std::move(result.model);

    KvMap extra;
    extra["run.config_hash"] = hash_hex(out.config_hash);
    extra["run.dev_bleu"] = fixed6(result.best_dev_bleu);
    extra["run.dev_ppl"] = fixed6(result.best_dev_ppl);
    model->save(run_dir + "/model/checkpoint.bin", result.best_step, extra);

    std::ostringstream ts;
    ts << "dev_bleu\t" << fixed6(result.best_dev_bleu) << '\n'
       << "dev_ppl\t" << fixed6(result.best_dev_ppl) << '\n'
       << "best_step\t" << result.best_step << '\n'
       << "steps\t" << result.steps << '\n'
       << "validations\t" << result.validations << '\n';
    write_file(run_dir + "/reports/training.tsv", ts.str());
    if (log) *log << "  dev BLEU " << fixed6(result.best_dev_bleu) << " after " << result.steps
                  << " steps\n";
  });

  std::vector<Tokens> hyp_surface;
  run_stage(manifest, "translate", log, [&] {
    std::vector<std::vector<int>> srcs;
    for (const Tokens& line : test_src_units) srcs.push_back(model->src_vocab().encode(line));
    DecodeOptions opts;
    opts.beam = cfg.train.beam;
    std::vector<BatchDecodeItem> items =
        batch_translate(*model, srcs, {}, opts, threads, &out.translate_stats);

    std::vector<std::string> unit_lines, surface_lines, score_lines;
    score_lines.push_back("id\tlogprob\tlength");
    for (std::size_t i = 0; i < items.size(); ++i) {
      unit_lines.push_back(join(items[i].tokens));
      hyp_surface.push_back(strip_tags(bpe_undo(items[i].tokens)));
      surface_lines.push_back(join(hyp_surface.back()));
      score_lines.push_back(std::to_string(i) + '\t' + fixed6(items[i].result.logprob) + '\t' +
                            std::to_string(items[i].result.length));
    }
    write_lines(run_dir + "/translations/test.units.txt", unit_lines);
    write_lines(run_dir + "/translations/test.txt", surface_lines);
    write_lines(run_dir + "/translations/test.scores.tsv", score_lines);

    std::ostringstream ds;
    ds << "positions\t" << out.translate_stats.positions << '\n'
       << "class_matches\t" << out.translate_stats.class_matches << '\n'
       << "match_rate\t"
       << (out.translate_stats.positions
               ? fixed6(static_cast<double>(out.translate_stats.class_matches) /
                        static_cast<double>(out.translate_stats.positions))
               : std::string("n/a"))
       << '\n';
    write_file(run_dir + "/reports/decode_stats.tsv", ds.str());
  });

  run_stage(manifest, "evaluate", log, [&] {
    std::vector<Tokens> refs;
    for (const AnnotatedSentence& s : test_split.tgt) refs.push_back(forms_of(s));

    BleuReport br = bleu(hyp_surface, refs);
    out.test_bleu = br.score;
    std::ostringstream bs;
    bs << "bleu\t" << fixed6(br.score) << '\n'
       << "brevity_penalty\t" << fixed6(br.brevity_penalty) << '\n';
    for (int n = 0; n < 4; ++n) {
      bs << "precision" << (n + 1) << '\t' << fixed6(br.precisions[n]) << '\n';
    }
    bs << "hyp_tokens\t" << br.hyp_tokens << '\n' << "ref_tokens\t" << br.ref_tokens << '\n';
    write_file(run_dir + "/reports/bleu.tsv", bs.str());
    if (log) *log << "  test BLEU " << fixed6(br.score) << '\n';

    LemmaTable lemmas;
    for (const AnnotatedSentence& s : train_split.tgt) lemmas.learn(s);
    std::vector<std::vector<AnnotatedToken>> hyp_annot, ref_annot;
    for (const Tokens& hyp : hyp_surface) {
      std::vector<AnnotatedToken> sent;
      for (const std::string& form : hyp) {
        AnnotatedToken tok;
        tok.form = form;
        tok.lemma = lemmas.lemma(form);
        tok.upos = "X";
        sent.push_back(std::move(tok));
      }
      hyp_annot.push_back(std::move(sent));
    }
    for (const AnnotatedSentence& s : test_split.tgt) ref_annot.push_back(s.tokens);
    out.errors = corpus_error_totals(hyp_annot, ref_annot);
    write_file(run_dir + "/reports/errors.tsv", error_report_tsv(out.errors));

    if (!cfg.baseline_run.empty()) {
      std::vector<Tokens> base_hyps;
      for (const std::string& line :
           read_lines(cfg.baseline_run + "/translations/test.txt")) {
        base_hyps.push_back(split_ws(line));
      }
      if (base_hyps.size() != refs.size()) {
        throw data_error("baseline run has " + std::to_string(base_hyps.size()) +
                         " translations, test set has " + std::to_string(refs.size()));
      }
      BootstrapResult sig = paired_bootstrap(hyp_surface, base_hyps, refs,
                                             cfg.bootstrap_iterations, cfg.bootstrap_alpha,
                                             cfg.seed);
      out.significance = sig;
      std::ostringstream ss;
      ss << "iterations\t" << sig.iterations << '\n'
         << "wins_system\t" << sig.wins_a << '\n'
         << "wins_baseline\t" << sig.wins_b << '\n'
         << "ties\t" << sig.ties << '\n'
         << "alpha\t" << fixed6(sig.alpha) << '\n'
         << "significant\t" << (sig.a_significantly_better ? 1 : 0) << '\n'
         << "seed\t" << sig.seed << '\n';
      write_file(run_dir + "/reports/bootstrap.tsv", ss.str());

      ErrorCounts base_errors =
          parse_error_report(read_file(cfg.baseline_run + "/reports/errors.tsv"));
      out.errors_vs_baseline = relative_change(out.errors, base_errors);
      write_file(run_dir + "/reports/errors_vs_baseline.tsv",
                 relative_change_tsv(*out.errors_vs_baseline));
    }
  });

  run_stage(manifest, "forced", log, [&] {
    std::string forced_tsv = "mode\tmetric\tvalue\n";
    std::string buckets_tsv = "system\tbucket\taccuracy\n";
    if (tgt_kind) {
      std::vector<std::vector<int>> srcs;
      for (const Tokens& line : test_src_units) srcs.push_back(model->src_vocab().encode(line));
      std::vector<Tokens> ref_streams;
      for (const AnnotatedSentence& s : test_split.tgt) {
        ref_streams.push_back(interleave(s, *tgt_kind));
      }
      std::map<std::string, std::uint64_t> train_freq;
      for (const AnnotatedSentence& s : train_split.tgt) {
        for (const AnnotatedToken& tok : s.tokens) ++train_freq[tok.form];
      }
      BpeApplier tgt_app(bpe_tgt);
      DecodeOptions opts;
      opts.beam = cfg.train.beam;
      // Forced hypotheses carry exactly one tag per reference word and only
      // then may finish, so the cap follows the constraints, with room for
      // the model to pick longer segmentations than the reference ones.
      std::size_t longest = 0;
      for (const AnnotatedSentence& s : test_split.tgt) {
        std::size_t units = s.tokens.size();
        for (const AnnotatedToken& tok : s.tokens) units += tgt_app.word(tok.form).size();
        longest = std::max(longest, units);
      }
      opts.max_len = 4 * longest + 16;

      auto decode_with = [&](ConstraintMode mode) {
        std::vector<DecodeConstraint> constraints(test_split.tgt.size());
        for (std::size_t i = 0; i < test_split.tgt.size(); ++i) {
          constraints[i].mode = mode;
          for (const AnnotatedToken& tok : test_split.tgt[i].tokens) {
            if (mode == ConstraintMode::ForceTags) {
              constraints[i].ref_tags.push_back(render_tag(tok, *tgt_kind));
            } else if (mode == ConstraintMode::ForceWords) {
              constraints[i].ref_words.push_back(tgt_app.word(tok.form));
            } else {
              constraints[i].ref_pos.push_back(tok.upos);
            }
          }
        }
        std::vector<BatchDecodeItem> items =
            batch_translate(*model, srcs, constraints, opts, threads);
        std::vector<Tokens> decoded;
        for (const BatchDecodeItem& item : items) decoded.push_back(bpe_undo(item.tokens));
        return decoded;
      };

      auto add = [&](const std::string& mode, const std::vector<Tokens>& decoded,
                     AccuracyTarget target) {
        AccuracyReport r = bucket_accuracy(decoded, ref_streams, target, train_freq);
        forced_tsv += accuracy_report_rows(mode, r);
        buckets_tsv += bucket_rows(mode, r);
        out.forced.push_back({mode, r});
      };

      std::vector<Tokens> by_tags = decode_with(ConstraintMode::ForceTags);
      add("force_tags", by_tags, AccuracyTarget::SurfaceForms);
      std::vector<Tokens> by_words = decode_with(ConstraintMode::ForceWords);
      add("force_words", by_words, AccuracyTarget::Tags);
      if (*tgt_kind == TagKind::Msd) {
        std::vector<Tokens> by_pos = decode_with(ConstraintMode::RestrictPOS);
        add("restrict_pos", by_pos, AccuracyTarget::Tags);
        add("restrict_pos_prefix", by_pos, AccuracyTarget::PosOfMsd);
      }
    }
    write_file(run_dir + "/reports/forced.tsv", forced_tsv);
    write_file(run_dir + "/reports/buckets.tsv", buckets_tsv);
  });

  return out;
}

std::string SizePoint::slug(const std::string& family) const {
  char buf[64];
  if (family == "recurrent") {
    std::snprintf(buf, sizeof(buf), "h%d_e%d", hidden, embedding);
  } else {
    std::snprintf(buf, sizeof(buf), "d%d_l%d_h%d", model_dim, layers, heads);
  }
  return buf;
}

GridSpace GridSpace::paper_grid(const std::string& family) {
  GridSpace space;
  space.bpe_ops = {5000, 10000, 20000, 40000};
  space.tied_embeddings = {true, false};
  if (family == "recurrent") {
    space.sizes = {{1024, 512, 0, 0, 0}, {512, 512, 0, 0, 0}, {512, 256, 0, 0, 0},
                   {256, 256, 0, 0, 0}};
  } else {
    space.sizes = {{0, 0, 512, 6, 8}, {0, 0, 256, 4, 4}, {0, 0, 128, 2, 2}};
  }
  return space;
}

GridOutcome grid_search(const GridSpace& space, const ExperimentConfig& base,
                        const std::string& work_dir, std::size_t threads, std::ostream* log) {
  if (base.arm != TagArm::None) {
    throw std::invalid_argument("grid search runs on the untagged baseline configuration");
  }
  if (space.bpe_ops.empty() || space.tied_embeddings.empty() || space.sizes.empty()) {
    throw std::invalid_argument("grid search: every stage needs at least one point");
  }

  fs::create_directories(work_dir);
  GridOutcome out;
  out.best = base;
  std::ostringstream ranking;
  ranking << "stage\tpoint\tdev_bleu\tselected\n";

  struct Row {
    std::string stage, point;
    double bleu;
    bool selected = false;
  };
  std::vector<Row> rows;

  auto run_point = [&](const std::string& stage, const std::string& point,
                       const ExperimentConfig& cfg) {
    if (log) *log << "[grid] " << stage << ' ' << point << '\n';
    RunOutcome r = run_experiment(cfg, work_dir + "/" + stage + "_" + point, threads, log);
    ++out.trained;
    rows.push_back({stage, point, r.dev_bleu});
    return r.dev_bleu;
  };
  auto mark_selected = [&](const std::string& stage, const std::string& point) {
    for (Row& r : rows) {
      if (r.stage == stage && r.point == point) r.selected = true;
    }
  };

  double best_bleu = -1.0;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < space.bpe_ops.size(); ++i) {
    ExperimentConfig cfg = out.best;
    cfg.bpe_src_ops = cfg.bpe_tgt_ops = space.bpe_ops[i];
    double b = run_point("s1", "bpe" + std::to_string(space.bpe_ops[i]), cfg);
    if (b > best_bleu) {
      best_bleu = b;
      best_i = i;
    }
  }
  out.best.bpe_src_ops = out.best.bpe_tgt_ops = space.bpe_ops[best_i];
  mark_selected("s1", "bpe" + std::to_string(space.bpe_ops[best_i]));

  best_bleu = -1.0;
  best_i = 0;
  for (std::size_t i = 0; i < space.tied_embeddings.size(); ++i) {
    ExperimentConfig cfg = out.best;
    cfg.model.tied_embeddings = space.tied_embeddings[i];
    double b = run_point("s2", space.tied_embeddings[i] ? "tied" : "untied", cfg);
    if (b > best_bleu) {
      best_bleu = b;
      best_i = i;
    }
  }
  out.best.model.tied_embeddings = space.tied_embeddings[best_i];
  mark_selected("s2", space.tied_embeddings[best_i] ? "tied" : "untied");

  best_bleu = -1.0;
  best_i = 0;
  for (std::size_t i = 0; i < space.sizes.size(); ++i) {
    ExperimentConfig cfg = out.best;
    const SizePoint& p = space.sizes[i];
    if (cfg.model.family == "recurrent") {
      cfg.model.hidden = p.hidden;
      cfg.model.embedding = p.embedding;
    } else {
      cfg.model.model_dim = p.model_dim;
      cfg.model.layers = p.layers;
      cfg.model.heads = p.heads;
    }
    double b = run_point("s3", p.slug(base.model.family), cfg);
    if (b > best_bleu) {
      best_bleu = b;
      best_i = i;
    }
  }
  const SizePoint& win = space.sizes[best_i];
  if (out.best.model.family == "recurrent") {
    out.best.model.hidden = win.hidden;
    out.best.model.embedding = win.embedding;
  } else {
    out.best.model.model_dim = win.model_dim;
    out.best.model.layers = win.layers;
    out.best.model.heads = win.heads;
  }
  mark_selected("s3", win.slug(base.model.family));

  for (const Row& r : rows) {
    ranking << r.stage << '\t' << r.point << '\t' << fixed6(r.bleu) << '\t'
            << (r.selected ? 1 : 0) << '\n';
  }
  out.ranking_tsv = ranking.str();
  write_file(work_dir + "/ranking.tsv", out.ranking_tsv);
  return out;
}

PrepOutcome prep_corpus(const std::string& src_in, const std::string& tgt_in,
                        const std::string& out_dir, std::size_t max_len,
                        std::size_t downsample_n, std::uint64_t seed) {
  if (max_len == 0) throw std::invalid_argument("prep: max_len must be positive");
  std::vector<std::string> src_lines = read_lines(src_in);
  std::vector<std::string> tgt_lines = read_lines(tgt_in);
  if (src_lines.size() != tgt_lines.size()) {
    throw data_error("prep: " + std::to_string(src_lines.size()) + " source lines vs " +
                     std::to_string(tgt_lines.size()) + " target");
  }

  PrepOutcome outcome;
  outcome.read = src_lines.size();
  std::vector<SentencePair> pairs;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    pairs.push_back({tokenize(src_lines[i]), tokenize(tgt_lines[i]), i});
  }

  TruecaseModel tc_src, tc_tgt;
  for (const SentencePair& p : pairs) {
    tc_src.learn(p.src);
    tc_tgt.learn(p.tgt);
  }
  for (SentencePair& p : pairs) {
    p.src = tc_src.apply(p.src);
    p.tgt = tc_tgt.apply(p.tgt);
  }

  pairs = filter_pairs(pairs, max_len);
  outcome.kept = pairs.size();
  if (downsample_n > 0 && downsample_n < pairs.size()) {
    pairs = downsample(pairs, downsample_n, mix_seed(seed, 0xDA7A));
  }
  outcome.written = pairs.size();

  fs::create_directories(out_dir);
  std::vector<Tokens> src_out, tgt_out;
  for (const SentencePair& p : pairs) {
    src_out.push_back(p.src);
    tgt_out.push_back(p.tgt);
  }
  write_token_lines(out_dir + "/src.txt", src_out);
  write_token_lines(out_dir + "/tgt.txt", tgt_out);
  tc_src.save(out_dir + "/truecase.src.tsv");
  tc_tgt.save(out_dir + "/truecase.tgt.tsv");
  return outcome;
}

}  // namespace ilmt
