#include "decode.hpp"

#include <algorithm>
#include <limits>
#include <thread>

#include "annotate.hpp"

namespace ilmt {

SymbolClasses SymbolClasses::build(const Vocabulary& vocab, bool tagged_model) {
  SymbolClasses out;
  out.tagged_model = tagged_model;
  out.cls.resize(vocab.size(), Reserved);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    int id = static_cast<int>(i);
    if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos) {
      continue;  // Reserved
    }
    const std::string& sym = vocab.symbol(id);
    if (id == Vocabulary::kUnk) {
      out.cls[i] = WordFinal;  // an unknown word unit, never a tag
    } else if (parse_tag(sym)) {
      out.cls[i] = Tag;
      out.tag_ids.push_back(id);
    } else if (ends_with(sym, kBpeMarker)) {
      out.cls[i] = WordContinue;
    } else {
      out.cls[i] = WordFinal;
    }
  }
  return out;
}

namespace {

struct Hyp {
  std::vector<int> ids;
  double logprob = 0.0;
  bool expect_tag = true;       // parity state (tagged models)
  std::size_t tags_done = 0;
  std::size_t words_done = 0;
};

// 0 = tag, 1 = word unit, 2 = eos; used by the alternation statistic.
int class_bucket(const SymbolClasses& classes, int id) {
  if (id == Vocabulary::kEos) return 2;
  switch (classes.cls[static_cast<std::size_t>(id)]) {
    case SymbolClasses::Tag:
      return 0;
    case SymbolClasses::WordContinue:
    case SymbolClasses::WordFinal:
      return 1;
    default:
      return 3;
  }
}

void allowed_symbols(const SymbolClasses& classes, const DecodeConstraint& constraint,
                     const Vocabulary* vocab, const Hyp& hyp, bool mask_on,
                     std::vector<int>& out) {
  out.clear();
  const std::size_t vsize = classes.cls.size();
  auto all_emittable = [&] {
    for (std::size_t i = 0; i < vsize; ++i) {
      int id = static_cast<int>(i);
      if (id == Vocabulary::kPad || id == Vocabulary::kBos) continue;
      out.push_back(id);
    }
  };

  if (!classes.tagged_model || (constraint.mode == ConstraintMode::Free && !mask_on)) {
    all_emittable();
    return;
  }

  if (hyp.expect_tag) {
    switch (constraint.mode) {
      case ConstraintMode::Free:
        out = classes.tag_ids;
        out.push_back(Vocabulary::kEos);
        return;
      case ConstraintMode::ForceTags: {
        if (hyp.tags_done >= constraint.ref_tags.size()) {
          out.push_back(Vocabulary::kEos);
          return;
        }
        int id = vocab->lookup(constraint.ref_tags[hyp.tags_done]);
        if (id == Vocabulary::kUnk) {
          throw data_error("reference tag '" + constraint.ref_tags[hyp.tags_done] +
                           "' is not in the model vocabulary");
        }
        out.push_back(id);
        return;
      }
      case ConstraintMode::ForceWords:
        if (hyp.words_done >= constraint.ref_words.size()) {
          out.push_back(Vocabulary::kEos);
          return;
        }
        out = classes.tag_ids;
        return;
      case ConstraintMode::RestrictPOS: {
        if (hyp.tags_done >= constraint.ref_pos.size()) {
          out.push_back(Vocabulary::kEos);
          return;
        }
        const std::string& want = constraint.ref_pos[hyp.tags_done];
        for (int id : classes.tag_ids) {
          const std::string& sym = vocab->symbol(id);
          std::size_t us = sym.find('_');
          if (us == std::string::npos) continue;  // MSD tags only
          if (sym.compare(0, us, want) == 0) out.push_back(id);
        }
        if (out.empty()) {
          throw data_error("no MSD tag in the vocabulary has POS prefix '" + want + "'");
        }
        return;
      }
    }
  }

  // Word position.
  if (constraint.mode == ConstraintMode::ForceWords) {
    const Tokens& word = constraint.ref_words[hyp.words_done];
    // Units already emitted for the current word: count back to the last
    // tag (ForceWords runs on tagged models, so a tag opens every word).
    std::size_t emitted = 0;
    for (auto it = hyp.ids.rbegin(); it != hyp.ids.rend(); ++it) {
      if (classes.cls[static_cast<std::size_t>(*it)] == SymbolClasses::Tag) break;
      ++emitted;
    }
    if (emitted >= word.size()) {
      throw data_error("forced word ran past its reference segmentation");
    }
    int id = vocab->lookup(word[emitted]);
    if (id == Vocabulary::kUnk && word[emitted] != Vocabulary::kUnkSym) {
      throw data_error("reference unit '" + word[emitted] +
                       "' is not in the model vocabulary");
    }
    out.push_back(id);
    return;
  }
  for (std::size_t i = 0; i < vsize; ++i) {
    if (classes.cls[i] == SymbolClasses::WordContinue ||
        classes.cls[i] == SymbolClasses::WordFinal) {
      out.push_back(static_cast<int>(i));
    }
  }
}

Hyp extend(const SymbolClasses& classes, const Hyp& hyp, int id, double lp) {
  Hyp next = hyp;
  next.ids.push_back(id);
  next.logprob += lp;
  switch (classes.cls[static_cast<std::size_t>(id)]) {
    case SymbolClasses::Tag:
      ++next.tags_done;
      next.expect_tag = false;
      break;
    case SymbolClasses::WordContinue:
      next.expect_tag = false;
      break;
    case SymbolClasses::WordFinal:
      ++next.words_done;
      next.expect_tag = true;
      break;
    default:
      break;
  }
  return next;
}

DecodeResult finish(const Hyp& hyp, bool with_eos) {
  DecodeResult res;
  res.ids = hyp.ids;
  res.logprob = hyp.logprob;
  res.length = hyp.ids.size() + (with_eos ? 1 : 0);
  res.score = res.length ? res.logprob / static_cast<double>(res.length)
                         : -std::numeric_limits<double>::infinity();
  return res;
}

}  // namespace

DecodeResult beam_search(Scorer& scorer, const SymbolClasses& classes,
                         const DecodeConstraint& constraint, std::size_t src_len,
                         const DecodeOptions& opts, DecodeStats* stats) {
  if (constraint.mode != ConstraintMode::Free && !classes.tagged_model) {
    throw std::invalid_argument(
        "constrained decoding requires a model trained with target-side tags");
  }
  if (constraint.mode == ConstraintMode::ForceTags && constraint.ref_tags.empty()) {
    throw std::invalid_argument("ForceTags needs a non-empty reference tag sequence");
  }
  if (constraint.mode == ConstraintMode::ForceWords && constraint.ref_words.empty()) {
    throw std::invalid_argument("ForceWords needs a non-empty reference word sequence");
  }
  if (constraint.mode == ConstraintMode::RestrictPOS && constraint.ref_pos.empty()) {
    throw std::invalid_argument("RestrictPOS needs a non-empty reference POS sequence");
  }
  if (opts.beam == 0) throw std::invalid_argument("beam width must be positive");

  const Vocabulary* vocab = nullptr;
  if (auto* ms = dynamic_cast<ModelScorer*>(&scorer)) vocab = &ms->model_vocab();
  // Modes that look symbols up by name need the vocabulary.
  if (!vocab && (constraint.mode == ConstraintMode::ForceTags ||
                 constraint.mode == ConstraintMode::ForceWords ||
                 constraint.mode == ConstraintMode::RestrictPOS)) {
    throw std::invalid_argument("named-symbol constraints need a model-backed scorer");
  }

  const std::size_t max_len = opts.max_len ? opts.max_len : 2 * src_len + 10;
  const bool mask_on = opts.class_mask || constraint.mode != ConstraintMode::Free;

  std::vector<Hyp> live{Hyp{}};
  std::vector<DecodeResult> done;
  std::vector<int> allowed;

  struct Cand {
    std::size_t hyp;
    int id;
    double logprob;   // cumulative
    double step_lp;   // this symbol's contribution
  };
  std::vector<Cand> cands;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    cands.clear();
    for (std::size_t h = 0; h < live.size(); ++h) {
      Eigen::RowVectorXd lp = scorer.logprobs(live[h].ids);
      allowed_symbols(classes, constraint, vocab, live[h], mask_on, allowed);

      if (stats && classes.tagged_model && mask_on) {
        int best_all = -1, best_masked = -1;
        double v_all = -std::numeric_limits<double>::infinity();
        double v_masked = v_all;
        for (int id = 0; id < lp.size(); ++id) {
          if (id == Vocabulary::kPad || id == Vocabulary::kBos) continue;
          if (lp(id) > v_all) {
            v_all = lp(id);
            best_all = id;
          }
        }
        for (int id : allowed) {
          if (lp(id) > v_masked) {
            v_masked = lp(id);
            best_masked = id;
          }
        }
        ++stats->positions;
        if (best_all >= 0 && best_masked >= 0 &&
            class_bucket(classes, best_all) == class_bucket(classes, best_masked)) {
          ++stats->class_matches;
        }
      }

      for (int id : allowed) {
        cands.push_back(Cand{h, id, live[h].logprob + lp(id), lp(id)});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.id < b.id;
    });

    std::vector<Hyp> next;
    next.reserve(opts.beam);
    for (const Cand& c : cands) {
      if (c.id == Vocabulary::kEos) {
        // A finish never occupies a live slot, and every finish stays in the
        // pool — dropping low-ranked ones would break the equivalence with
        // greedy search at width one (the finish can still win after length
        // normalization).
        Hyp h = live[c.hyp];
        h.logprob = c.logprob;
        done.push_back(finish(h, /*with_eos=*/true));
        continue;
      }
      if (next.size() < opts.beam) {
        next.push_back(extend(classes, live[c.hyp], c.id, c.step_lp));
      }
    }
    live = std::move(next);
  }
  for (const Hyp& h : live) done.push_back(finish(h, /*with_eos=*/false));

  if (done.empty()) throw data_error("beam search produced no hypothesis");
  const DecodeResult* best = &done[0];
  for (const DecodeResult& r : done) {
    if (r.score > best->score ||
        (r.score == best->score && r.logprob > best->logprob)) {
      best = &r;
    }
  }
  return *best;
}

std::vector<BatchDecodeItem> batch_translate(Model& model,
                                             const std::vector<std::vector<int>>& srcs,
                                             const std::vector<DecodeConstraint>& constraints,
                                             const DecodeOptions& opts, std::size_t threads,
                                             DecodeStats* stats) {
  if (!constraints.empty() && constraints.size() != srcs.size()) {
    throw std::invalid_argument("one constraint per sentence (or none at all)");
  }
  SymbolClasses classes = SymbolClasses::build(model.tgt_vocab(), model.config().tl_tags);
  std::vector<BatchDecodeItem> out(srcs.size());
  std::vector<DecodeStats> per_sentence(srcs.size());
  std::vector<std::string> errors(srcs.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    static const DecodeConstraint kFree;
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const DecodeConstraint& c = constraints.empty() ? kFree : constraints[i];
        ModelScorer scorer(model, srcs[i]);
        DecodeStats* st = stats ? &per_sentence[i] : nullptr;
        out[i].result = beam_search(scorer, classes, c, srcs[i].size(), opts, st);
        out[i].tokens = model.tgt_vocab().decode(out[i].result.ids);
      } catch (const std::exception& e) {
        errors[i] = "sentence " + std::to_string(i) + ": " + e.what();
      }
    }
  };

  std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, srcs.size()));
  if (n_threads <= 1) {
    work(0, srcs.size());
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (srcs.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      std::size_t begin = t * chunk;
      std::size_t end = std::min(srcs.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }

  for (const std::string& err : errors) {
    if (!err.empty()) throw data_error(err);
  }
  if (stats) {
    for (const DecodeStats& st : per_sentence) {
      stats->positions += st.positions;
      stats->class_matches += st.class_matches;
    }
  }
  return out;
}

}  // namespace ilmt
