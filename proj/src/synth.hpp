#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "annotate.hpp"

namespace ilmt {

// One parallel sentence with word-level annotations on both sides.
struct SynthPair {
  AnnotatedSentence src;
  AnnotatedSentence tgt;
};

// Deterministic toy language pair. The source is an SVO language with
// articles, plural "-s" and past "-ed"; the target is an article-less SOV
// language whose words are lemma + number/tense suffix (+ case suffix for
// nominals). The target side is a pure function of the source structure, so
// a model can in principle translate it perfectly.
std::vector<SynthPair> synth_corpus(std::uint64_t seed, std::size_t n);

Tokens surface(const AnnotatedSentence& sent);

// Recovers (lemma, feature string) from a generated target form given its
// UPOS — the generator's own inverse; used as a self-check oracle.
struct TargetAnalysis {
  std::string lemma;
  std::string feats;  // rendered "A=v|B=w" form, "" for the empty set
};
TargetAnalysis invert_target_form(const std::string& form, const std::string& upos);

// CoNLL-U emission for generated annotations (10 columns, "_" fillers).
void write_conllu(const std::vector<AnnotatedSentence>& sents, const std::string& path);

}  // namespace ilmt
