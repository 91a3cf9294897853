#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annotate.hpp"

namespace ilmt {

// Word-error categories in the Hjerson tradition, merged across sides:
// an equal-lemma substitution is one inflection error, a reordering pair is
// one error, a surviving unequal-lemma substitution is one lexical error.
struct ErrorCounts {
  std::size_t inflection = 0;
  std::size_t reordering = 0;
  std::size_t missing = 0;
  std::size_t extra = 0;
  std::size_t lexical_choice = 0;

  std::size_t grouped_lexical() const { return missing + extra + lexical_choice; }
  std::size_t total() const { return inflection + reordering + grouped_lexical(); }

  ErrorCounts& operator+=(const ErrorCounts& o);
};

// Hypothesis-side / reference-side word error counts (the tool this models
// reports the two sides separately; the merged ErrorCounts is our default).
struct SideCounts {
  std::size_t inflection = 0;
  std::size_t reordering = 0;
  std::size_t missing_or_extra = 0;  // missing on the ref side, extra on the hyp side
  std::size_t lexical_choice = 0;
};

struct ErrorBreakdown {
  ErrorCounts merged;
  SideCounts hyp;
  SideCounts ref;
  std::size_t edit_operations = 0;  // non-match moves of the chosen alignment
};

// Classifies word errors between a hypothesis and a reference, both with
// lemmas. Alignment: minimal-edit, deterministic tie-break preferring
// substitution over deletion (unmatched ref word) over insertion (unmatched
// hyp word), earliest positions first. Surface comparison is case-sensitive,
// lemma comparison case-insensitive. A token with an empty lemma is a data
// error.
ErrorBreakdown classify_errors_detailed(const std::vector<AnnotatedToken>& hyp,
                                        const std::vector<AnnotatedToken>& ref);
ErrorCounts classify_errors(const std::vector<AnnotatedToken>& hyp,
                            const std::vector<AnnotatedToken>& ref);

// Per-sentence classify_errors summed; corpora must have equal length.
ErrorCounts corpus_error_totals(const std::vector<std::vector<AnnotatedToken>>& hyp,
                                const std::vector<std::vector<AnnotatedToken>>& ref);

// (sys − base) / base per category; a zero base makes the category undefined
// (reported as such, never as infinity). Positive values mean the system made
// more errors than the baseline.
struct RelativeChange {
  std::optional<double> inflection;
  std::optional<double> reordering;
  std::optional<double> missing;
  std::optional<double> extra;
  std::optional<double> lexical_choice;
  std::optional<double> grouped_lexical;
  std::optional<double> total;
};
RelativeChange relative_change(const ErrorCounts& sys, const ErrorCounts& base);

// "category\tvalue" rows; undefined relative changes render as "undefined".
std::string error_report_tsv(const ErrorCounts& counts);
std::string relative_change_tsv(const RelativeChange& change);

// Most-frequent-lemma table for lemmatizing bare hypotheses before
// classification; ties go to the lexicographically smallest lemma, unknown
// forms fall back to their lowercased entry and then to themselves.
class LemmaTable {
 public:
  void learn(const AnnotatedSentence& sent);
  std::string lemma(const std::string& form) const;

 private:
  const std::string* best(const std::string& form) const;
  std::map<std::string, std::map<std::string, std::uint64_t>> counts_;
};

}  // namespace ilmt
