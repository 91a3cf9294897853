#include "errcat.hpp"

#include <algorithm>
#include <sstream>

#include "common.hpp"

namespace ilmt {

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  inflection += o.inflection;
  reordering += o.reordering;
  missing += o.missing;
  extra += o.extra;
  lexical_choice += o.lexical_choice;
  return *this;
}

namespace {

enum class Move : unsigned char { Diagonal, DeleteRef, InsertHyp };

struct AlignedOp {
  Move move;
  std::size_t hyp_pos = 0;  // valid for Diagonal and InsertHyp
  std::size_t ref_pos = 0;  // valid for Diagonal and DeleteRef
};

void require_lemmas(const std::vector<AnnotatedToken>& side, const char* name) {
  for (const AnnotatedToken& tok : side) {
    if (tok.lemma.empty()) {
      throw data_error(std::string(name) + " token '" + tok.form + "' carries no lemma");
    }
  }
}

// Minimal-edit alignment. The cost table is computed over suffixes so the
// forward walk from (0,0) can pick, earliest position first, the most
// preferred move that still completes minimally: diagonal, then consuming a
// reference word, then consuming a hypothesis word.
std::vector<AlignedOp> align(const std::vector<AnnotatedToken>& hyp,
                             const std::vector<AnnotatedToken>& ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][m] = static_cast<int>(n - i);
  for (std::size_t j = 0; j <= m; ++j) d[n][j] = static_cast<int>(m - j);
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      int diag = (hyp[i].form == ref[j].form ? 0 : 1) + d[i + 1][j + 1];
      int del = 1 + d[i][j + 1];
      int ins = 1 + d[i + 1][j];
      d[i][j] = std::min({diag, del, ins});
    }
  }
  std::vector<AlignedOp> ops;
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    if (i < n && j < m &&
        d[i][j] == (hyp[i].form == ref[j].form ? 0 : 1) + d[i + 1][j + 1]) {
      ops.push_back({Move::Diagonal, i, j});
      ++i, ++j;
    } else if (j < m && d[i][j] == 1 + d[i][j + 1]) {
      ops.push_back({Move::DeleteRef, 0, j});
      ++j;
    } else {
      ops.push_back({Move::InsertHyp, i, 0});
      ++i;
    }
  }
  return ops;
}

bool lemma_equal(const AnnotatedToken& a, const AnnotatedToken& b) {
  return to_lower_ascii(a.lemma) == to_lower_ascii(b.lemma);
}

// One erroneous word occurrence feeding the reordering pass.
struct Occurrence {
  std::size_t op_index;
  const std::string* form;
  bool consumed = false;
};

}  // namespace

ErrorBreakdown classify_errors_detailed(const std::vector<AnnotatedToken>& hyp,
                                        const std::vector<AnnotatedToken>& ref) {
  require_lemmas(hyp, "hypothesis");
  require_lemmas(ref, "reference");
  std::vector<AlignedOp> ops = align(hyp, ref);

  ErrorBreakdown out;
  // Op-level status after the inflection and reordering passes. For a
  // substitution the two sides are tracked separately because a reordering
  // pair may consume just one of them.
  std::vector<bool> is_sub(ops.size(), false);
  std::vector<bool> is_inflection(ops.size(), false);
  std::vector<Occurrence> hyp_pool, ref_pool;  // walk order = position order

  for (std::size_t k = 0; k < ops.size(); ++k) {
    const AlignedOp& op = ops[k];
    switch (op.move) {
      case Move::Diagonal: {
        const AnnotatedToken& h = hyp[op.hyp_pos];
        const AnnotatedToken& r = ref[op.ref_pos];
        if (h.form == r.form) break;  // matched, no error, not an edit
        ++out.edit_operations;
        is_sub[k] = true;
        if (lemma_equal(h, r)) {
          is_inflection[k] = true;
          ++out.merged.inflection;
          ++out.hyp.inflection;
          ++out.ref.inflection;
        } else {
          hyp_pool.push_back({k, &h.form});
          ref_pool.push_back({k, &r.form});
        }
        break;
      }
      case Move::DeleteRef:
        ++out.edit_operations;
        ref_pool.push_back({k, &ref[op.ref_pos].form});
        break;
      case Move::InsertHyp:
        ++out.edit_operations;
        hyp_pool.push_back({k, &hyp[op.hyp_pos].form});
        break;
    }
  }

  // Reordering: greedy left-to-right pairing of erroneous surface forms that
  // occur on both sides; one error per pair.
  for (Occurrence& h : hyp_pool) {
    for (Occurrence& r : ref_pool) {
      if (!r.consumed && *r.form == *h.form) {
        h.consumed = r.consumed = true;
        ++out.merged.reordering;
        ++out.hyp.reordering;
        ++out.ref.reordering;
        break;
      }
    }
  }

  // Survivors. A substitution whose sides both escaped pairing is one lexical
  // error; a lone surviving side still marks its substitution as lexical.
  std::vector<bool> sub_lexical(ops.size(), false);
  for (const Occurrence& h : hyp_pool) {
    if (h.consumed) continue;
    if (is_sub[h.op_index]) {
      sub_lexical[h.op_index] = true;
      ++out.hyp.lexical_choice;
    } else {
      ++out.merged.extra;
      ++out.hyp.missing_or_extra;
    }
  }
  for (const Occurrence& r : ref_pool) {
    if (r.consumed) continue;
    if (is_sub[r.op_index]) {
      sub_lexical[r.op_index] = true;
      ++out.ref.lexical_choice;
    } else {
      ++out.merged.missing;
      ++out.ref.missing_or_extra;
    }
  }
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (sub_lexical[k]) ++out.merged.lexical_choice;
  }
  return out;
}

ErrorCounts classify_errors(const std::vector<AnnotatedToken>& hyp,
                            const std::vector<AnnotatedToken>& ref) {
  return classify_errors_detailed(hyp, ref).merged;
}

ErrorCounts corpus_error_totals(const std::vector<std::vector<AnnotatedToken>>& hyp,
                                const std::vector<std::vector<AnnotatedToken>>& ref) {
  if (hyp.size() != ref.size()) {
    throw std::invalid_argument("error classification needs sentence-aligned corpora (" +
                                std::to_string(hyp.size()) + " vs " +
                                std::to_string(ref.size()) + ")");
  }
  ErrorCounts totals;
  for (std::size_t i = 0; i < hyp.size(); ++i) totals += classify_errors(hyp[i], ref[i]);
  return totals;
}

RelativeChange relative_change(const ErrorCounts& sys, const ErrorCounts& base) {
  auto rel = [](std::size_t s, std::size_t b) -> std::optional<double> {
    if (b == 0) return std::nullopt;
    return (static_cast<double>(s) - static_cast<double>(b)) / static_cast<double>(b);
  };
  RelativeChange out;
  out.inflection = rel(sys.inflection, base.inflection);
  out.reordering = rel(sys.reordering, base.reordering);
  out.missing = rel(sys.missing, base.missing);
  out.extra = rel(sys.extra, base.extra);
  out.lexical_choice = rel(sys.lexical_choice, base.lexical_choice);
  out.grouped_lexical = rel(sys.grouped_lexical(), base.grouped_lexical());
  out.total = rel(sys.total(), base.total());
  return out;
}

std::string error_report_tsv(const ErrorCounts& counts) {
  std::ostringstream os;
  os << "inflection\t" << counts.inflection << '\n'
     << "reordering\t" << counts.reordering << '\n'
     << "missing\t" << counts.missing << '\n'
     << "extra\t" << counts.extra << '\n'
     << "lexical_choice\t" << counts.lexical_choice << '\n'
     << "grouped_lexical\t" << counts.grouped_lexical() << '\n'
     << "total\t" << counts.total() << '\n';
  return os.str();
}

std::string relative_change_tsv(const RelativeChange& change) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  auto row = [&os](const char* name, const std::optional<double>& v) {
    os << name << '\t';
    if (v) {
      os << *v;
    } else {
      os << "undefined";
    }
    os << '\n';
  };
  row("inflection", change.inflection);
  row("reordering", change.reordering);
  row("missing", change.missing);
  row("extra", change.extra);
  row("lexical_choice", change.lexical_choice);
  row("grouped_lexical", change.grouped_lexical);
  row("total", change.total);
  return os.str();
}

void LemmaTable::learn(const AnnotatedSentence& sent) {
  for (const AnnotatedToken& tok : sent.tokens) {
    if (!tok.lemma.empty()) ++counts_[tok.form][tok.lemma];
  }
}

std::string LemmaTable::lemma(const std::string& form) const {
  if (const std::string* hit = best(form)) return *hit;
  if (const std::string* hit = best(to_lower_ascii(form))) return *hit;
  return form;
}

const std::string* LemmaTable::best(const std::string& form) const {
  auto it = counts_.find(form);
  if (it == counts_.end()) return nullptr;
  const std::string* win = nullptr;
  std::uint64_t win_count = 0;
  for (const auto& [lemma, count] : it->second) {
    if (count > win_count) {  // map order makes the first max the smallest
      win = &lemma;
      win_count = count;
    }
  }
  return win;
}

}  // namespace ilmt
