#include "bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace ilmt {

namespace {

constexpr const char* kMergeFileHeader = "#version: interleave-mt 1";

std::string pair_key(const std::string& a, const std::string& b) {
  std::string k = a;
  k += '\t';
  k += b;
  return k;
}

// Replaces every non-overlapping occurrence of (left,right), left to right.
void merge_in_place(std::vector<std::string>& syms, const std::string& left,
                    const std::string& right) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < syms.size();) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      syms[out++] = left + right;
      i += 2;
    } else {
      if (out != i) syms[out] = std::move(syms[i]);  // guard the self-move
      ++out;
      ++i;
    }
  }
  syms.resize(out);
}

}  // namespace

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << kMergeFileHeader << '\n';
  for (const auto& [left, right] : merges) out << left << ' ' << right << '\n';
  if (!out) throw io_error("error writing " + path);
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  BpeModel model;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kMergeFileHeader) {
        throw data_error(path + ":1: bad merge file header '" + line + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> parts = split_ws(line);
    if (parts.size() != 2) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected 'left right', got '" + line + "'");
    }
    model.merges.emplace_back(std::move(parts[0]), std::move(parts[1]));
  }
  return model;
}

BpeModel bpe_learn(const std::vector<Tokens>& corpus, std::size_t num_merges,
                   const TagPredicate& is_tag) {
  // Collapse the corpus to distinct words with frequencies; tags excluded.
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const Tokens& sent : corpus) {
    for (const std::string& tok : sent) {
      if (is_tag && is_tag(tok)) continue;
      ++freq[tok];
    }
  }
  struct Word {
    std::vector<std::string> syms;
    std::uint64_t count;
  };
  std::vector<Word> words;
  words.reserve(freq.size());
  {
    // Deterministic iteration order regardless of hash layout.
    std::map<std::string, std::uint64_t> ordered(freq.begin(), freq.end());
    for (auto& [w, c] : ordered) words.push_back({utf8_chars(w), c});
  }

  BpeModel model;
  model.merges.reserve(num_merges);
  for (std::size_t step = 0; step < num_merges; ++step) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
    for (const Word& w : words) {
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        counts[{w.syms[i], w.syms[i + 1]}] += w.count;
      }
    }
    // Most frequent pair; the map already orders ties lexicographically.
    const std::pair<std::string, std::string>* best = nullptr;
    std::uint64_t best_count = 0;
    for (const auto& [pair, count] : counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (!best || best_count < 2) break;  // no pair repeats
    model.merges.push_back(*best);
    for (Word& w : words) merge_in_place(w.syms, best->first, best->second);
  }
  return model;
}

BpeApplier::BpeApplier(const BpeModel& model) : model_(model) {
  for (std::size_t i = 0; i < model.merges.size(); ++i) {
    rank_.emplace(pair_key(model.merges[i].first, model.merges[i].second), i);
  }
}

const Tokens& BpeApplier::word(const std::string& w) {
  auto hit = cache_.find(w);
  if (hit != cache_.end()) return hit->second;

  std::vector<std::string> syms = utf8_chars(w);
  while (syms.size() > 1) {
    // Earliest-learned applicable merge wins, as in learning order.
    std::size_t best_rank = rank_.size();
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = rank_.find(pair_key(syms[i], syms[i + 1]));
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == rank_.size()) break;
    merge_in_place(syms, model_.merges[best_rank].first, model_.merges[best_rank].second);
  }
  Tokens pieces;
  pieces.reserve(syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (i + 1 < syms.size()) syms[i] += model_.marker;
    pieces.push_back(std::move(syms[i]));
  }
  return cache_.emplace(w, std::move(pieces)).first->second;
}

Tokens BpeApplier::stream(const Tokens& toks, const TagPredicate& is_tag) {
  Tokens out;
  out.reserve(toks.size());
  for (const std::string& tok : toks) {
    if (is_tag && is_tag(tok)) {
      out.push_back(tok);
      continue;
    }
    const Tokens& pieces = word(tok);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

Tokens bpe_apply(const Tokens& stream, const BpeModel& model, const TagPredicate& is_tag) {
  BpeApplier applier(model);
  return applier.stream(stream, is_tag);
}

Tokens bpe_undo(const Tokens& stream, std::size_t* dangling) {
  Tokens out;
  const std::string marker = "@@";
  std::string pending;
  bool open = false;
  for (const std::string& tok : stream) {
    if (tok.size() >= marker.size() &&
        tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0) {
      pending += tok.substr(0, tok.size() - marker.size());
      open = true;
    } else {
      pending += tok;
      out.push_back(std::move(pending));
      pending.clear();
      open = false;
    }
  }
  if (open) {
    if (dangling) ++*dangling;
    out.push_back(std::move(pending));
  }
  return out;
}

}  // namespace ilmt
