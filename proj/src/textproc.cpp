#include "textproc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ilmt {

namespace {

bool is_punct_byte(unsigned char c) {
  return std::ispunct(c) != 0;
}

// A chunk is "wordlike" when it contains at least one non-punctuation,
// non-space byte (letters, digits, or any multi-byte UTF-8 content).
bool is_all_punct(std::string_view s) {
  for (unsigned char c : s) {
    if (c >= 0x80 || !is_punct_byte(c)) return false;
  }
  return !s.empty();
}

}  // namespace

Tokens tokenize(std::string_view line) {
  Tokens out;
  for (const std::string& chunk : split_ws(line)) {
    std::string_view body = chunk;
    std::vector<std::string> leading;
    // Detach leading punctuation bytes one at a time.
    while (!body.empty() && static_cast<unsigned char>(body.front()) < 0x80 &&
           is_punct_byte(static_cast<unsigned char>(body.front())) && !is_all_punct(body)) {
      leading.emplace_back(1, body.front());
      body.remove_prefix(1);
    }
    std::vector<std::string> trailing;
    while (!body.empty() && static_cast<unsigned char>(body.back()) < 0x80 &&
           is_punct_byte(static_cast<unsigned char>(body.back())) && !is_all_punct(body)) {
      trailing.emplace_back(1, body.back());
      body.remove_suffix(1);
    }
    for (auto& t : leading) out.push_back(std::move(t));
    if (!body.empty()) out.emplace_back(body);
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.push_back(std::move(*it));
  }
  return out;
}

void TruecaseModel::learn(const Tokens& sentence) {
  // Sentence-initial tokens are skipped: their casing is dictated by position,
  // not by the word itself.
  for (std::size_t i = 1; i < sentence.size(); ++i) {
    const std::string& form = sentence[i];
    const std::string key = to_lower_ascii(form);
    auto& per_casing = counts_[key];
    const std::uint64_t c = ++per_casing[form];
    auto& entry = best_[key];
    if (c > entry.count) {
      entry.count = c;
      entry.casing = form;
    }
  }
}

Tokens TruecaseModel::apply(const Tokens& sentence) const {
  if (sentence.empty()) return sentence;
  Tokens out = sentence;
  const auto it = best_.find(to_lower_ascii(out[0]));
  if (it != best_.end()) out[0] = it->second.casing;
  return out;
}

void TruecaseModel::save(const std::string& path) const {
  std::vector<std::string> keys;
  keys.reserve(best_.size());
  for (const auto& [key, entry] : best_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  for (const auto& key : keys) {
    const Entry& e = best_.at(key);
    out << key << '\t' << e.casing << '\t' << e.count << '\n';
  }
}

TruecaseModel TruecaseModel::load(const std::string& path) {
  TruecaseModel model;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split_char(line, '\t');
    if (cols.size() != 3) {
      throw data_error(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    Entry e;
    e.casing = cols[1];
    e.count = std::stoull(cols[2]);
    if (e.count == 0 || to_lower_ascii(e.casing) != cols[0]) {
      throw data_error(path + ":" + std::to_string(lineno) + ": invalid truecase entry");
    }
    model.best_[cols[0]] = e;
    model.counts_[cols[0]][e.casing] = e.count;
  }
  return model;
}

std::vector<SentencePair> filter_pairs(const std::vector<SentencePair>& pairs,
                                       std::size_t max_len) {
  std::vector<SentencePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const std::size_t s = p.src.size(), t = p.tgt.size();
    if (s >= 1 && s <= max_len && t >= 1 && t <= max_len) out.push_back(p);
  }
  return out;
}

std::vector<SentencePair> downsample(const std::vector<SentencePair>& pairs, std::size_t n,
                                     std::uint64_t seed) {
  if (n > pairs.size()) {
    throw std::invalid_argument("downsample: n=" + std::to_string(n) + " exceeds corpus size " +
                                std::to_string(pairs.size()));
  }
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots are a uniform sample.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<SentencePair> out;
  out.reserve(n);
  for (std::size_t i : idx) out.push_back(pairs[i]);
  return out;
}

}  // namespace ilmt
