#include "vocab.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

namespace ilmt {

Vocabulary::Vocabulary() {
  add(kPadSym);
  add(kBosSym);
  add(kEosSym);
  add(kUnkSym);
}

void Vocabulary::add(const std::string& sym) {
  index_.emplace(sym, static_cast<int>(symbols_.size()));
  symbols_.push_back(sym);
}

Vocabulary Vocabulary::build(const std::vector<Tokens>& corpus) {
  std::map<std::string, std::uint64_t> freq;
  for (const Tokens& sent : corpus) {
    for (const std::string& tok : sent) ++freq[tok];
  }
  if (freq.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::uint64_t>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [sym, count] : entries) {
    (void)count;
    if (!v.index_.contains(sym)) v.add(sym);
  }
  return v;
}

int Vocabulary::lookup(const std::string& sym) const {
  auto it = index_.find(sym);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::symbol(int index) const {
  if (index < 0 || index >= static_cast<int>(symbols_.size())) {
    throw std::invalid_argument("symbol index " + std::to_string(index) + " out of range");
  }
  return symbols_[static_cast<std::size_t>(index)];
}

std::vector<int> Vocabulary::encode(const Tokens& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const std::string& t : toks) out.push_back(lookup(t));
  return out;
}

Tokens Vocabulary::decode(const std::vector<int>& ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    out.push_back(symbol(id));
  }
  return out;
}

void Vocabulary::write(std::ostream& out) const {
  out << symbols_.size() << '\n';
  for (const std::string& s : symbols_) out << s << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::size_t n = 0;
  in >> n;
  in.ignore();  // the newline after the count
  Vocabulary v;
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw data_error("truncated vocabulary block");
    if (i < 4) {
      if (line != v.symbols_[i]) throw data_error("corrupt vocabulary: reserved entry mismatch");
      continue;
    }
    v.add(line);
  }
  return v;
}

}  // namespace ilmt
