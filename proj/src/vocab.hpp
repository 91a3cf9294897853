#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"
#include "textproc.hpp"

namespace ilmt {

// Symbol table with fixed reserved entries. Ordering of the open part is
// frequency-descending, ties lexicographic, so construction is deterministic.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr const char* kPadSym = "<pad>";
  static constexpr const char* kBosSym = "<s>";
  static constexpr const char* kEosSym = "</s>";
  static constexpr const char* kUnkSym = "<unk>";

  Vocabulary();  // reserved entries only

  static Vocabulary build(const std::vector<Tokens>& corpus);

  int lookup(const std::string& sym) const;        // kUnk when absent
  const std::string& symbol(int index) const;      // throws on bad index
  std::size_t size() const { return symbols_.size(); }

  std::vector<int> encode(const Tokens& toks) const;         // no bos/eos
  Tokens decode(const std::vector<int>& ids) const;          // skips reserved

  const std::vector<std::string>& symbols() const { return symbols_; }

  // Round-trips through streams for the checkpoint container.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

 private:
  void add(const std::string& sym);
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace ilmt
