#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <set>

#include "textproc.hpp"

using namespace ilmt;

TEST_CASE("tokenize detaches edge punctuation") {
  CHECK(tokenize("It has happened before.") ==
        Tokens{"It", "has", "happened", "before", "."});
  CHECK(tokenize("") == Tokens{});
  CHECK(tokenize("word,") == Tokens{"word", ","});
  CHECK(tokenize("\"quoted\"") == Tokens{"\"", "quoted", "\""});
  CHECK(tokenize("(a)") == Tokens{"(", "a", ")"});
  // All-punctuation chunks stay whole.
  CHECK(tokenize("...") == Tokens{"..."});
  CHECK(tokenize("a ... b") == Tokens{"a", "...", "b"});
  // Interior punctuation is not touched.
  CHECK(tokenize("don't stop") == Tokens{"don't", "stop"});
}

TEST_CASE("tokenize is idempotent") {
  const char* lines[] = {
      "It has happened before.",
      "word, (and) more!!",
      "  spaced\tout  ",
      "naïve café — ok.",
      "...",
  };
  for (const char* line : lines) {
    Tokens once = tokenize(line);
    Tokens twice = tokenize(join(once));
    CHECK(twice == once);
  }
}

TEST_CASE("truecase re-cases only the first token") {
  TruecaseModel model;
  model.learn({"He", "said", "it", "would", "work"});
  model.learn({"Maybe", "it", "is", "Berlin"});

  CHECK(model.apply({"It", "has"}) == Tokens{"it", "has"});
  CHECK(model.apply({"Unknown", "word"}) == Tokens{"Unknown", "word"});
  // Non-initial positions never change, even for known words.
  CHECK(model.apply({"it", "it", "It"}) == Tokens{"it", "it", "It"});
  CHECK(model.apply({}) == Tokens{});
}

TEST_CASE("truecase prefers the most frequent casing") {
  TruecaseModel model;
  model.learn({"x", "Berlin"});
  model.learn({"x", "Berlin"});
  model.learn({"x", "BERLIN"});
  CHECK(model.apply({"berlin"}) == Tokens{"Berlin"});
}

TEST_CASE("truecase model round-trips through disk") {
  TruecaseModel model;
  model.learn({"x", "Berlin", "said", "It"});
  model.learn({"y", "Berlin"});
  std::string path = "truecase_roundtrip.tsv";
  model.save(path);
  TruecaseModel loaded = TruecaseModel::load(path);
  std::remove(path.c_str());
  CHECK(loaded.size() == model.size());
  CHECK(loaded.apply({"berlin", "it"}) == model.apply({"berlin", "it"}));
  CHECK(loaded.apply({"it"}) == Tokens{"It"});
}

namespace {
SentencePair make_pair(std::size_t src_len, std::size_t tgt_len, std::size_t id) {
  SentencePair p;
  p.src.assign(src_len, "s");
  p.tgt.assign(tgt_len, "t");
  p.id = id;
  return p;
}
}  // namespace

TEST_CASE("filter_pairs keeps both sides within [1, max_len]") {
  std::vector<SentencePair> pairs = {
      make_pair(100, 100, 0),  // boundary: kept
      make_pair(101, 5, 1),    // src too long
      make_pair(5, 101, 2),    // tgt too long
      make_pair(0, 5, 3),      // empty src
      make_pair(5, 0, 4),      // empty tgt
      make_pair(1, 1, 5),
  };
  auto kept = filter_pairs(pairs, 100);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == 0);
  CHECK(kept[1].id == 5);
  // Idempotent.
  auto again = filter_pairs(kept, 100);
  CHECK(again.size() == kept.size());
}

TEST_CASE("downsample is a deterministic uniform sample") {
  std::vector<SentencePair> pairs;
  for (std::size_t i = 0; i < 1000; ++i) pairs.push_back(make_pair(3, 3, i));

  SUBCASE("full sample returns everything") {
    auto all = downsample(pairs, pairs.size(), 42);
    REQUIRE(all.size() == pairs.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i].id == i);
  }

  SUBCASE("fixed seed reproduces; ids distinct and ordered") {
    auto a = downsample(pairs, 50, 1);
    auto b = downsample(pairs, 50, 1);
    REQUIRE(a.size() == 50);
    std::set<std::size_t> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      ids.insert(a[i].id);
      if (i) CHECK(a[i - 1].id < a[i].id);  // original order preserved
    }
    CHECK(ids.size() == 50);
  }

  SUBCASE("different seeds give different subsets") {
    auto a = downsample(pairs, 50, 1);
    auto b = downsample(pairs, 50, 2);
    bool differ = false;
    for (std::size_t i = 0; i < a.size() && !differ; ++i) differ = a[i].id != b[i].id;
    CHECK(differ);
  }

  SUBCASE("oversampling is a usage error") {
    CHECK_THROWS_AS(downsample(pairs, pairs.size() + 1, 1), std::invalid_argument);
  }
}
