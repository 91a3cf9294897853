#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <map>

#include "annotate.hpp"
#include "synth.hpp"

using namespace ilmt;

TEST_CASE("synth_corpus is deterministic") {
  auto a = synth_corpus(1, 50);
  auto b = synth_corpus(1, 50);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(surface(a[i].src) == surface(b[i].src));
    CHECK(surface(a[i].tgt) == surface(b[i].tgt));
  }
  auto c = synth_corpus(2, 50);
  bool differ = false;
  for (std::size_t i = 0; i < a.size() && !differ; ++i) {
    differ = surface(a[i].src) != surface(c[i].src);
  }
  CHECK(differ);
  CHECK_THROWS_AS(synth_corpus(1, 0), std::invalid_argument);
}

TEST_CASE("every annotation renders and parses as a tag") {
  auto corpus = synth_corpus(5, 200);
  for (const auto& p : corpus) {
    for (const AnnotatedSentence* side : {&p.src, &p.tgt}) {
      REQUIRE_FALSE(side->tokens.empty());
      for (const AnnotatedToken& t : side->tokens) {
        CHECK_FALSE(t.form.empty());
        CHECK_FALSE(t.lemma.empty());
        CHECK(is_universal_pos(t.upos));
        for (TagKind k : {TagKind::Dum, TagKind::Pos, TagKind::Msd}) {
          CHECK(parse_tag(render_tag(t, k)).has_value());
        }
      }
    }
  }
}

TEST_CASE("target forms invert to lemma and features") {
  auto corpus = synth_corpus(9, 300);
  for (const auto& p : corpus) {
    for (const AnnotatedToken& t : p.tgt.tokens) {
      TargetAnalysis inv = invert_target_form(t.form, t.upos);
      CHECK(inv.lemma == t.lemma);
      std::string feats;
      for (std::size_t i = 0; i < t.feats.size(); ++i) {
        if (i) feats += '|';
        feats += t.feats[i].attr + "=" + t.feats[i].value;
      }
      CHECK(inv.feats == feats);
    }
  }
  CHECK_THROWS_AS(invert_target_form("x", "NOUN"), data_error);
}

TEST_CASE("translation is a function of the source") {
  auto corpus = synth_corpus(13, 2000);
  std::map<std::string, std::string> seen;
  for (const auto& p : corpus) {
    std::string key = join(surface(p.src));
    std::string val = join(surface(p.tgt));
    auto [it, inserted] = seen.emplace(key, val);
    if (!inserted) CHECK(it->second == val);
  }
}

TEST_CASE("the corpus exercises the annotation space") {
  auto corpus = synth_corpus(1, 2000);
  bool saw_empty_feats = false, saw_plural = false, saw_past = false, saw_pron = false;
  std::map<std::string, std::size_t> tgt_freq;
  for (const auto& p : corpus) {
    for (const AnnotatedToken& t : p.src.tokens) {
      if (t.feats.empty() && t.upos == "ADV") saw_empty_feats = true;
      if (t.upos == "PRON") saw_pron = true;
    }
    for (const AnnotatedToken& t : p.tgt.tokens) {
      ++tgt_freq[t.form];
      for (const Feature& f : t.feats) {
        if (f.attr == "Number" && f.value == "Plur") saw_plural = true;
        if (f.attr == "Tense" && f.value == "Past") saw_past = true;
      }
    }
  }
  CHECK(saw_empty_feats);
  CHECK(saw_plural);
  CHECK(saw_past);
  CHECK(saw_pron);
  // The Zipf lexicon must populate the rare tail so the frequency-bucketed
  // accuracy reports have material to work with.
  std::size_t rare = 0;
  for (const auto& [form, count] : tgt_freq) {
    if (count <= 10) ++rare;
  }
  CHECK(rare >= 10);
}

TEST_CASE("generated CoNLL-U parses back") {
  auto corpus = synth_corpus(21, 40);
  std::vector<AnnotatedSentence> sides;
  for (const auto& p : corpus) sides.push_back(p.tgt);
  std::string path = "synth_roundtrip.conllu";
  write_conllu(sides, path);
  auto parsed = parse_conllu_file(path);
  std::remove(path.c_str());
  REQUIRE(parsed.size() == sides.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    REQUIRE(parsed[i].tokens.size() == sides[i].tokens.size());
    for (std::size_t j = 0; j < parsed[i].tokens.size(); ++j) {
      CHECK(parsed[i].tokens[j].form == sides[i].tokens[j].form);
      CHECK(parsed[i].tokens[j].lemma == sides[i].tokens[j].lemma);
      CHECK(parsed[i].tokens[j].upos == sides[i].tokens[j].upos);
      CHECK(parsed[i].tokens[j].feats == sides[i].tokens[j].feats);
    }
  }
}
