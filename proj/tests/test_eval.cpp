#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eval.hpp"

using namespace ilmt;

namespace {

std::vector<Tokens> sentences(std::initializer_list<const char*> lines) {
  std::vector<Tokens> out;
  for (const char* line : lines) out.push_back(split_ws(line));
  return out;
}

}  // namespace

// The numeric fixtures below were hand-computed from clipped n-gram counts
// before the scorer was written, and are frozen here.
TEST_CASE("corpus BLEU against hand-computed fixtures") {
  SUBCASE("identity scores exactly 100") {
    std::vector<Tokens> text = sentences({"the cat sat on the mat", "it has happened before ."});
    BleuReport rep = bleu(text, text);
    CHECK(rep.score == 100.0);
    CHECK(rep.brevity_penalty == 1.0);
    for (double p : rep.precisions) CHECK(p == 1.0);
  }

  SUBCASE("one substituted word") {
    // hyp: the cat sat on the mat   ref: the cat sat on a mat
    // p1 = 5/6, p2 = 3/5, p3 = 2/4, p4 = 1/3, BP = 1
    // score = 100 * (5/6 * 3/5 * 1/2 * 1/3)^(1/4) = 53.7284965912
    BleuReport rep = bleu(sentences({"the cat sat on the mat"}),
                          sentences({"the cat sat on a mat"}));
    CHECK(rep.precisions[0] == doctest::Approx(5.0 / 6.0));
    CHECK(rep.precisions[1] == doctest::Approx(3.0 / 5.0));
    CHECK(rep.precisions[2] == doctest::Approx(0.5));
    CHECK(rep.precisions[3] == doctest::Approx(1.0 / 3.0));
    CHECK(rep.brevity_penalty == 1.0);
    CHECK(std::abs(rep.score - 53.7284965912) < 1e-4);
  }

  SUBCASE("a short hypothesis pays the brevity penalty") {
    // All precisions are 1; BP = exp(1 - 5/4); score = 100 * e^(-1/4).
    BleuReport rep = bleu(sentences({"it has happened before"}),
                          sentences({"it has happened before ."}));
    CHECK(rep.brevity_penalty == doctest::Approx(std::exp(-0.25)));
    CHECK(std::abs(rep.score - 77.8800783071) < 1e-4);
    CHECK(rep.hyp_tokens == 4);
    CHECK(rep.ref_tokens == 5);
  }

  SUBCASE("a zero n-gram precision zeroes the score") {
    // No 4-gram of "the the the cat" appears in the reference.
    BleuReport rep = bleu(sentences({"the the the cat"}),
                          sentences({"the cat sat down"}));
    CHECK(rep.score == 0.0);
    CHECK(rep.precisions[3] == 0.0);
    CHECK(rep.precisions[0] == doctest::Approx(0.5));  // the (clipped to 1) + cat
  }

  SUBCASE("all-empty hypotheses score zero") {
    std::vector<Tokens> hyps(3);
    std::vector<Tokens> refs = sentences({"a b", "c d e", "f"});
    BleuReport rep = bleu(hyps, refs);
    CHECK(rep.score == 0.0);
    CHECK(rep.brevity_penalty == 0.0);
  }

  SUBCASE("clipping counts each reference n-gram at most its own frequency") {
    // "the the" contributes two "the" unigrams but the reference has one.
    BleuReport rep = bleu(sentences({"the the"}), sentences({"the cat"}));
    CHECK(rep.precisions[0] == doctest::Approx(0.5));
  }

  SUBCASE("sentence order does not matter") {
    std::vector<Tokens> hyps = sentences({"a b c d e", "x y z w", "p q r s t u"});
    std::vector<Tokens> refs = sentences({"a b c e d", "x y w z", "p q r s u t"});
    double forward = bleu(hyps, refs).score;
    std::vector<Tokens> hyps_r(hyps.rbegin(), hyps.rend());
    std::vector<Tokens> refs_r(refs.rbegin(), refs.rend());
    CHECK(bleu(hyps_r, refs_r).score == doctest::Approx(forward).epsilon(1e-12));
  }

  SUBCASE("mismatched corpus sizes are rejected") {
    CHECK_THROWS_AS(bleu(sentences({"a"}), sentences({"a", "b"})), std::invalid_argument);
  }
}

TEST_CASE("paired bootstrap significance") {
  std::vector<Tokens> refs = sentences({
      "the small cat sat quietly on the old mat",
      "a dog barked at the moon all night long",
      "children played football in the park yesterday afternoon",
      "the train arrived exactly seven minutes late today",
      "she wrote three letters to her distant friend",
      "rain fell steadily over the quiet grey town",
  });

  SUBCASE("identical systems tie every resample and are never significant") {
    BootstrapResult res = paired_bootstrap(refs, refs, refs, 1000, 0.05, 42);
    CHECK(res.iterations == 1000);
    CHECK(res.ties == 1000);
    CHECK(res.wins_a == 0);
    CHECK(res.wins_b == 0);
    CHECK_FALSE(res.a_significantly_better);
  }

  SUBCASE("a strictly dominant system is significant under every seed") {
    // A reproduces the references; B damages every sentence, so every
    // resampled corpus scores A above B.
    std::vector<Tokens> damaged = refs;
    for (Tokens& s : damaged) s[s.size() / 2] = "BLORT";
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      CAPTURE(seed);
      BootstrapResult res = paired_bootstrap(refs, damaged, refs, 1000, 0.05, seed);
      CHECK(res.wins_a == 1000);
      CHECK(res.a_significantly_better);
      // and the comparison is antisymmetric
      BootstrapResult rev = paired_bootstrap(damaged, refs, refs, 1000, 0.05, seed);
      CHECK(rev.wins_b == 1000);
      CHECK_FALSE(rev.a_significantly_better);
    }
  }

  SUBCASE("duplicating the corpus keeps a dominant system significant") {
    std::vector<Tokens> damaged = refs;
    for (Tokens& s : damaged) s[0] = "BLORT";
    std::vector<Tokens> refs2 = refs, a2 = refs, b2 = damaged;
    refs2.insert(refs2.end(), refs.begin(), refs.end());
    a2.insert(a2.end(), refs.begin(), refs.end());
    b2.insert(b2.end(), damaged.begin(), damaged.end());
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      CHECK(paired_bootstrap(a2, b2, refs2, 1000, 0.05, seed).a_significantly_better);
    }
  }

  SUBCASE("mixed systems: counts partition the iterations and depend on the data") {
    // A is better on half the sentences, B on the other half.
    std::vector<Tokens> a = refs, b = refs;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      Tokens& worse = (i % 2 == 0) ? a[i] : b[i];
      worse[1] = "WRONG";
      worse[3] = "ALSO";
    }
    BootstrapResult res = paired_bootstrap(a, b, refs, 500, 0.05, 7);
    CHECK(res.wins_a + res.wins_b + res.ties == 500);
    CHECK(res.wins_a > 0);
    CHECK(res.wins_b > 0);
    CHECK_FALSE(res.a_significantly_better);

    BootstrapResult same = paired_bootstrap(a, b, refs, 500, 0.05, 7);
    CHECK(same.wins_a == res.wins_a);
    CHECK(same.wins_b == res.wins_b);
    CHECK(same.ties == res.ties);
    BootstrapResult other = paired_bootstrap(a, b, refs, 500, 0.05, 8);
    bool differs = other.wins_a != res.wins_a || other.ties != res.ties;
    CHECK(differs);
  }

  SUBCASE("argument errors") {
    CHECK_THROWS_AS(paired_bootstrap(refs, refs, sentences({"a"}), 10, 0.05, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(paired_bootstrap({}, {}, {}, 10, 0.05, 1), std::invalid_argument);
  }
}

TEST_CASE("prediction accuracy over interleaved streams") {
  // Streams alternate tag word tag word ...; forcing guarantees alignment.
  std::vector<Tokens> ref = {
      split_ws("NOUN_Case=Nom katu VERB_Tense=Past miza"),
      split_ws("PRON__ zu NOUN_Case=Acc pael"),
  };

  SUBCASE("identity is perfect for every target") {
    for (AccuracyTarget t :
         {AccuracyTarget::Tags, AccuracyTarget::SurfaceForms, AccuracyTarget::PosOfMsd}) {
      AccuracyReport rep = prediction_accuracy(ref, ref, t);
      CHECK(rep.overall == 1.0);
      CHECK(rep.positions == 4);
      CHECK(rep.correct == 4);
    }
  }

  SUBCASE("tag and word positions are measured separately") {
    std::vector<Tokens> dec = ref;
    dec[0][0] = "NOUN_Case=Acc";  // wrong tag, right POS
    dec[0][3] = "mizu";           // wrong word
    AccuracyReport tags = prediction_accuracy(dec, ref, AccuracyTarget::Tags);
    CHECK(tags.positions == 4);
    CHECK(tags.correct == 3);
    CHECK(tags.overall == doctest::Approx(0.75));

    AccuracyReport words = prediction_accuracy(dec, ref, AccuracyTarget::SurfaceForms);
    CHECK(words.positions == 4);
    CHECK(words.correct == 3);

    // POS-of-MSD compares only the part before the first underscore.
    AccuracyReport pos = prediction_accuracy(dec, ref, AccuracyTarget::PosOfMsd);
    CHECK(pos.positions == 4);
    CHECK(pos.correct == 4);
  }

  SUBCASE("misalignment is a data error, size mismatch an argument error") {
    std::vector<Tokens> dec = ref;
    dec[1].pop_back();
    CHECK_THROWS_AS(prediction_accuracy(dec, ref, AccuracyTarget::Tags), data_error);
    dec = ref;
    dec.pop_back();
    CHECK_THROWS_AS(prediction_accuracy(dec, ref, AccuracyTarget::Tags),
                    std::invalid_argument);
  }
}

TEST_CASE("frequency buckets follow the reference word") {
  std::map<std::string, std::uint64_t> freq = {
      {"katu", 10},   // boundary: still infrequent
      {"miza", 11},   // just above the boundary: in neither bucket
      {"zu", 3},      // infrequent
  };                  // "pael" absent: OOV

  std::vector<Tokens> ref = {
      split_ws("NOUN_Case=Nom katu VERB_Tense=Past miza"),
      split_ws("PRON__ zu NOUN_Case=Acc pael"),
  };
  std::vector<Tokens> dec = ref;
  dec[0][1] = "WRONG";  // the infrequent word "katu" mispredicted
  dec[1][2] = "DET__";  // the tag before the OOV word "pael" mispredicted

  SUBCASE("word positions bucket by their own reference word") {
    AccuracyReport rep = bucket_accuracy(dec, ref, AccuracyTarget::SurfaceForms, freq);
    CHECK(rep.positions == 4);
    CHECK(rep.correct == 3);
    CHECK(rep.infrequent_positions == 2);  // katu (wrong), zu (right)
    CHECK(rep.infrequent.has_value());
    CHECK(*rep.infrequent == doctest::Approx(0.5));
    CHECK(rep.oov_positions == 1);  // pael, predicted correctly
    CHECK(*rep.oov == 1.0);
  }

  SUBCASE("tag positions bucket by the word they precede") {
    AccuracyReport rep = bucket_accuracy(dec, ref, AccuracyTarget::Tags, freq);
    CHECK(rep.positions == 4);
    CHECK(rep.correct == 3);  // the tag before "pael" is wrong
    CHECK(rep.infrequent_positions == 2);
    CHECK(*rep.infrequent == 1.0);  // both tags before infrequent words correct
    CHECK(rep.oov_positions == 1);
    CHECK(*rep.oov == 0.0);  // the tag before the OOV word is the wrong one
  }

  SUBCASE("empty buckets are reported absent, not zero") {
    std::map<std::string, std::uint64_t> all_frequent = {
        {"katu", 100}, {"miza", 100}, {"zu", 100}, {"pael", 100}};
    AccuracyReport rep = bucket_accuracy(ref, ref, AccuracyTarget::SurfaceForms, all_frequent);
    CHECK_FALSE(rep.infrequent.has_value());
    CHECK_FALSE(rep.oov.has_value());
    CHECK(rep.infrequent_positions == 0);
    CHECK(rep.oov_positions == 0);
  }
}
