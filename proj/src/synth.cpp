#include "synth.hpp"

#include <array>
#include <fstream>

namespace ilmt {

namespace {

// Source lemma tables (SVO language, regular "-s" plural, "-ed" past).
constexpr std::array<const char*, 48> kSrcNouns = {
    "dog",    "cat",    "bird",   "wolf",   "bear",   "horse",  "cow",    "sheep",
    "goat",   "pig",    "fish",   "frog",   "mouse",  "rat",    "owl",    "fox",
    "duck",   "hen",    "crow",   "deer",   "snake",  "spider", "ant",    "bee",
    "child",  "king",   "queen",  "farmer", "baker",  "hunter", "doctor", "teacher",
    "sailor", "girl",   "boy",    "friend", "house",  "tree",   "river",  "stone",
    "bread",  "apple",  "book",   "door",   "table",  "chair",  "garden", "road"};
constexpr std::array<const char*, 10> kSrcVerbsTr = {
    "chase", "see", "find", "follow", "watch", "help", "call", "carry", "push", "pull"};
constexpr std::array<const char*, 6> kSrcVerbsIn = {"sleep", "run",  "jump",
                                                    "swim",  "wait", "fall"};
constexpr std::array<const char*, 10> kSrcAdjs = {"big",   "small", "old",   "young", "red",
                                                  "black", "white", "green", "happy", "sad"};
constexpr std::array<const char*, 6> kSrcAdvs = {"quickly", "slowly", "quietly",
                                                 "often",   "never",  "today"};
constexpr std::array<const char*, 4> kSrcProns = {"he", "she", "it", "they"};

// Target lemma tables (SOV language, suffixing morphology), index-aligned
// with the source tables.
constexpr std::array<const char*, 48> kTgtNouns = {
    "rek",  "tam",  "pil",  "nor",  "vask", "dur",  "mek",  "lof",  "sar",  "bin",
    "tek",  "mur",  "fil",  "kan",  "rop",  "sel",  "dak",  "vor",  "mit",  "lan",
    "pok",  "ser",  "tif",  "nok",  "bur",  "kel",  "dom",  "fan",  "rit",  "mok",
    "sul",  "tenk", "vik",  "lum",  "pes",  "nat",  "kor",  "zem",  "fid",  "lok",
    "hes",  "gul",  "mard", "pyn",  "silv", "trok", "nim",  "felk"};
constexpr std::array<const char*, 10> kTgtVerbsTr = {"gor", "vis", "tol", "ker", "nus",
                                                     "pal", "dro", "hem", "juk", "bas"};
constexpr std::array<const char*, 6> kTgtVerbsIn = {"lir", "fon", "zet", "rud", "mab", "sim"};
constexpr std::array<const char*, 10> kTgtAdjs = {"bel", "kur", "mot", "san", "tel",
                                                  "vur", "gof", "nid", "raz", "pem"};
constexpr std::array<const char*, 6> kTgtAdvs = {"nuk", "tir", "vel", "som", "pren", "dal"};
constexpr std::array<const char*, 4> kTgtProns = {"en", "el", "ot", "ul"};

// Target suffixes: number + case on nominals, tense on verbs, number
// agreement on adjectives.
const char* number_suffix(bool plural) { return plural ? "in" : "an"; }
const char* case_suffix(bool accusative) { return accusative ? "ma" : "ko"; }
const char* tense_suffix(bool past) { return past ? "ur" : "ar"; }

std::vector<Feature> feats_from(std::initializer_list<Feature> fs) {
  return std::vector<Feature>(fs);  // callers list attributes alphabetically
}

AnnotatedToken make_tok(std::string form, std::string lemma, std::string upos,
                        std::vector<Feature> feats) {
  AnnotatedToken t;
  t.form = std::move(form);
  t.lemma = std::move(lemma);
  t.upos = std::move(upos);
  t.feats = std::move(feats);
  return t;
}

// Power-law index sampler: weight(i) ∝ 1/(i+1)^1.1, so tail lemmas are rare
// enough to populate the low-frequency and out-of-vocabulary buckets.
class ZipfPicker {
 public:
  explicit ZipfPicker(std::size_t n) : cum_(n) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += 1.0 / std::pow(static_cast<double>(i + 1), 1.1);
      cum_[i] = total;
    }
    for (double& c : cum_) c /= total;
  }
  std::size_t pick(Rng& rng) const {
    double u = rng.uniform();
    for (std::size_t i = 0; i < cum_.size(); ++i) {
      if (u < cum_[i]) return i;
    }
    return cum_.size() - 1;
  }

 private:
  std::vector<double> cum_;
};

struct NounPhrase {
  int det = 0;          // 0 none, 1 "the", 2 "a"
  int adj = -1;         // adjective index or -1
  std::size_t noun = 0; // noun index
  bool plural = false;
};

struct SentencePlan {
  bool has_object = false;  // transitive?
  bool subj_pron = false;
  std::size_t pron = 0;
  NounPhrase subj;
  NounPhrase obj;
  std::size_t verb = 0;  // index into the transitive or intransitive table
  bool past = false;
  int adv = -1;
};

void emit_src_np(const SentencePlan& plan, const NounPhrase& np, bool is_pron,
                 std::size_t pron, AnnotatedSentence& out) {
  if (is_pron) {
    const char* form = kSrcProns[pron];
    std::vector<Feature> feats;
    if (pron == 3) {
      feats = feats_from({{"Number", "Plur"}, {"Person", "3"}, {"PronType", "Prs"}});
    } else {
      const char* gender = pron == 0 ? "Masc" : pron == 1 ? "Fem" : "Neut";
      feats = feats_from(
          {{"Gender", gender}, {"Number", "Sing"}, {"Person", "3"}, {"PronType", "Prs"}});
    }
    out.tokens.push_back(make_tok(form, form, "PRON", std::move(feats)));
    return;
  }
  if (np.det == 1) {
    out.tokens.push_back(make_tok(
        "the", "the", "DET", feats_from({{"Definite", "Def"}, {"PronType", "Art"}})));
  } else if (np.det == 2) {
    out.tokens.push_back(make_tok(
        "a", "a", "DET", feats_from({{"Definite", "Ind"}, {"PronType", "Art"}})));
  }
  if (np.adj >= 0) {
    const char* adj = kSrcAdjs[static_cast<std::size_t>(np.adj)];
    out.tokens.push_back(make_tok(adj, adj, "ADJ", feats_from({{"Degree", "Pos"}})));
  }
  std::string lemma = kSrcNouns[np.noun];
  std::string form = np.plural ? lemma + "s" : lemma;
  out.tokens.push_back(make_tok(
      std::move(form), std::move(lemma), "NOUN",
      feats_from({{"Number", np.plural ? "Plur" : "Sing"}})));
  (void)plan;
}

void emit_tgt_np(const NounPhrase& np, bool is_pron, std::size_t pron, bool accusative,
                 AnnotatedSentence& out) {
  const char* num = number_suffix(is_pron ? pron == 3 : np.plural);
  const char* cas = case_suffix(accusative);
  if (is_pron) {
    std::string lemma = kTgtProns[pron];
    out.tokens.push_back(make_tok(
        lemma + num + cas, lemma, "PRON",
        feats_from({{"Case", accusative ? "Acc" : "Nom"},
                    {"Number", pron == 3 ? "Plur" : "Sing"},
                    {"Person", "3"},
                    {"PronType", "Prs"}})));
    return;
  }
  if (np.adj >= 0) {
    std::string lemma = kTgtAdjs[static_cast<std::size_t>(np.adj)];
    out.tokens.push_back(make_tok(
        lemma + num, lemma, "ADJ",
        feats_from({{"Degree", "Pos"}, {"Number", np.plural ? "Plur" : "Sing"}})));
  }
  std::string lemma = kTgtNouns[np.noun];
  out.tokens.push_back(make_tok(
      lemma + num + cas, lemma, "NOUN",
      feats_from({{"Case", accusative ? "Acc" : "Nom"},
                  {"Number", np.plural ? "Plur" : "Sing"}})));
}

SynthPair realize(const SentencePlan& plan) {
  SynthPair pair;

  // Source: Subj V (Obj) (Adv) .
  emit_src_np(plan, plan.subj, plan.subj_pron, plan.pron, pair.src);
  {
    std::string lemma =
        plan.has_object ? kSrcVerbsTr[plan.verb] : kSrcVerbsIn[plan.verb];
    std::string form = plan.past ? lemma + "ed" : lemma;
    pair.src.tokens.push_back(make_tok(
        std::move(form), std::move(lemma), "VERB",
        feats_from({{"Mood", "Ind"},
                    {"Tense", plan.past ? "Past" : "Pres"},
                    {"VerbForm", "Fin"}})));
  }
  if (plan.has_object) emit_src_np(plan, plan.obj, false, 0, pair.src);
  if (plan.adv >= 0) {
    const char* adv = kSrcAdvs[static_cast<std::size_t>(plan.adv)];
    pair.src.tokens.push_back(make_tok(adv, adv, "ADV", {}));
  }
  pair.src.tokens.push_back(make_tok(".", ".", "PUNCT", {}));

  // Target: Subj (Obj) (Adv) V . — articles dropped, suffixes added.
  emit_tgt_np(plan.subj, plan.subj_pron, plan.pron, /*accusative=*/false, pair.tgt);
  if (plan.has_object) emit_tgt_np(plan.obj, false, 0, /*accusative=*/true, pair.tgt);
  if (plan.adv >= 0) {
    const char* adv = kTgtAdvs[static_cast<std::size_t>(plan.adv)];
    pair.tgt.tokens.push_back(make_tok(adv, adv, "ADV", {}));
  }
  {
    std::string lemma =
        plan.has_object ? kTgtVerbsTr[plan.verb] : kTgtVerbsIn[plan.verb];
    pair.tgt.tokens.push_back(make_tok(
        lemma + tense_suffix(plan.past), lemma, "VERB",
        feats_from({{"Mood", "Ind"},
                    {"Tense", plan.past ? "Past" : "Pres"},
                    {"VerbForm", "Fin"}})));
  }
  pair.tgt.tokens.push_back(make_tok(".", ".", "PUNCT", {}));
  return pair;
}

}  // namespace

std::vector<SynthPair> synth_corpus(std::uint64_t seed, std::size_t n) {
  if (n < 1) throw std::invalid_argument("synth_corpus: n must be >= 1");
  Rng rng(mix_seed(seed, /*stream=*/0x5e17));
  static const ZipfPicker noun_picker(kSrcNouns.size());
  static const ZipfPicker verb_tr_picker(kSrcVerbsTr.size());
  static const ZipfPicker verb_in_picker(kSrcVerbsIn.size());
  static const ZipfPicker adj_picker(kSrcAdjs.size());
  static const ZipfPicker adv_picker(kSrcAdvs.size());

  auto draw_np = [&](bool allow_indefinite) {
    NounPhrase np;
    np.plural = rng.uniform() < 0.35;
    double d = rng.uniform();
    if (np.plural || !allow_indefinite) {
      np.det = d < 0.6 ? 1 : 0;
    } else {
      np.det = d < 0.55 ? 1 : d < 0.9 ? 2 : 0;
    }
    if (rng.uniform() < 0.3) np.adj = static_cast<int>(adj_picker.pick(rng));
    np.noun = noun_picker.pick(rng);
    return np;
  };

  std::vector<SynthPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SentencePlan plan;
    plan.has_object = rng.uniform() < 0.6;
    plan.subj_pron = rng.uniform() < 0.2;
    if (plan.subj_pron) {
      plan.pron = rng.below(kSrcProns.size());
    } else {
      plan.subj = draw_np(/*allow_indefinite=*/true);
    }
    plan.verb = plan.has_object ? verb_tr_picker.pick(rng) : verb_in_picker.pick(rng);
    plan.past = rng.uniform() < 0.4;
    if (plan.has_object) plan.obj = draw_np(/*allow_indefinite=*/true);
    if (rng.uniform() < 0.2) plan.adv = static_cast<int>(adv_picker.pick(rng));
    out.push_back(realize(plan));
  }
  return out;
}

Tokens surface(const AnnotatedSentence& sent) {
  Tokens out;
  out.reserve(sent.tokens.size());
  for (const AnnotatedToken& tok : sent.tokens) out.push_back(tok.form);
  return out;
}

TargetAnalysis invert_target_form(const std::string& form, const std::string& upos) {
  auto bad = [&] {
    throw data_error("cannot segment target form '" + form + "' as " + upos);
  };
  auto split_number = [&](const std::string& tail) -> const char* {
    if (tail == "an") return "Sing";
    if (tail == "in") return "Plur";
    bad();
    return nullptr;
  };
  TargetAnalysis out;
  if (upos == "NOUN" || upos == "PRON") {
    if (form.size() < 5) bad();
    std::string cas = form.substr(form.size() - 2);
    const char* case_name = cas == "ko" ? "Nom" : cas == "ma" ? "Acc" : nullptr;
    if (!case_name) bad();
    const char* number = split_number(form.substr(form.size() - 4, 2));
    out.lemma = form.substr(0, form.size() - 4);
    out.feats = std::string("Case=") + case_name + "|Number=" + number;
    if (upos == "PRON") out.feats += "|Person=3|PronType=Prs";
  } else if (upos == "ADJ") {
    if (form.size() < 3) bad();
    const char* number = split_number(form.substr(form.size() - 2));
    out.lemma = form.substr(0, form.size() - 2);
    out.feats = std::string("Degree=Pos|Number=") + number;
  } else if (upos == "VERB") {
    if (form.size() < 3) bad();
    std::string tail = form.substr(form.size() - 2);
    const char* tense = tail == "ar" ? "Pres" : tail == "ur" ? "Past" : nullptr;
    if (!tense) bad();
    out.lemma = form.substr(0, form.size() - 2);
    out.feats = std::string("Mood=Ind|Tense=") + tense + "|VerbForm=Fin";
  } else if (upos == "ADV" || upos == "PUNCT") {
    out.lemma = form;
    out.feats = "";
  } else {
    bad();
  }
  return out;
}

void write_conllu(const std::vector<AnnotatedSentence>& sents, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  for (const AnnotatedSentence& sent : sents) {
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      const AnnotatedToken& tok = sent.tokens[i];
      out << (i + 1) << '\t' << tok.form << '\t' << tok.lemma << '\t' << tok.upos << "\t_\t";
      if (tok.feats.empty()) {
        out << '_';
      } else {
        for (std::size_t f = 0; f < tok.feats.size(); ++f) {
          if (f) out << '|';
          out << tok.feats[f].attr << '=' << tok.feats[f].value;
        }
      }
      out << "\t_\t_\t_\t_\n";
    }
    out << '\n';
  }
  if (!out) throw io_error("error writing " + path);
}

}  // namespace ilmt
