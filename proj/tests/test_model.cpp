#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "model.hpp"

using namespace ilmt;

namespace {

Vocabulary toy_vocab(const std::vector<std::string>& words) {
  std::vector<Tokens> corpus;
  for (const std::string& w : words) corpus.push_back(Tokens{w});
  return Vocabulary::build(corpus);
}

ModelConfig tiny_recurrent() {
  ModelConfig cfg;
  cfg.family = "recurrent";
  cfg.hidden = 12;
  cfg.embedding = 8;
  cfg.dropout = 0.0;
  return cfg;
}

ModelConfig tiny_transformer() {
  ModelConfig cfg;
  cfg.family = "transformer";
  cfg.model_dim = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  return cfg;
}

double max_param_diff(const Model& a, const Model& b) {
  REQUIRE(a.params().size() == b.params().size());
  double worst = 0.0;
  auto it_a = a.params().begin();
  auto it_b = b.params().begin();
  for (; it_a != a.params().end(); ++it_a, ++it_b) {
    REQUIRE(it_a->name == it_b->name);
    REQUIRE(it_a->value.rows() == it_b->value.rows());
    REQUIRE(it_a->value.cols() == it_b->value.cols());
    worst = std::max(worst, (it_a->value - it_b->value).cwiseAbs().maxCoeff());
  }
  return worst;
}

// Teacher-forced NLL recomputed one prefix at a time through the inference
// path; the two code paths must agree for beam search to score correctly.
double stepwise_nll(Model& model, const std::vector<int>& src, const std::vector<int>& tgt) {
  EncodedSource enc = model.encode(src);
  std::vector<int> gold = tgt;
  gold.push_back(Vocabulary::kEos);
  std::vector<int> prefix;
  double nll = 0.0;
  for (int g : gold) {
    Eigen::RowVectorXd lp = model.next_logprobs(enc, prefix);
    nll -= lp(g);
    prefix.push_back(g);
  }
  return nll;
}

}  // namespace

TEST_CASE("model config validation and round trip") {
  ModelConfig cfg = tiny_recurrent();
  cfg.validate();

  SUBCASE("kv round trip preserves every field") {
    cfg.tied_embeddings = false;
    cfg.tl_tags = true;
    cfg.dropout = 0.25;
    cfg.label_smoothing = 0.05;
    ModelConfig back = ModelConfig::from_kv(cfg.to_kv());
    CHECK(back.family == cfg.family);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.embedding == cfg.embedding);
    CHECK(back.model_dim == cfg.model_dim);
    CHECK(back.layers == cfg.layers);
    CHECK(back.heads == cfg.heads);
    CHECK(back.tied_embeddings == cfg.tied_embeddings);
    CHECK(back.tl_tags == cfg.tl_tags);
    CHECK(back.dropout == doctest::Approx(cfg.dropout));
    CHECK(back.label_smoothing == doctest::Approx(cfg.label_smoothing));
  }

  SUBCASE("bad family rejected") {
    cfg.family = "convolutional";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("non-positive dims rejected") {
    cfg.hidden = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("transformer head divisibility") {
    ModelConfig t = tiny_transformer();
    t.model_dim = 10;
    t.heads = 4;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }

  SUBCASE("paper scale recognizes the grid sizes") {
    ModelConfig r = tiny_recurrent();
    CHECK_FALSE(r.paper_scale());
    r.hidden = 1024;
    r.embedding = 512;
    CHECK(r.paper_scale());
    r.hidden = 512;
    r.embedding = 256;
    CHECK(r.paper_scale());

    ModelConfig t = tiny_transformer();
    CHECK_FALSE(t.paper_scale());
    t.model_dim = 512;
    t.layers = 6;
    t.heads = 8;
    CHECK(t.paper_scale());
    t.model_dim = 128;
    t.layers = 2;
    t.heads = 2;
    CHECK(t.paper_scale());
  }
}

TEST_CASE("construction is deterministic in the seed") {
  Vocabulary sv = toy_vocab({"a", "b", "c"});
  Vocabulary tv = toy_vocab({"x", "y", "z"});
  for (const ModelConfig& cfg : {tiny_recurrent(), tiny_transformer()}) {
    CAPTURE(cfg.family);
    Model m1(cfg, sv, tv, 42);
    Model m2(cfg, sv, tv, 42);
    Model m3(cfg, sv, tv, 43);
    CHECK(max_param_diff(m1, m2) == 0.0);
    bool differs = false;
    auto it1 = m1.params().begin();
    auto it3 = m3.params().begin();
    for (; it1 != m1.params().end(); ++it1, ++it3) {
      if (it1->value.size() && (it1->value - it3->value).cwiseAbs().maxCoeff() > 0) {
        differs = true;
      }
    }
    CHECK(differs);
  }
}

TEST_CASE("tied embeddings reuse the target embedding as output projection") {
  Vocabulary sv = toy_vocab({"a", "b"});
  Vocabulary tv = toy_vocab({"x", "y"});

  ModelConfig tied = tiny_recurrent();
  Model m_tied(tied, sv, tv, 1);
  CHECK(m_tied.find_param("out_proj") == nullptr);
  CHECK(m_tied.find_param("tgt_emb") != nullptr);

  ModelConfig untied = tiny_recurrent();
  untied.tied_embeddings = false;
  Model m_untied(untied, sv, tv, 1);
  CHECK(m_untied.find_param("out_proj") != nullptr);
  CHECK(m_untied.params().size() == m_tied.params().size() + 1);

  // With tying, perturbing the embedding must move the output distribution
  // even for a prefix that never looks the perturbed row up.
  std::vector<int> src = sv.encode({"a"});
  EncodedSource enc = m_tied.encode(src);
  Eigen::RowVectorXd before = m_tied.next_logprobs(enc, {});
  Tensor* emb = m_tied.find_param("tgt_emb");
  emb->value(Vocabulary::kUnk, 0) += 0.5;  // row for a symbol not in the prefix
  Eigen::RowVectorXd after = m_tied.next_logprobs(m_tied.encode(src), {});
  CHECK((before - after).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("encoder output shapes") {
  Vocabulary sv = toy_vocab({"a", "b", "c"});
  Vocabulary tv = toy_vocab({"x", "y"});
  std::vector<int> src = sv.encode({"a", "b", "c"});

  ModelConfig r = tiny_recurrent();
  Model mr(r, sv, tv, 3);
  EncodedSource er = mr.encode(src);
  CHECK(er.src_len == 3);
  CHECK(er.memory.rows() == 3);
  CHECK(er.memory.cols() == 2 * r.hidden);
  CHECK(er.s0.rows() == 1);
  CHECK(er.s0.cols() == r.hidden);

  ModelConfig t = tiny_transformer();
  Model mt(t, sv, tv, 3);
  EncodedSource et = mt.encode(src);
  CHECK(et.memory.rows() == 3);
  CHECK(et.memory.cols() == t.model_dim);
}

TEST_CASE("next_logprobs rows are normalized distributions") {
  Vocabulary sv = toy_vocab({"a", "b", "c"});
  Vocabulary tv = toy_vocab({"x", "y", "z"});
  for (const ModelConfig& cfg : {tiny_recurrent(), tiny_transformer()}) {
    CAPTURE(cfg.family);
    Model m(cfg, sv, tv, 11);
    EncodedSource enc = m.encode(sv.encode({"b", "a"}));
    for (const std::vector<int>& prefix :
         {std::vector<int>{}, tv.encode({"x"}), tv.encode({"y", "z", "x"})}) {
      Eigen::RowVectorXd lp = m.next_logprobs(enc, prefix);
      REQUIRE(lp.size() == static_cast<Eigen::Index>(tv.size()));
      double mass = 0.0;
      for (Eigen::Index i = 0; i < lp.size(); ++i) mass += std::exp(lp(i));
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("training path and inference path score sentences identically") {
  Vocabulary sv = toy_vocab({"a", "b", "c", "d"});
  Vocabulary tv = toy_vocab({"x", "y", "z"});
  std::vector<int> src = sv.encode({"c", "a", "d"});
  std::vector<int> tgt = tv.encode({"y", "x", "x", "z"});
  for (const ModelConfig& cfg : {tiny_recurrent(), tiny_transformer()}) {
    CAPTURE(cfg.family);
    Model m(cfg, sv, tv, 21);
    double forced = m.sentence_nll(src, tgt);
    double stepped = stepwise_nll(m, src, tgt);
    CHECK(forced == doctest::Approx(stepped).epsilon(1e-9));
  }
}

TEST_CASE("gradient accumulation is order-independent across tapes") {
  Vocabulary sv = toy_vocab({"a", "b", "c"});
  Vocabulary tv = toy_vocab({"x", "y"});
  std::vector<int> src_a = sv.encode({"a", "b"});
  std::vector<int> tgt_a = tv.encode({"x", "y"});
  std::vector<int> src_b = sv.encode({"c"});
  std::vector<int> tgt_b = tv.encode({"y"});

  for (const ModelConfig& cfg : {tiny_recurrent(), tiny_transformer()}) {
    CAPTURE(cfg.family);
    Model m(cfg, sv, tv, 5);
    auto accumulate = [&](bool a_first) {
      m.zero_grads();
      auto run = [&](const std::vector<int>& s, const std::vector<int>& t) {
        Tape tape;
        tape.backward(m.sentence_loss_sum(tape, s, t, nullptr));
      };
      if (a_first) {
        run(src_a, tgt_a);
        run(src_b, tgt_b);
      } else {
        run(src_b, tgt_b);
        run(src_a, tgt_a);
      }
      std::vector<Mat> grads;
      for (const Tensor& p : m.params()) grads.push_back(p.grad);
      return grads;
    };
    std::vector<Mat> ab = accumulate(true);
    std::vector<Mat> ba = accumulate(false);
    double worst = 0.0;
    for (std::size_t i = 0; i < ab.size(); ++i) {
      if (ab[i].size()) worst = std::max(worst, (ab[i] - ba[i]).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("loss rejects empty sequences and out-of-range ids") {
  Vocabulary sv = toy_vocab({"a"});
  Vocabulary tv = toy_vocab({"x"});
  Model m(tiny_recurrent(), sv, tv, 1);
  Tape tape;
  CHECK_THROWS_AS(m.sentence_loss_sum(tape, {}, {4}, nullptr), data_error);
  CHECK_THROWS_AS(m.sentence_loss_sum(tape, {4}, {}, nullptr), data_error);
  CHECK_THROWS_AS(m.sentence_nll({999}, {4}), data_error);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Vocabulary sv = toy_vocab({"alpha", "beta", "gamma"});
  Vocabulary tv = toy_vocab({"eins", "zwei"});
  for (ModelConfig cfg : {tiny_recurrent(), tiny_transformer()}) {
    CAPTURE(cfg.family);
    cfg.tl_tags = true;
    Model m(cfg, sv, tv, 99);
    std::string path = "model_roundtrip_" + cfg.family + ".bin";
    m.save(path, 777, {{"note", "round trip"}});
    Model::Loaded loaded = Model::load(path);
    std::remove(path.c_str());

    CHECK(loaded.step == 777);
    CHECK(loaded.config.at("note") == "round trip");
    CHECK(loaded.model->config().family == cfg.family);
    CHECK(loaded.model->config().tl_tags);
    CHECK(loaded.model->src_vocab().symbols() == sv.symbols());
    CHECK(loaded.model->tgt_vocab().symbols() == tv.symbols());
    CHECK(max_param_diff(m, *loaded.model) == 0.0);

    // Behavioral equality, not just parameter equality.
    std::vector<int> src = sv.encode({"beta", "alpha"});
    std::vector<int> tgt = tv.encode({"zwei"});
    CHECK(m.sentence_nll(src, tgt) == loaded.model->sentence_nll(src, tgt));
  }
}

TEST_CASE("checkpoint loader rejects junk") {
  std::string path = "model_badmagic.bin";
  write_file(path, "NOPE not a checkpoint");
  CHECK_THROWS_AS(Model::load(path), data_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(Model::load("does_not_exist.bin"), io_error);
}
