#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "graph.hpp"

using namespace ilmt;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

Tensor make_param(const std::string& name, const Mat& value) {
  Tensor t;
  t.name = name;
  t.init_shape(value.rows(), value.cols());
  t.value = value;
  return t;
}

// Reduces an arbitrary matrix node to a scalar with fixed mixing weights, so
// gradient errors cannot cancel across entries.
Tape::Id weighted_scalar(Tape& tape, Tape::Id y, const Mat& weights) {
  Tape::Id mixed = tape.hadamard(y, tape.constant(weights));
  Mat ones_row = Mat::Ones(1, weights.rows());
  Mat ones_col = Mat::Ones(weights.cols(), 1);
  return tape.matmul(tape.matmul(tape.constant(ones_row), mixed), tape.constant(ones_col));
}

using Builder = std::function<Tape::Id(Tape&)>;

// Max relative error between analytic gradients and central differences over
// every coordinate of every listed parameter.
double fd_error(std::vector<Tensor*> params, const Builder& build) {
  const double eps = 1e-6;
  for (Tensor* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  auto eval = [&] {
    Tape tape;
    return tape.value(build(tape))(0, 0);
  };
  double worst = 0.0;
  for (Tensor* p : params) {
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        double saved = p->value(r, c);
        p->value(r, c) = saved + eps;
        double up = eval();
        p->value(r, c) = saved - eps;
        double down = eval();
        p->value(r, c) = saved;
        double numeric = (up - down) / (2 * eps);
        double analytic = p->grad(r, c);
        double scale = std::max({1.0, std::abs(numeric), std::abs(analytic)});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("gradients of every op match central differences") {
  Rng rng(1234);
  Mat w34 = random_mat(rng, 3, 4), w43 = random_mat(rng, 4, 3);
  Mat w32 = random_mat(rng, 3, 2), w35 = random_mat(rng, 3, 5);
  Mat w14 = random_mat(rng, 1, 4), w44 = random_mat(rng, 4, 4);
  Mat w38 = random_mat(rng, 3, 8), w53 = random_mat(rng, 5, 3);

  Tensor a = make_param("a", random_mat(rng, 3, 4));
  Tensor b = make_param("b", random_mat(rng, 4, 2));
  Tensor c = make_param("c", random_mat(rng, 3, 4));
  Tensor row = make_param("row", random_mat(rng, 1, 4));

  SUBCASE("matmul") {
    CHECK(fd_error({&a, &b}, [&](Tape& t) {
            return weighted_scalar(t, t.matmul(t.param(a), t.param(b)), w32);
          }) < 1e-7);
  }
  SUBCASE("matmul_nt") {
    Tensor bt = make_param("bt", random_mat(rng, 2, 4));
    CHECK(fd_error({&a, &bt}, [&](Tape& t) {
            return weighted_scalar(t, t.matmul_nt(t.param(a), t.param(bt)), w32);
          }) < 1e-7);
  }
  SUBCASE("add and hadamard") {
    CHECK(fd_error({&a, &c}, [&](Tape& t) {
            return weighted_scalar(t, t.add(t.param(a), t.param(c)), w34);
          }) < 1e-7);
    CHECK(fd_error({&a, &c}, [&](Tape& t) {
            return weighted_scalar(t, t.hadamard(t.param(a), t.param(c)), w34);
          }) < 1e-7);
  }
  SUBCASE("add_rowvec broadcasts over rows") {
    CHECK(fd_error({&a, &row}, [&](Tape& t) {
            return weighted_scalar(t, t.add_rowvec(t.param(a), t.param(row)), w34);
          }) < 1e-7);
  }
  SUBCASE("scale, add_constant, one_minus") {
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.scale(t.param(a), -0.731), w34);
          }) < 1e-7);
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.add_constant(t.param(a), w34), w34);
          }) < 1e-7);
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.one_minus(t.param(a)), w34);
          }) < 1e-7);
  }
  SUBCASE("pointwise nonlinearities") {
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.tanh_of(t.param(a)), w34);
          }) < 1e-6);
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.sigmoid_of(t.param(a)), w34);
          }) < 1e-6);
    // Keep values away from the relu kink so differences stay one-sided.
    Tensor pos = make_param("pos", random_mat(rng, 3, 4, 0.2, 1.0));
    Tensor neg = make_param("neg", random_mat(rng, 3, 4, -1.0, -0.2));
    CHECK(fd_error({&pos, &neg}, [&](Tape& t) {
            return weighted_scalar(t, t.relu_of(t.add(t.param(pos), t.param(neg))), w34);
          }) < 1e-6);
  }
  SUBCASE("transpose") {
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.transpose_of(t.param(a)), w43);
          }) < 1e-7);
  }
  SUBCASE("softmax_rows") {
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.softmax_rows(t.param(a)), w34);
          }) < 1e-6);
  }
  SUBCASE("layer_norm_rows") {
    Tensor gain = make_param("gain", random_mat(rng, 1, 4, 0.5, 1.5));
    Tensor bias = make_param("bias", random_mat(rng, 1, 4));
    CHECK(fd_error({&a, &gain, &bias}, [&](Tape& t) {
            return weighted_scalar(
                t, t.layer_norm_rows(t.param(a), t.param(gain), t.param(bias)), w34);
          }) < 1e-6);
  }
  SUBCASE("gather_rows accumulates over repeated indices") {
    Tensor table = make_param("table", random_mat(rng, 5, 3));
    std::vector<int> idx = {0, 2, 2, 4};
    CHECK(fd_error({&table}, [&](Tape& t) {
            return weighted_scalar(t, t.gather_rows(t.param(table), idx), w43);
          }) < 1e-7);
    Tape t;
    CHECK_THROWS_AS(t.gather_rows(t.param(table), {5}), data_error);
    CHECK_THROWS_AS(t.gather_rows(t.param(table), {-1}), data_error);
  }
  SUBCASE("concat, slices, vstack") {
    CHECK(fd_error({&a, &c}, [&](Tape& t) {
            return weighted_scalar(t, t.concat_cols(t.param(a), t.param(c)), w38);
          }) < 1e-7);
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.slice_cols(t.param(a), 1, 2), w32);
          }) < 1e-7);
    CHECK(fd_error({&a}, [&](Tape& t) {
            return weighted_scalar(t, t.slice_rows(t.param(a), 1, 2),
                                   w34.topRows(2));
          }) < 1e-7);
    CHECK(fd_error({&a}, [&](Tape& t) {
            Tape::Id x = t.param(a);
            std::vector<Tape::Id> rows = {t.slice_rows(x, 2, 1), t.slice_rows(x, 0, 1),
                                          t.slice_rows(x, 2, 1)};
            return weighted_scalar(t, t.vstack(rows), w34.topRows(3));
          }) < 1e-7);
  }
  SUBCASE("smoothed cross entropy") {
    Tensor logits = make_param("logits", random_mat(rng, 3, 5));
    std::vector<int> gold = {1, 0, 4};
    CHECK(fd_error({&logits}, [&](Tape& t) {
            return t.smoothed_ce_sum(t.param(logits), gold, 0.1);
          }) < 1e-6);
    CHECK(fd_error({&logits}, [&](Tape& t) {
            return t.smoothed_ce_sum(t.param(logits), gold, 0.0);
          }) < 1e-6);
  }
  SUBCASE("a composite recurrent-style expression") {
    Tensor wx = make_param("wx", random_mat(rng, 4, 4));
    Tensor wh = make_param("wh", random_mat(rng, 4, 4));
    Tensor x0 = make_param("x0", random_mat(rng, 1, 4));
    CHECK(fd_error({&wx, &wh, &x0}, [&](Tape& t) {
            Tape::Id h = t.tanh_of(t.matmul(t.param(x0), t.param(wx)));
            for (int step = 0; step < 3; ++step) {
              Tape::Id z = t.sigmoid_of(t.matmul(h, t.param(wh)));
              h = t.add(t.hadamard(z, h),
                        t.hadamard(t.one_minus(z), t.tanh_of(t.matmul(h, t.param(wx)))));
            }
            return weighted_scalar(t, h, w14);
          }) < 1e-6);
  }
}

TEST_CASE("smoothed cross entropy closed forms") {
  // Uniform distribution: loss per row is exactly log V for any epsilon.
  Tape tape;
  Tensor logits = make_param("logits", Mat::Zero(3, 7));
  Tape::Id loss = tape.smoothed_ce_sum(tape.param(logits), {0, 3, 6}, 0.1);
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(3.0 * std::log(7.0)).epsilon(1e-12));

  // Epsilon 0 equals the plain negative log-likelihood.
  Rng rng(5);
  Tensor raw = make_param("raw", random_mat(rng, 2, 4));
  Tape t2;
  Tape::Id nll = t2.smoothed_ce_sum(t2.param(raw), {2, 1}, 0.0);
  Mat lp = log_softmax_rows_value(raw.value);
  CHECK(t2.value(nll)(0, 0) == doctest::Approx(-lp(0, 2) - lp(1, 1)).epsilon(1e-12));

  CHECK_THROWS_AS(t2.smoothed_ce_sum(t2.param(raw), {0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(t2.smoothed_ce_sum(t2.param(raw), {0, 9}, 0.0), data_error);
}

TEST_CASE("softmax helpers normalize and stay finite under large logits") {
  Mat logits(2, 3);
  logits << 1000.0, 999.0, 998.0, -5.0, 0.0, 5.0;
  Mat p = softmax_rows_value(logits);
  for (int r = 0; r < 2; ++r) {
    CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 0; c < 3; ++c) CHECK(std::isfinite(p(r, c)));
  }
  Mat lp = log_softmax_rows_value(logits);
  CHECK(lp(0, 0) == doctest::Approx(std::log(p(0, 0))).epsilon(1e-9));
}

TEST_CASE("dropout") {
  Rng rng(99);
  Tensor x = make_param("x", Mat::Ones(50, 40));

  SUBCASE("rate zero is the identity") {
    Tape tape;
    Tape::Id in = tape.param(x);
    CHECK(tape.dropout(in, 0.0, rng) == in);
  }

  SUBCASE("inverted scaling keeps the expectation") {
    Tape tape;
    Tape::Id out = tape.dropout(tape.param(x), 0.3, rng);
    const Mat& v = tape.value(out);
    double zeros = 0.0, sum = 0.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        if (v(r, c) == 0.0) {
          ++zeros;
        } else {
          CHECK(v(r, c) == doctest::Approx(1.0 / 0.7));
        }
        sum += v(r, c);
      }
    }
    double n = static_cast<double>(v.size());
    CHECK(zeros / n == doctest::Approx(0.3).epsilon(0.15));
    CHECK(sum / n == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("gradients accumulate across tapes into shared tensors") {
  Rng rng(7);
  Tensor a = make_param("a", random_mat(rng, 2, 2));
  Mat w = random_mat(rng, 2, 2);
  auto run = [&] {
    Tape tape;
    tape.backward(weighted_scalar(tape, tape.tanh_of(tape.param(a)), w));
  };
  a.zero_grad();
  run();
  Mat once = a.grad;
  run();
  CHECK((a.grad - 2.0 * once).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tape tape;
  Tensor a = make_param("a", Mat::Ones(2, 3));
  CHECK_THROWS_AS(tape.backward(tape.param(a)), std::invalid_argument);
}
