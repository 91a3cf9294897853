#include "graph.hpp"

#include <cmath>

namespace ilmt {

Mat softmax_rows_value(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Mat log_softmax_rows_value(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    double lse = std::log((logits.row(r).array() - mx).exp().sum()) + mx;
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Mat& Tape::grad_of(Id id) {
  Node& n = at(id);
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Tape::Id Tape::constant(Mat v) { return push(std::move(v)); }

Tape::Id Tape::param(Tensor& p) {
  Id id = push(p.value);
  at(id).owner = &p;
  return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
  Id out = push(value(a) * value(b));
  at(out).back = [this, a, b, out] {
    const Mat& g = at(out).grad;
    grad_of(a).noalias() += g * value(b).transpose();
    grad_of(b).noalias() += value(a).transpose() * g;
  };
  return out;
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
  Id out = push(value(a) * value(b).transpose());
  at(out).back = [this, a, b, out] {
    const Mat& g = at(out).grad;
    grad_of(a).noalias() += g * value(b);
    grad_of(b).noalias() += g.transpose() * value(a);
  };
  return out;
}

Tape::Id Tape::add(Id a, Id b) {
  Id out = push(value(a) + value(b));
  at(out).back = [this, a, b, out] {
    grad_of(a) += at(out).grad;
    grad_of(b) += at(out).grad;
  };
  return out;
}

Tape::Id Tape::add_rowvec(Id a, Id b) {
  Mat v = value(a);
  v.rowwise() += value(b).row(0);
  Id out = push(std::move(v));
  at(out).back = [this, a, b, out] {
    const Mat& g = at(out).grad;
    grad_of(a) += g;
    grad_of(b).row(0) += g.colwise().sum();
  };
  return out;
}

Tape::Id Tape::scale(Id a, double s) {
  Id out = push(value(a) * s);
  at(out).back = [this, a, s, out] { grad_of(a) += at(out).grad * s; };
  return out;
}

Tape::Id Tape::add_constant(Id a, const Mat& c) {
  Id out = push(value(a) + c);
  at(out).back = [this, a, out] { grad_of(a) += at(out).grad; };
  return out;
}

Tape::Id Tape::one_minus(Id a) {
  Id out = push(Mat::Ones(value(a).rows(), value(a).cols()) - value(a));
  at(out).back = [this, a, out] { grad_of(a) -= at(out).grad; };
  return out;
}

Tape::Id Tape::hadamard(Id a, Id b) {
  Id out = push(value(a).cwiseProduct(value(b)));
  at(out).back = [this, a, b, out] {
    const Mat& g = at(out).grad;
    grad_of(a) += g.cwiseProduct(value(b));
    grad_of(b) += g.cwiseProduct(value(a));
  };
  return out;
}

Tape::Id Tape::tanh_of(Id a) {
  Id out = push(value(a).array().tanh().matrix());
  at(out).back = [this, a, out] {
    const Mat& y = value(out);
    grad_of(a).array() += at(out).grad.array() * (1.0 - y.array().square());
  };
  return out;
}

Tape::Id Tape::sigmoid_of(Id a) {
  Mat y = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  Id out = push(std::move(y));
  at(out).back = [this, a, out] {
    const auto& y2 = value(out).array();
    grad_of(a).array() += at(out).grad.array() * y2 * (1.0 - y2);
  };
  return out;
}

Tape::Id Tape::relu_of(Id a) {
  Id out = push(value(a).cwiseMax(0.0));
  at(out).back = [this, a, out] {
    grad_of(a).array() +=
        at(out).grad.array() * (value(a).array() > 0.0).cast<double>();
  };
  return out;
}

Tape::Id Tape::transpose_of(Id a) {
  Id out = push(value(a).transpose());
  at(out).back = [this, a, out] { grad_of(a) += at(out).grad.transpose(); };
  return out;
}

Tape::Id Tape::softmax_rows(Id a) {
  Id out = push(softmax_rows_value(value(a)));
  at(out).back = [this, a, out] {
    const Mat& y = value(out);
    const Mat& g = at(out).grad;
    Mat& ga = grad_of(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = g.row(r).dot(y.row(r));
      ga.row(r).array() += (g.row(r).array() - dot) * y.row(r).array();
    }
  };
  return out;
}

Tape::Id Tape::layer_norm_rows(Id x, Id gain, Id bias) {
  constexpr double kEps = 1e-6;
  const Mat& xv = value(x);
  Mat xhat(xv.rows(), xv.cols());
  Eigen::VectorXd inv_sigma(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double mu = xv.row(r).mean();
    double var = (xv.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + kEps);
    xhat.row(r) = (xv.row(r).array() - mu) * is;
    inv_sigma(r) = is;
  }
  Mat y = xhat;
  y.array().rowwise() *= value(gain).row(0).array();
  y.rowwise() += value(bias).row(0);
  Id out = push(std::move(y));
  at(out).back = [this, x, gain, bias, out, xhat, inv_sigma] {
    const Mat& g = at(out).grad;
    grad_of(bias).row(0) += g.colwise().sum();
    grad_of(gain).row(0) += g.cwiseProduct(xhat).colwise().sum();
    Mat dxhat = g;
    dxhat.array().rowwise() *= value(gain).row(0).array();
    Mat& gx = grad_of(x);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      double m1 = dxhat.row(r).mean();
      double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
      gx.row(r).array() +=
          inv_sigma(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
    }
  };
  return out;
}

Tape::Id Tape::gather_rows(Id table, const std::vector<int>& rows) {
  const Mat& t = value(table);
  Mat v(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= t.rows()) {
      throw data_error("symbol index " + std::to_string(rows[i]) +
                       " outside embedding table of " + std::to_string(t.rows()));
    }
    v.row(static_cast<Eigen::Index>(i)) = t.row(rows[i]);
  }
  Id out = push(std::move(v));
  at(out).back = [this, table, rows, out] {
    const Mat& g = at(out).grad;
    Mat& gt = grad_of(table);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      gt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  };
  return out;
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  // Shapes must be read before push() — it may reallocate the node storage
  // and leave av/bv dangling.
  Eigen::Index ac = av.cols(), bc = bv.cols();
  Mat v(av.rows(), ac + bc);
  v.leftCols(ac) = av;
  v.rightCols(bc) = bv;
  Id out = push(std::move(v));
  at(out).back = [this, a, b, out, ac, bc] {
    const Mat& g = at(out).grad;
    grad_of(a) += g.leftCols(ac);
    grad_of(b) += g.rightCols(bc);
  };
  return out;
}

Tape::Id Tape::slice_cols(Id a, Eigen::Index offset, Eigen::Index n) {
  Id out = push(value(a).middleCols(offset, n));
  at(out).back = [this, a, out, offset, n] {
    grad_of(a).middleCols(offset, n) += at(out).grad;
  };
  return out;
}

Tape::Id Tape::slice_rows(Id a, Eigen::Index offset, Eigen::Index n) {
  Id out = push(value(a).middleRows(offset, n));
  at(out).back = [this, a, out, offset, n] {
    grad_of(a).middleRows(offset, n) += at(out).grad;
  };
  return out;
}

Tape::Id Tape::vstack(const std::vector<Id>& parts) {
  if (parts.empty()) throw std::invalid_argument("vstack of nothing");
  Eigen::Index cols = value(parts[0]).cols();
  Mat v(static_cast<Eigen::Index>(parts.size()), cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v.row(static_cast<Eigen::Index>(i)) = value(parts[i]).row(0);
  }
  Id out = push(std::move(v));
  at(out).back = [this, parts, out] {
    const Mat& g = at(out).grad;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      grad_of(parts[i]).row(0) += g.row(static_cast<Eigen::Index>(i));
    }
  };
  return out;
}

Tape::Id Tape::dropout(Id a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  const Mat& av = value(a);
  Mat mask(av.rows(), av.cols());
  double keep = 1.0 - rate;
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    for (Eigen::Index c = 0; c < av.cols(); ++c) {
      mask(r, c) = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    }
  }
  Id out = push(av.cwiseProduct(mask));
  at(out).back = [this, a, out, mask] {
    grad_of(a) += at(out).grad.cwiseProduct(mask);
  };
  return out;
}

Tape::Id Tape::smoothed_ce_sum(Id logits, const std::vector<int>& gold, double epsilon) {
  const Mat& lv = value(logits);
  if (static_cast<Eigen::Index>(gold.size()) != lv.rows()) {
    throw std::invalid_argument("one gold index per logit row required");
  }
  Eigen::Index vsize = lv.cols();
  Mat lsm = log_softmax_rows_value(lv);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < lv.rows(); ++r) {
    int y = gold[static_cast<std::size_t>(r)];
    if (y < 0 || y >= vsize) {
      throw data_error("gold index " + std::to_string(y) + " outside vocabulary of " +
                       std::to_string(vsize));
    }
    loss -= (1.0 - epsilon) * lsm(r, y);
    loss -= epsilon / static_cast<double>(vsize) * lsm.row(r).sum();
  }
  Mat v(1, 1);
  v(0, 0) = loss;
  Id out = push(std::move(v));
  at(out).back = [this, logits, gold, epsilon, out] {
    double g = at(out).grad(0, 0);
    const Mat& lv2 = value(logits);
    Mat p = softmax_rows_value(lv2);
    double unif = epsilon / static_cast<double>(lv2.cols());
    Mat& gl = grad_of(logits);
    for (Eigen::Index r = 0; r < lv2.rows(); ++r) {
      gl.row(r).array() += g * (p.row(r).array() - unif);
      gl(r, gold[static_cast<std::size_t>(r)]) -= g * (1.0 - epsilon);
    }
  };
  return out;
}

void Tape::backward(Id id) {
  if (value(id).size() != 1) {
    throw std::invalid_argument("backward requires a scalar (1x1) node");
  }
  grad_of(id)(0, 0) = 1.0;
  for (Id i = id; i >= 0; --i) {
    Node& n = at(i);
    if (n.grad.size() == 0) continue;  // nothing flowed here
    if (n.back) n.back();
    if (n.owner) n.owner->grad += n.grad;
  }
}

}  // namespace ilmt
