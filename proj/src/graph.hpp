#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "common.hpp"

namespace ilmt {

using Mat = Eigen::MatrixXd;

// A named parameter tensor with its accumulated gradient and Adam moments.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  void init_shape(Eigen::Index rows, Eigen::Index cols) {
    value = Mat::Zero(rows, cols);
    grad = Mat::Zero(rows, cols);
    adam_m = Mat::Zero(rows, cols);
    adam_v = Mat::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

// Reverse-mode tape over dense double matrices. Each op records a closure
// that pushes the output gradient back to its inputs; backward() walks nodes
// in reverse creation order. Gradients of parameter leaves accumulate into
// the owning Tensor, so one tape per sentence with shared Tensors implements
// minibatch gradient accumulation.
class Tape {
 public:
  using Id = int;

  Id constant(Mat v);               // leaf, no gradient
  Id param(Tensor& p);              // leaf, grad accumulates into p.grad

  Id matmul(Id a, Id b);            // A·B
  Id matmul_nt(Id a, Id b);         // A·Bᵀ
  Id add(Id a, Id b);               // same shape
  Id add_rowvec(Id a, Id b);        // each row of A plus the 1×k row B
  Id scale(Id a, double s);
  Id add_constant(Id a, const Mat& c);   // A + C, no grad through C
  Id one_minus(Id a);               // 1 − A
  Id hadamard(Id a, Id b);
  Id tanh_of(Id a);
  Id sigmoid_of(Id a);
  Id relu_of(Id a);
  Id transpose_of(Id a);
  Id softmax_rows(Id a);
  Id layer_norm_rows(Id x, Id gain, Id bias);  // gain/bias are 1×k rows
  Id gather_rows(Id table, const std::vector<int>& rows);
  Id concat_cols(Id a, Id b);
  Id slice_cols(Id a, Eigen::Index offset, Eigen::Index n);
  Id slice_rows(Id a, Eigen::Index offset, Eigen::Index n);
  Id vstack(const std::vector<Id>& parts);  // single-row nodes stacked
  Id dropout(Id a, double rate, Rng& rng);  // inverted dropout

  // Sum over rows r of −[(1−ε)·log p(gold_r) + (ε/V)·Σ_v log p(v)] on
  // row-wise softmax of the logits. Returns a 1×1 node.
  Id smoothed_ce_sum(Id logits, const std::vector<int>& gold, double epsilon);

  const Mat& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  // Seeds d(node)/d(node) = 1 (node must be 1×1) and runs the tape backward,
  // accumulating parameter gradients.
  void backward(Id id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;  // may be empty (leaves, constants)
    Tensor* owner = nullptr;
  };
  std::vector<Node> nodes_;

  Id push(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), nullptr, nullptr});
    return static_cast<Id>(nodes_.size() - 1);
  }
  Node& at(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
  Mat& grad_of(Id id);
};

// Row-wise log-softmax / softmax helpers shared by training and decoding.
Mat softmax_rows_value(const Mat& logits);
Mat log_softmax_rows_value(const Mat& logits);

}  // namespace ilmt
