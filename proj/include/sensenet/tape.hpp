#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sensenet {

using Mat = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;  // accumulated across backward passes until zeroed
  Mat adam_m, adam_v;

  Parameter() = default;
  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)),
        adam_m(Mat::Zero(rows, cols)),
        adam_v(Mat::Zero(rows, cols)) {}
};

class Tape;

struct Expr {
  Tape* tape = nullptr;
  int id = -1;
};

// Eager reverse-mode autodiff over dense float64 matrices. Values are
// computed at op construction; backward() replays recorded closures in
// reverse and accumulates into Parameter::grad for parameter leaves.
class Tape {
 public:
  // Constant leaf; the value is copied in.
  Expr input(Mat value);
  // Parameter leaf. Holds a reference: the caller must keep `p` alive and
  // unchanged until after backward(). Gradients accumulate straight into
  // p.grad, across backward calls, until the caller zeroes it.
  Expr param(Parameter& p);

  Expr add(Expr a, Expr b);
  Expr sub(Expr a, Expr b);
  Expr cmul(Expr a, Expr b);  // elementwise
  Expr scale(Expr a, double s);
  Expr one_minus(Expr a);
  Expr matmul(Expr a, Expr b);
  Expr transpose(Expr a);
  // a (r x c) plus column vector v (r x 1) broadcast over columns
  Expr colwise_add(Expr a, Expr v);
  Expr concat_rows(Expr a, Expr b);
  Expr concat_cols(Expr a, Expr b);
  // Horizontal concatenation of many blocks with equal row counts.
  Expr stack_cols(const std::vector<Expr>& blocks);
  Expr slice_rows(Expr a, int r0, int n);
  Expr slice_cols(Expr a, int c0, int n);
  Expr tanh_(Expr a);
  Expr sigmoid_(Expr a);
  Expr softmax_vec(Expr a);  // n x 1
  Expr rowwise_max(Expr a);  // argmax-routed gradient
  // Zero columns appended on either side: r x (left + c + right).
  Expr pad_cols(Expr a, int left, int right);
  // Valid sliding windows of width k, stride 1: (r*k) x (c-k+1) output,
  // column j stacking input columns j .. j+k-1. Requires c >= k.
  Expr sliding_windows(Expr a, int k);
  // Gather columns of an embedding table (d x V) by id; scatter-add back.
  Expr lookup(Expr table, const std::vector<int>& ids);
  Expr dot(Expr a, Expr b);     // n x 1 each -> 1 x 1
  Expr pick(Expr a, int row);   // n x 1 -> 1 x 1
  Expr sum_entries(Expr a, std::vector<int> rows);  // n x 1 -> 1 x 1
  Expr neg_log(Expr a);         // elementwise -log
  // Significance embedding: column t of the (d x n_tokens) result is the
  // gate-mixed embedding of the sentence containing token t. Forward is
  // exact table row selection whenever the gate value is exactly 0 or 1;
  // the gradient is always the interpolation jacobian
  //   g_i = D.col(0) + u_i * (D.col(1) - D.col(0)).
  Expr gate_embed(Expr u, Expr table,
                  const std::vector<std::pair<int, int>>& spans, int n_tokens);
  // Sum over rows of -(a*log(max(p,eps)) + (1-a)*log(max(1-p,eps))),
  // with the gradient zeroed inside clamped regions.
  Expr binary_cross_entropy(Expr p, const std::vector<int>& labels,
                            double eps);

  const Mat& value(Expr e) const { return v(e.id); }
  const Mat& grad_of(Expr e) const {
    const Node& n = nodes_[e.id];
    return n.param ? n.param->grad : n.grad;
  }
  int rows(Expr e) const { return static_cast<int>(v(e.id).rows()); }
  int cols(Expr e) const { return static_cast<int>(v(e.id).cols()); }
  size_t size() const { return nodes_.size(); }

  // loss must be 1x1; seeds its gradient with 1 and propagates.
  void backward(Expr loss);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;
    Parameter* param = nullptr;
  };

  Expr push(Mat value, std::function<void(Tape&)> back,
            Parameter* param = nullptr);
  Mat& g(int id) {
    Node& n = nodes_[id];
    return n.param ? n.param->grad : n.grad;
  }
  const Mat& v(int id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }

  std::vector<Node> nodes_;
  Mat cur_grad_;  // output gradient of the node whose closure is running
};

}  // namespace sensenet
