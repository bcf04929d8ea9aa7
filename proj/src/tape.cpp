#include "sensenet/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace sensenet {

Expr Tape::push(Mat value, std::function<void(Tape&)> back, Parameter* param) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  n.param = param;
  nodes_.push_back(std::move(n));
  return Expr{this, static_cast<int>(nodes_.size()) - 1};
}

Expr Tape::input(Mat value) { return push(std::move(value), nullptr); }

Expr Tape::param(Parameter& p) { return push(Mat(), nullptr, &p); }

Expr Tape::add(Expr a, Expr b) {
  int ia = a.id, ib = b.id;
  return push(v(ia) + v(ib), [ia, ib](Tape& t) {
    t.g(ia) += t.cur_grad_;
    t.g(ib) += t.cur_grad_;
  });
}

Expr Tape::sub(Expr a, Expr b) {
  int ia = a.id, ib = b.id;
  return push(v(ia) - v(ib), [ia, ib](Tape& t) {
    t.g(ia) += t.cur_grad_;
    t.g(ib) -= t.cur_grad_;
  });
}

Expr Tape::cmul(Expr a, Expr b) {
  int ia = a.id, ib = b.id;
  return push(v(ia).cwiseProduct(v(ib)), [ia, ib](Tape& t) {
    t.g(ia) += t.cur_grad_.cwiseProduct(t.v(ib));
    t.g(ib) += t.cur_grad_.cwiseProduct(t.v(ia));
  });
}

Expr Tape::scale(Expr a, double s) {
  int ia = a.id;
  return push(v(ia) * s, [ia, s](Tape& t) { t.g(ia) += t.cur_grad_ * s; });
}

Expr Tape::one_minus(Expr a) {
  int ia = a.id;
  Mat out = Mat::Ones(v(ia).rows(), v(ia).cols()) - v(ia);
  return push(std::move(out), [ia](Tape& t) { t.g(ia) -= t.cur_grad_; });
}

Expr Tape::matmul(Expr a, Expr b) {
  int ia = a.id, ib = b.id;
  if (v(ia).cols() != v(ib).rows())
    throw std::invalid_argument("matmul: shape mismatch");
  return push(v(ia) * v(ib), [ia, ib](Tape& t) {
    t.g(ia) += t.cur_grad_ * t.v(ib).transpose();
    t.g(ib) += t.v(ia).transpose() * t.cur_grad_;
  });
}

Expr Tape::transpose(Expr a) {
  int ia = a.id;
  return push(v(ia).transpose(),
              [ia](Tape& t) { t.g(ia) += t.cur_grad_.transpose(); });
}

Expr Tape::colwise_add(Expr a, Expr vcol) {
  int ia = a.id, iv = vcol.id;
  if (v(iv).cols() != 1 || v(iv).rows() != v(ia).rows())
    throw std::invalid_argument("colwise_add: vector shape mismatch");
  Mat out = v(ia);
  out.colwise() += Eigen::VectorXd(v(iv).col(0));
  return push(std::move(out), [ia, iv](Tape& t) {
    t.g(ia) += t.cur_grad_;
    t.g(iv) += t.cur_grad_.rowwise().sum();
  });
}

Expr Tape::concat_rows(Expr a, Expr b) {
  int ia = a.id, ib = b.id;
  if (v(ia).cols() != v(ib).cols())
    throw std::invalid_argument("concat_rows: column mismatch");
  Mat out(v(ia).rows() + v(ib).rows(), v(ia).cols());
  out.topRows(v(ia).rows()) = v(ia);
  out.bottomRows(v(ib).rows()) = v(ib);
  long ra = v(ia).rows(), rb = v(ib).rows();
  return push(std::move(out), [ia, ib, ra, rb](Tape& t) {
    t.g(ia) += t.cur_grad_.topRows(ra);
    t.g(ib) += t.cur_grad_.bottomRows(rb);
  });
}

Expr Tape::concat_cols(Expr a, Expr b) {
  int ia = a.id, ib = b.id;
  if (v(ia).rows() != v(ib).rows())
    throw std::invalid_argument("concat_cols: row mismatch");
  Mat out(v(ia).rows(), v(ia).cols() + v(ib).cols());
  out.leftCols(v(ia).cols()) = v(ia);
  out.rightCols(v(ib).cols()) = v(ib);
  long ca = v(ia).cols(), cb = v(ib).cols();
  return push(std::move(out), [ia, ib, ca, cb](Tape& t) {
    t.g(ia) += t.cur_grad_.leftCols(ca);
    t.g(ib) += t.cur_grad_.rightCols(cb);
  });
}

Expr Tape::stack_cols(const std::vector<Expr>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("stack_cols: empty");
  long r = v(blocks[0].id).rows();
  long c = 0;
  std::vector<int> ids;
  std::vector<long> widths;
  for (const auto& b : blocks) {
    if (v(b.id).rows() != r)
      throw std::invalid_argument("stack_cols: row mismatch");
    ids.push_back(b.id);
    widths.push_back(v(b.id).cols());
    c += v(b.id).cols();
  }
  Mat out(r, c);
  long at = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    out.middleCols(at, widths[i]) = v(ids[i]);
    at += widths[i];
  }
  return push(std::move(out), [ids, widths](Tape& t) {
    long at = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      t.g(ids[i]) += t.cur_grad_.middleCols(at, widths[i]);
      at += widths[i];
    }
  });
}

Expr Tape::slice_rows(Expr a, int r0, int n) {
  int ia = a.id;
  if (r0 < 0 || n < 0 || r0 + n > v(ia).rows())
    throw std::invalid_argument("slice_rows: out of range");
  return push(v(ia).middleRows(r0, n), [ia, r0, n](Tape& t) {
    t.g(ia).middleRows(r0, n) += t.cur_grad_;
  });
}

Expr Tape::slice_cols(Expr a, int c0, int n) {
  int ia = a.id;
  if (c0 < 0 || n < 0 || c0 + n > v(ia).cols())
    throw std::invalid_argument("slice_cols: out of range");
  return push(v(ia).middleCols(c0, n), [ia, c0, n](Tape& t) {
    t.g(ia).middleCols(c0, n) += t.cur_grad_;
  });
}

Expr Tape::tanh_(Expr a) {
  int ia = a.id;
  Mat out = v(ia).array().tanh();
  int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    t.g(ia) += t.cur_grad_.cwiseProduct(
        (1.0 - t.v(self).array().square()).matrix());
  });
}

Expr Tape::sigmoid_(Expr a) {
  int ia = a.id;
  Mat out = (1.0 / (1.0 + (-v(ia).array()).exp())).matrix();
  int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    const Mat& y = t.v(self);
    t.g(ia) += t.cur_grad_.cwiseProduct(
        y.cwiseProduct((1.0 - y.array()).matrix()));
  });
}

Expr Tape::softmax_vec(Expr a) {
  int ia = a.id;
  if (v(ia).cols() != 1) throw std::invalid_argument("softmax_vec: not a column");
  Eigen::ArrayXd x = v(ia).col(0).array();
  Eigen::ArrayXd e = (x - x.maxCoeff()).exp();
  Mat out = (e / e.sum()).matrix();
  int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    const Mat& y = t.v(self);
    double dotv = (t.cur_grad_.cwiseProduct(y)).sum();
    t.g(ia) += y.cwiseProduct(
        (t.cur_grad_.array() - dotv).matrix());
  });
}

Expr Tape::rowwise_max(Expr a) {
  int ia = a.id;
  long r = v(ia).rows(), c = v(ia).cols();
  if (c < 1) throw std::invalid_argument("rowwise_max: empty");
  Mat out(r, 1);
  std::vector<int> arg(static_cast<size_t>(r));
  for (long i = 0; i < r; ++i) {
    int best = 0;
    for (long j = 1; j < c; ++j)
      if (v(ia)(i, j) > v(ia)(i, best)) best = static_cast<int>(j);
    arg[static_cast<size_t>(i)] = best;
    out(i, 0) = v(ia)(i, best);
  }
  return push(std::move(out), [ia, arg](Tape& t) {
    for (size_t i = 0; i < arg.size(); ++i)
      t.g(ia)(static_cast<long>(i), arg[i]) += t.cur_grad_(static_cast<long>(i), 0);
  });
}

Expr Tape::pad_cols(Expr a, int left, int right) {
  int ia = a.id;
  if (left < 0 || right < 0) throw std::invalid_argument("pad_cols: negative pad");
  long r = v(ia).rows(), c = v(ia).cols();
  Mat out = Mat::Zero(r, left + c + right);
  out.middleCols(left, c) = v(ia);
  return push(std::move(out), [ia, left, c](Tape& t) {
    t.g(ia) += t.cur_grad_.middleCols(left, c);
  });
}

Expr Tape::sliding_windows(Expr a, int k) {
  int ia = a.id;
  long r = v(ia).rows(), c = v(ia).cols();
  if (k < 1 || k > c)
    throw std::invalid_argument("sliding_windows: bad window size");
  long n = c - k + 1;
  Mat out(r * k, n);
  for (long j = 0; j < n; ++j)
    for (int w = 0; w < k; ++w) out.block(w * r, j, r, 1) = v(ia).col(j + w);
  return push(std::move(out), [ia, k, r, n](Tape& t) {
    for (long j = 0; j < n; ++j)
      for (int w = 0; w < k; ++w)
        t.g(ia).col(j + w) += t.cur_grad_.block(w * r, j, r, 1);
  });
}

Expr Tape::lookup(Expr table, const std::vector<int>& ids) {
  int it = table.id;
  long d = v(it).rows(), vocab = v(it).cols();
  Mat out(d, static_cast<long>(ids.size()));
  for (size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= vocab)
      throw std::out_of_range("lookup: id out of range");
    out.col(static_cast<long>(t)) = v(it).col(ids[t]);
  }
  std::vector<int> captured = ids;
  return push(std::move(out), [it, captured](Tape& t) {
    for (size_t i = 0; i < captured.size(); ++i)
      t.g(it).col(captured[i]) += t.cur_grad_.col(static_cast<long>(i));
  });
}

Expr Tape::dot(Expr a, Expr b) {
  int ia = a.id, ib = b.id;
  if (v(ia).cols() != 1 || v(ib).cols() != 1 || v(ia).rows() != v(ib).rows())
    throw std::invalid_argument("dot: shape mismatch");
  Mat out(1, 1);
  out(0, 0) = v(ia).col(0).dot(v(ib).col(0));
  return push(std::move(out), [ia, ib](Tape& t) {
    double s = t.cur_grad_(0, 0);
    t.g(ia) += s * t.v(ib);
    t.g(ib) += s * t.v(ia);
  });
}

Expr Tape::pick(Expr a, int row) {
  return sum_entries(a, {row});
}

Expr Tape::sum_entries(Expr a, std::vector<int> rows) {
  int ia = a.id;
  if (v(ia).cols() != 1) throw std::invalid_argument("sum_entries: not a column");
  Mat out = Mat::Zero(1, 1);
  for (int r : rows) {
    if (r < 0 || r >= v(ia).rows())
      throw std::out_of_range("sum_entries: row out of range");
    out(0, 0) += v(ia)(r, 0);
  }
  return push(std::move(out), [ia, rows](Tape& t) {
    double s = t.cur_grad_(0, 0);
    for (int r : rows) t.g(ia)(r, 0) += s;
  });
}

Expr Tape::neg_log(Expr a) {
  int ia = a.id;
  Mat out = (-v(ia).array().log()).matrix();
  return push(std::move(out), [ia](Tape& t) {
    t.g(ia) -= t.cur_grad_.cwiseQuotient(t.v(ia));
  });
}

Expr Tape::gate_embed(Expr u, Expr table,
                      const std::vector<std::pair<int, int>>& spans,
                      int n_tokens) {
  int iu = u.id, it = table.id;
  if (v(it).cols() != 2) throw std::invalid_argument("gate_embed: table needs 2 columns");
  if (v(iu).cols() != 1 || v(iu).rows() != static_cast<long>(spans.size()))
    throw std::invalid_argument("gate_embed: gate count mismatch");
  long d = v(it).rows();
  Mat out = Mat::Zero(d, n_tokens);
  for (size_t i = 0; i < spans.size(); ++i) {
    double ui = v(iu)(static_cast<long>(i), 0);
    Eigen::VectorXd gi;
    if (ui == 0.0)
      gi = v(it).col(0);
    else if (ui == 1.0)
      gi = v(it).col(1);
    else
      gi = v(it).col(0) + ui * (v(it).col(1) - v(it).col(0));
    for (int tok = spans[i].first; tok < spans[i].second; ++tok) {
      if (tok < 0 || tok >= n_tokens)
        throw std::out_of_range("gate_embed: span outside token range");
      out.col(tok) = gi;
    }
  }
  std::vector<std::pair<int, int>> sp = spans;
  return push(std::move(out), [iu, it, sp](Tape& t) {
    Eigen::VectorXd diff = t.v(it).col(1) - t.v(it).col(0);
    for (size_t i = 0; i < sp.size(); ++i) {
      double ui = t.v(iu)(static_cast<long>(i), 0);
      Eigen::VectorXd gsum = Eigen::VectorXd::Zero(t.v(it).rows());
      for (int tok = sp[i].first; tok < sp[i].second; ++tok)
        gsum += t.cur_grad_.col(tok);
      t.g(it).col(0) += (1.0 - ui) * gsum;
      t.g(it).col(1) += ui * gsum;
      t.g(iu)(static_cast<long>(i), 0) += diff.dot(gsum);
    }
  });
}

Expr Tape::binary_cross_entropy(Expr p, const std::vector<int>& labels,
                                double eps) {
  int ip = p.id;
  if (v(ip).cols() != 1 ||
      v(ip).rows() != static_cast<long>(labels.size()) || labels.empty())
    throw std::invalid_argument("binary_cross_entropy: shape mismatch");
  long n = v(ip).rows();
  double loss = 0;
  for (long i = 0; i < n; ++i) {
    double pi = v(ip)(i, 0);
    loss -= labels[static_cast<size_t>(i)]
                ? std::log(std::max(pi, eps))
                : std::log(std::max(1.0 - pi, eps));
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  std::vector<int> lab = labels;
  return push(std::move(out), [ip, lab, eps, n](Tape& t) {
    double s = t.cur_grad_(0, 0);
    for (long i = 0; i < n; ++i) {
      double pi = t.v(ip)(i, 0);
      if (lab[static_cast<size_t>(i)]) {
        if (pi > eps) t.g(ip)(i, 0) -= s / pi;
      } else {
        if (1.0 - pi > eps) t.g(ip)(i, 0) += s / (1.0 - pi);
      }
    }
  });
}

void Tape::backward(Expr loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: foreign expr");
  Node& ln = nodes_[loss.id];
  if (ln.param || ln.value.rows() != 1 || ln.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be a computed 1x1 node");
  for (auto& n : nodes_) {
    if (n.param) continue;  // parameter grads persist across passes
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.back) continue;
    cur_grad_ = n.grad;
    n.back(*this);
  }
}

}  // namespace sensenet
