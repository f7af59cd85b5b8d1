#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "vsum/common.hpp"

namespace vsum::ad {

class Tape;

// Handle to a tape node. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

// Reverse-mode tape over dense f64 matrices. Scalars are 1x1, column vectors
// n x 1. Nodes record a backward closure that scatters the node's adjoint
// into its inputs; backward() runs them in reverse creation order.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix grad;  // allocated only when requires_grad
    bool requires_grad = false;
    BackFn back;
  };

  Var constant(Matrix v) { return push(std::move(v), false, nullptr); }

  Var param(Matrix v) { return push(std::move(v), true, nullptr); }

  const Matrix& val(Var v) const { return nodes_[check(v)].value; }

  const Matrix& grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (!n.requires_grad) throw Error("grad requested for a non-differentiable node");
    return n.grad;
  }

  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

  int next_id() const { return static_cast<int>(nodes_.size()); }

  Var push(Matrix value, bool requires_grad, BackFn back) {
    Node n;
    if (requires_grad) n.grad = Matrix::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(int id, const Matrix& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.requires_grad) n.grad += g;
  }

  void zero_grad() {
    for (auto& n : nodes_)
      if (n.requires_grad) n.grad.setZero();
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps backwards. `loss` must be scalar.
  void backward(Var loss) {
    const int last = check(loss);
    Node& ln = nodes_[static_cast<std::size_t>(last)];
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
      throw ShapeError("backward target must be a 1x1 scalar");
    if (!ln.requires_grad) throw Error("backward target does not require grad");
    zero_grad();
    ln.grad(0, 0) = 1.0;
    for (int i = last; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requires_grad && n.back) n.back(*this, n.grad);
    }
  }

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::size_t check(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw Error("Var does not belong to this tape");
    return static_cast<std::size_t>(v.id);
  }

  std::vector<Node> nodes_;
};

namespace detail {
inline Tape& tape_of(Var a) {
  if (!a.tape) throw Error("uninitialized Var");
  return *a.tape;
}
inline void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("Vars from different tapes");
}
inline void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch");
}
}  // namespace detail

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  detail::same_shape(av, bv, "add");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int ai = a.id, bi = b.id;
  return t.push(av + bv, rg, [ai, bi](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, g);
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  detail::same_shape(av, bv, "sub");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int ai = a.id, bi = b.id;
  return t.push(av - bv, rg, [ai, bi](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, -g);
  });
}

inline Var cmul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  detail::same_shape(av, bv, "cmul");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int ai = a.id, bi = b.id;
  return t.push(av.cwiseProduct(bv), rg, [ai, bi](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g.cwiseProduct(tp.node(bi).value));
    tp.accumulate(bi, g.cwiseProduct(tp.node(ai).value));
  });
}

inline Var matmul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dimensions disagree");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int ai = a.id, bi = b.id;
  return t.push(av * bv, rg, [ai, bi](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g * tp.node(bi).value.transpose());
    tp.accumulate(bi, tp.node(ai).value.transpose() * g);
  });
}

inline Var scale(Var a, double c) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  return t.push(t.val(a) * c, t.requires_grad(a),
                [ai, c](Tape& tp, const Matrix& g) { tp.accumulate(ai, g * c); });
}

inline Var add_const(Var a, double c) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  return t.push(t.val(a).array() + c, t.requires_grad(a),
                [ai](Tape& tp, const Matrix& g) { tp.accumulate(ai, g); });
}

// a + b broadcast over rows; b is [1 x n].
inline Var add_row_broadcast(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  if (bv.rows() != 1 || bv.cols() != av.cols())
    throw ShapeError("add_row_broadcast: bias must be [1 x cols]");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int ai = a.id, bi = b.id;
  Matrix v = av;
  v.rowwise() += bv.row(0);
  return t.push(std::move(v), rg, [ai, bi](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, g.colwise().sum());
  });
}

// a + s broadcast everywhere; s is a 1x1 node.
inline Var add_scalar_broadcast(Var a, Var s) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, s);
  const Matrix& sv = t.val(s);
  if (sv.rows() != 1 || sv.cols() != 1) throw ShapeError("add_scalar_broadcast: s must be 1x1");
  const bool rg = t.requires_grad(a) || t.requires_grad(s);
  const int ai = a.id, si = s.id;
  return t.push(t.val(a).array() + sv(0, 0), rg, [ai, si](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g);
    Matrix gs(1, 1);
    gs(0, 0) = g.sum();
    tp.accumulate(si, gs);
  });
}

// s * a with s a 1x1 node.
inline Var scalar_mul(Var s, Var a) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, s);
  const Matrix& sv = t.val(s);
  if (sv.rows() != 1 || sv.cols() != 1) throw ShapeError("scalar_mul: s must be 1x1");
  const bool rg = t.requires_grad(a) || t.requires_grad(s);
  const int ai = a.id, si = s.id;
  return t.push(t.val(a) * sv(0, 0), rg, [ai, si](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g * tp.node(si).value(0, 0));
    Matrix gs(1, 1);
    gs(0, 0) = g.cwiseProduct(tp.node(ai).value).sum();
    tp.accumulate(si, gs);
  });
}

inline Var sigmoid(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  const int self = t.next_id();
  Matrix v = ((-t.val(a).array()).exp() + 1.0).inverse();
  return t.push(std::move(v), t.requires_grad(a), [ai, self](Tape& tp, const Matrix& g) {
    const Matrix& s = tp.node(self).value;
    tp.accumulate(ai, g.cwiseProduct(s.cwiseProduct(Matrix::Ones(s.rows(), s.cols()) - s)));
  });
}

inline Var tanh_(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  const int self = t.next_id();
  return t.push(t.val(a).array().tanh(), t.requires_grad(a),
                [ai, self](Tape& tp, const Matrix& g) {
                  const Matrix& v = tp.node(self).value;
                  tp.accumulate(ai, g.cwiseProduct((1.0 - v.array().square()).matrix()));
                });
}

inline Var exp_(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  const int self = t.next_id();
  return t.push(t.val(a).array().exp(), t.requires_grad(a),
                [ai, self](Tape& tp, const Matrix& g) {
                  tp.accumulate(ai, g.cwiseProduct(tp.node(self).value));
                });
}

inline Var log_(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  return t.push(t.val(a).array().log(), t.requires_grad(a),
                [ai](Tape& tp, const Matrix& g) {
                  tp.accumulate(ai, g.cwiseQuotient(tp.node(ai).value));
                });
}

inline Var abs_(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  return t.push(t.val(a).array().abs(), t.requires_grad(a),
                [ai](Tape& tp, const Matrix& g) {
                  const Matrix sign = tp.node(ai).value.array().sign();
                  tp.accumulate(ai, g.cwiseProduct(sign));
                });
}

inline Var square(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  return t.push(t.val(a).array().square(), t.requires_grad(a),
                [ai](Tape& tp, const Matrix& g) {
                  tp.accumulate(ai, 2.0 * g.cwiseProduct(tp.node(ai).value));
                });
}

// log(1 + e^x), evaluated stably; derivative is sigmoid(x).
inline Var softplus(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  const auto& x = t.val(a).array();
  Matrix v = x.max(0.0) + (-x.abs()).exp().log1p();
  return t.push(std::move(v), t.requires_grad(a), [ai](Tape& tp, const Matrix& g) {
    const auto& x = tp.node(ai).value.array();
    const Matrix s = ((-x).exp() + 1.0).inverse();
    tp.accumulate(ai, g.cwiseProduct(s));
  });
}

// Elementwise 1/x.
inline Var reciprocal(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  const int self = t.next_id();
  return t.push(t.val(a).array().inverse(), t.requires_grad(a),
                [ai, self](Tape& tp, const Matrix& g) {
                  const Matrix& v = tp.node(self).value;
                  tp.accumulate(ai, -g.cwiseProduct(v.array().square().matrix()));
                });
}

inline Var clamp(Var a, double lo, double hi) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  return t.push(t.val(a).array().max(lo).min(hi), t.requires_grad(a),
                [ai, lo, hi](Tape& tp, const Matrix& g) {
                  const Matrix& x = tp.node(ai).value;
                  Matrix gated = g;
                  for (Eigen::Index i = 0; i < x.size(); ++i)
                    if (!(x.data()[i] > lo && x.data()[i] < hi)) gated.data()[i] = 0.0;
                  tp.accumulate(ai, gated);
                });
}

inline Var sum(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  Matrix v(1, 1);
  v(0, 0) = t.val(a).sum();
  return t.push(std::move(v), t.requires_grad(a), [ai](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.node(ai).value;
    tp.accumulate(ai, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

inline Var mean(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  const double n = static_cast<double>(t.val(a).size());
  Matrix v(1, 1);
  v(0, 0) = t.val(a).sum() / n;
  return t.push(std::move(v), t.requires_grad(a), [ai, n](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.node(ai).value;
    tp.accumulate(ai, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

// Gathers rows by index; index -1 yields a zero row (used for shifted
// differences at sequence boundaries).
inline Var rows_gather(Var a, std::vector<int> idx) {
  Tape& t = detail::tape_of(a);
  const Matrix& av = t.val(a);
  for (int i : idx)
    if (i < -1 || i >= av.rows()) throw ShapeError("rows_gather: index out of range");
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    if (idx[r] >= 0) v.row(static_cast<Eigen::Index>(r)) = av.row(idx[r]);
  const int ai = a.id;
  return t.push(std::move(v), t.requires_grad(a),
                [ai, idx = std::move(idx)](Tape& tp, const Matrix& g) {
                  const Matrix& x = tp.node(ai).value;
                  Matrix gx = Matrix::Zero(x.rows(), x.cols());
                  for (std::size_t r = 0; r < idx.size(); ++r)
                    if (idx[r] >= 0) gx.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
                  tp.accumulate(ai, gx);
                });
}

// Row r of a matrix as a column vector.
inline Var row_as_col(Var a, int r) {
  Tape& t = detail::tape_of(a);
  const Matrix& av = t.val(a);
  if (r < 0 || r >= av.rows()) throw ShapeError("row_as_col: row out of range");
  const int ai = a.id;
  return t.push(av.row(r).transpose(), t.requires_grad(a),
                [ai, r](Tape& tp, const Matrix& g) {
                  const Matrix& x = tp.node(ai).value;
                  Matrix gx = Matrix::Zero(x.rows(), x.cols());
                  gx.row(r) = g.transpose();
                  tp.accumulate(ai, gx);
                });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input");
  Tape& t = detail::tape_of(parts.front());
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.val(parts.front()).cols();
  bool rg = false;
  for (Var p : parts) {
    detail::same_tape(parts.front(), p);
    if (t.val(p).cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += t.val(p).rows();
    rg = rg || t.requires_grad(p);
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::pair<int, Eigen::Index>> spans;
  for (Var p : parts) {
    const Matrix& pv = t.val(p);
    v.middleRows(at, pv.rows()) = pv;
    spans.emplace_back(p.id, pv.rows());
    at += pv.rows();
  }
  return t.push(std::move(v), rg, [spans = std::move(spans)](Tape& tp, const Matrix& g) {
    Eigen::Index at = 0;
    for (const auto& [id, n] : spans) {
      tp.accumulate(id, g.middleRows(at, n));
      at += n;
    }
  });
}

inline Var concat_cols(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_tape(a, b);
  const Matrix& av = t.val(a);
  const Matrix& bv = t.val(b);
  if (av.rows() != bv.rows()) throw ShapeError("concat_cols: row mismatch");
  Matrix v(av.rows(), av.cols() + bv.cols());
  v.leftCols(av.cols()) = av;
  v.rightCols(bv.cols()) = bv;
  const int ai = a.id, bi = b.id;
  const Eigen::Index ac = av.cols(), bc = bv.cols();
  return t.push(std::move(v), t.requires_grad(a) || t.requires_grad(b),
                [ai, bi, ac, bc](Tape& tp, const Matrix& g) {
                  tp.accumulate(ai, g.leftCols(ac));
                  tp.accumulate(bi, g.rightCols(bc));
                });
}

inline Var block(Var a, int row0, int col0, int rows, int cols) {
  Tape& t = detail::tape_of(a);
  const Matrix& av = t.val(a);
  if (row0 < 0 || col0 < 0 || row0 + rows > av.rows() || col0 + cols > av.cols())
    throw ShapeError("block: out of range");
  const int ai = a.id;
  return t.push(av.block(row0, col0, rows, cols), t.requires_grad(a),
                [ai, row0, col0, rows, cols](Tape& tp, const Matrix& g) {
                  const Matrix& x = tp.node(ai).value;
                  Matrix gx = Matrix::Zero(x.rows(), x.cols());
                  gx.block(row0, col0, rows, cols) = g;
                  tp.accumulate(ai, gx);
                });
}

inline Var gather_elem(Var a, int r, int c) {
  Tape& t = detail::tape_of(a);
  const Matrix& av = t.val(a);
  if (r < 0 || c < 0 || r >= av.rows() || c >= av.cols())
    throw ShapeError("gather_elem: out of range");
  Matrix v(1, 1);
  v(0, 0) = av(r, c);
  const int ai = a.id;
  return t.push(std::move(v), t.requires_grad(a), [ai, r, c](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.node(ai).value;
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    gx(r, c) = g(0, 0);
    tp.accumulate(ai, gx);
  });
}

// Row t of x scaled by p(t); both inputs can carry gradients.
inline Var scale_rows(Var x, Var p) {
  Tape& t = detail::tape_of(x);
  detail::same_tape(x, p);
  const Matrix& xv = t.val(x);
  const Matrix& pv = t.val(p);
  if (pv.cols() != 1 || pv.rows() != xv.rows())
    throw ShapeError("scale_rows: p must be [rows x 1]");
  Matrix v = xv.array().colwise() * pv.col(0).array();
  const int xi = x.id, pi = p.id;
  return t.push(std::move(v), t.requires_grad(x) || t.requires_grad(p),
                [xi, pi](Tape& tp, const Matrix& g) {
                  const Matrix& xv = tp.node(xi).value;
                  const Matrix& pv = tp.node(pi).value;
                  tp.accumulate(xi, g.array().colwise() * pv.col(0).array());
                  tp.accumulate(pi, g.cwiseProduct(xv).rowwise().sum());
                });
}

inline Var transpose(Var a) {
  Tape& t = detail::tape_of(a);
  const int ai = a.id;
  return t.push(t.val(a).transpose(), t.requires_grad(a),
                [ai](Tape& tp, const Matrix& g) { tp.accumulate(ai, g.transpose()); });
}

inline Var softmax_col(Var a) {
  Tape& t = detail::tape_of(a);
  const Matrix& av = t.val(a);
  if (av.cols() != 1) throw ShapeError("softmax_col: expects a column vector");
  Eigen::ArrayXd e = (av.col(0).array() - av.col(0).maxCoeff()).exp();
  Matrix v = (e / e.sum()).matrix();
  const int ai = a.id;
  const int self = t.next_id();
  return t.push(std::move(v), t.requires_grad(a), [ai, self](Tape& tp, const Matrix& g) {
    const Matrix& s = tp.node(self).value;
    const double dot = s.col(0).dot(g.col(0));
    tp.accumulate(ai, s.cwiseProduct(g.array().matrix() - Matrix::Constant(s.rows(), 1, dot)));
  });
}

// Binary cross entropy on a logit: softplus(l) - y*l.
inline Var bce_with_logit(Var logit, double target) {
  return sub(softplus(logit), scale(logit, target));
}

}  // namespace vsum::ad
