#pragma once

#include <string>
#include <vector>

#include "vsum/autodiff.hpp"
#include "vsum/common.hpp"
#include "vsum/rng.hpp"

namespace vsum::nets {

// Flat registry of named parameter tensors. Order of registration is the
// canonical parameter order used by the optimizer, checkpoints, and
// finite-difference checks.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Matrix*> tensors;

  void add(const std::string& name, Matrix& m) {
    names.push_back(name);
    tensors.push_back(&m);
  }

  std::size_t size() const { return tensors.size(); }
};

inline void fill_uniform(Matrix& m, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
}

// Fully connected layer, y = W x + b with W [out x in], b [out x 1].
struct Fc {
  Matrix W;
  Matrix b;

  int in() const { return static_cast<int>(W.cols()); }
  int out() const { return static_cast<int>(W.rows()); }

  void collect(ParamSet& ps, const std::string& prefix) {
    ps.add(prefix + ".W", W);
    ps.add(prefix + ".b", b);
  }
};

inline Fc make_fc(int in, int out, Rng& rng) {
  Fc fc;
  fc.W = Matrix(out, in);
  fc.b = Matrix(out, 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(fc.W, rng, bound);
  fill_uniform(fc.b, rng, bound);
  return fc;
}

// Single-direction LSTM. Gate rows of the packed matrices are ordered
// input, forget, cell, output.
struct Lstm {
  Matrix W_ih;  // [4H x in]
  Matrix W_hh;  // [4H x H]
  Matrix b;     // [4H x 1]

  int hidden() const { return static_cast<int>(W_hh.cols()); }
  int in() const { return static_cast<int>(W_ih.cols()); }

  void collect(ParamSet& ps, const std::string& prefix) {
    ps.add(prefix + ".W_ih", W_ih);
    ps.add(prefix + ".W_hh", W_hh);
    ps.add(prefix + ".b", b);
  }
};

inline Lstm make_lstm(int in, int hidden, Rng& rng) {
  Lstm l;
  l.W_ih = Matrix(4 * hidden, in);
  l.W_hh = Matrix(4 * hidden, hidden);
  l.b = Matrix(4 * hidden, 1);
  fill_uniform(l.W_ih, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  const double hb = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill_uniform(l.W_hh, rng, hb);
  fill_uniform(l.b, rng, hb);
  return l;
}

struct BiLstm {
  Lstm fwd;
  Lstm bwd;

  int hidden() const { return fwd.hidden(); }

  void collect(ParamSet& ps, const std::string& prefix) {
    fwd.collect(ps, prefix + ".fwd");
    bwd.collect(ps, prefix + ".bwd");
  }
};

inline BiLstm make_bilstm(int in, int hidden, Rng& rng) {
  BiLstm b;
  b.fwd = make_lstm(in, hidden, rng);
  b.bwd = make_lstm(in, hidden, rng);
  return b;
}

// Tape-side mirrors. vars() must enumerate in the same order as collect().
struct FcVar {
  ad::Var W, b;

  void vars(std::vector<ad::Var>& out) const {
    out.push_back(W);
    out.push_back(b);
  }
};

struct LstmVar {
  ad::Var W_ih, W_hh, b;

  void vars(std::vector<ad::Var>& out) const {
    out.push_back(W_ih);
    out.push_back(W_hh);
    out.push_back(b);
  }
};

struct BiLstmVar {
  LstmVar fwd, bwd;

  void vars(std::vector<ad::Var>& out) const {
    fwd.vars(out);
    bwd.vars(out);
  }
};

inline FcVar put(ad::Tape& t, const Fc& fc) { return {t.param(fc.W), t.param(fc.b)}; }

inline LstmVar put(ad::Tape& t, const Lstm& l) {
  return {t.param(l.W_ih), t.param(l.W_hh), t.param(l.b)};
}

inline BiLstmVar put(ad::Tape& t, const BiLstm& b) { return {put(t, b.fwd), put(t, b.bwd)}; }

// Applies an FC layer to every row of X [T x in], giving [T x out].
inline ad::Var fc_rows(FcVar fc, ad::Var X) {
  return ad::add_row_broadcast(ad::matmul(X, ad::transpose(fc.W)), ad::transpose(fc.b));
}

// Applies an FC layer to a column vector [in x 1].
inline ad::Var fc_col(FcVar fc, ad::Var x) { return ad::add(ad::matmul(fc.W, x), fc.b); }

// Runs an LSTM over the rows of X [T x in] and returns the hidden states as
// [T x H], row t holding h_t. With reverse set the scan runs from the last
// row to the first but output rows stay in input order.
inline ad::Var lstm_sequence(ad::Tape& t, LstmVar p, ad::Var X, int hidden, bool reverse) {
  const int T = static_cast<int>(t.val(X).rows());
  if (T == 0) throw ShapeError("lstm_sequence: empty sequence");
  ad::Var h = t.constant(Matrix::Zero(hidden, 1));
  ad::Var c = t.constant(Matrix::Zero(hidden, 1));
  std::vector<ad::Var> out(static_cast<std::size_t>(T));
  for (int step = 0; step < T; ++step) {
    const int at = reverse ? T - 1 - step : step;
    ad::Var x = ad::row_as_col(X, at);
    ad::Var pre = ad::add(ad::add(ad::matmul(p.W_ih, x), ad::matmul(p.W_hh, h)), p.b);
    ad::Var ig = ad::sigmoid(ad::block(pre, 0, 0, hidden, 1));
    ad::Var fg = ad::sigmoid(ad::block(pre, hidden, 0, hidden, 1));
    ad::Var gg = ad::tanh_(ad::block(pre, 2 * hidden, 0, hidden, 1));
    ad::Var og = ad::sigmoid(ad::block(pre, 3 * hidden, 0, hidden, 1));
    c = ad::add(ad::cmul(fg, c), ad::cmul(ig, gg));
    h = ad::cmul(og, ad::tanh_(c));
    out[static_cast<std::size_t>(at)] = ad::transpose(h);
  }
  return ad::concat_rows(out);
}

// Forward and backward passes concatenated per time step: [T x 2H].
inline ad::Var bilstm_sequence(ad::Tape& t, BiLstmVar p, ad::Var X, int hidden) {
  ad::Var hf = lstm_sequence(t, p.fwd, X, hidden, false);
  ad::Var hb = lstm_sequence(t, p.bwd, X, hidden, true);
  return ad::concat_cols(hf, hb);
}

}  // namespace vsum::nets
