#pragma once

// Straight-line, loop-based reference implementations used as oracles for the
// graph-built forward passes. Deliberately independent of the tape: plain
// element loops, no shared helper code beyond the parameter structs.

#include <cmath>
#include <vector>

#include "vsum/adversarial.hpp"
#include "vsum/common.hpp"
#include "vsum/csnet.hpp"
#include "vsum/nets.hpp"

namespace refimpl {

using vsum::Matrix;
using vsum::Vector;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y[t][o] = sum_i W(o,i) X(t,i) + b(o)
inline Matrix fc_rows(const vsum::nets::Fc& fc, const Matrix& X) {
  const int T = static_cast<int>(X.rows());
  const int out = static_cast<int>(fc.W.rows());
  const int in = static_cast<int>(fc.W.cols());
  Matrix Y(T, out);
  for (int t = 0; t < T; ++t) {
    for (int o = 0; o < out; ++o) {
      double acc = fc.b(o, 0);
      for (int i = 0; i < in; ++i) acc += fc.W(o, i) * X(t, i);
      Y(t, o) = acc;
    }
  }
  return Y;
}

// Hidden states [T x H]; gate rows of the packed matrices are input, forget,
// cell, output. Output rows stay in input order when scanning in reverse.
inline Matrix lstm_seq(const vsum::nets::Lstm& l, const Matrix& X, bool reverse) {
  const int T = static_cast<int>(X.rows());
  const int in = static_cast<int>(l.W_ih.cols());
  const int H = static_cast<int>(l.W_hh.cols());
  std::vector<double> h(static_cast<std::size_t>(H), 0.0);
  std::vector<double> c(static_cast<std::size_t>(H), 0.0);
  Matrix out(T, H);
  for (int step = 0; step < T; ++step) {
    const int at = reverse ? T - 1 - step : step;
    std::vector<double> pre(static_cast<std::size_t>(4 * H));
    for (int r = 0; r < 4 * H; ++r) {
      double acc = l.b(r, 0);
      for (int i = 0; i < in; ++i) acc += l.W_ih(r, i) * X(at, i);
      for (int j = 0; j < H; ++j) acc += l.W_hh(r, j) * h[static_cast<std::size_t>(j)];
      pre[static_cast<std::size_t>(r)] = acc;
    }
    for (int j = 0; j < H; ++j) {
      const double ig = sigmoid(pre[static_cast<std::size_t>(j)]);
      const double fg = sigmoid(pre[static_cast<std::size_t>(H + j)]);
      const double gg = std::tanh(pre[static_cast<std::size_t>(2 * H + j)]);
      const double og = sigmoid(pre[static_cast<std::size_t>(3 * H + j)]);
      c[static_cast<std::size_t>(j)] = fg * c[static_cast<std::size_t>(j)] + ig * gg;
      h[static_cast<std::size_t>(j)] = og * std::tanh(c[static_cast<std::size_t>(j)]);
      out(at, j) = h[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

inline Matrix bilstm_seq(const vsum::nets::BiLstm& bl, const Matrix& X) {
  const Matrix f = lstm_seq(bl.fwd, X, false);
  const Matrix b = lstm_seq(bl.bwd, X, true);
  Matrix out(X.rows(), f.cols() + b.cols());
  out.leftCols(f.cols()) = f;
  out.rightCols(b.cols()) = b;
  return out;
}

inline Vector difference_attention(const Matrix& X, const vsum::csnet::CSNetParams& params,
                                   const vsum::csnet::CSNetConfig& cfg) {
  const int T = static_cast<int>(X.rows());
  const int D = static_cast<int>(X.cols());
  Vector d = Vector::Zero(T);
  for (std::size_t s = 0; s < cfg.strides.size(); ++s) {
    const int k = cfg.strides[s];
    const vsum::nets::Fc& fc = params.diff_proj[s];
    for (int t = 0; t < T; ++t) {
      double acc = fc.b(0, 0);
      if (t + k < T) {
        for (int i = 0; i < D; ++i) acc += fc.W(0, i) * std::abs(X(t + k, i) - X(t, i));
      } else if (cfg.boundary_mode == vsum::csnet::BoundaryMode::clamp) {
        for (int i = 0; i < D; ++i) acc += fc.W(0, i) * std::abs(X(T - 1, i) - X(t, i));
      }
      // zero-pad boundary: difference row is all zero, only the bias remains
      d[t] += acc;
    }
  }
  return d;
}

// One stream: partition the projected sequence (zero rows past T_s), encode
// each part, apply the head, and scatter scores back to frame order.
inline Vector stream_scores(const Matrix& H, const vsum::nets::BiLstm& enc,
                            const vsum::nets::Fc& head, int M, bool stride_mode) {
  const int T_s = static_cast<int>(H.rows());
  const int T_p = ((T_s + M - 1) / M) * M;
  const int L = T_p / M;
  Vector scores = Vector::Zero(T_s);
  for (int m = 0; m < M; ++m) {
    Matrix part = Matrix::Zero(L, H.cols());
    std::vector<int> src(static_cast<std::size_t>(L));
    for (int j = 0; j < L; ++j) {
      const int q = stride_mode ? m + j * M : m * L + j;
      src[static_cast<std::size_t>(j)] = q;
      if (q < T_s) part.row(j) = H.row(q);
    }
    const Matrix hidden = bilstm_seq(enc, part);
    const Matrix sc = fc_rows(head, hidden);
    for (int j = 0; j < L; ++j)
      if (src[static_cast<std::size_t>(j)] < T_s) scores[src[static_cast<std::size_t>(j)]] = sc(j, 0);
  }
  return scores;
}

struct CsnetOut {
  Vector p, p1, p2, d;
};

inline CsnetOut csnet_forward(const Matrix& X, const vsum::csnet::CSNetParams& params,
                              const vsum::csnet::CSNetConfig& cfg) {
  const int T = static_cast<int>(X.rows());
  const int M = cfg.single_stream ? 1 : cfg.M;
  const Matrix H = fc_rows(params.input_proj, X);

  CsnetOut out;
  Vector d = Vector::Zero(T);
  if (cfg.use_difference) {
    d = refimpl::difference_attention(X, params, cfg);
    out.d = d;
  }

  const Vector c_raw = stream_scores(H, params.chunk_enc, params.chunk_head, M, false);

  if (cfg.single_stream) {
    out.p = Vector(T);
    for (int t = 0; t < T; ++t) out.p[t] = sigmoid(c_raw[t] + d[t]);
    return out;
  }

  const vsum::nets::BiLstm& senc = cfg.share_streams ? params.chunk_enc : params.stride_enc;
  const vsum::nets::Fc& shead = cfg.share_streams ? params.chunk_head : params.stride_head;
  const Vector s_raw = stream_scores(H, senc, shead, M, true);

  out.p1 = Vector(T);
  out.p2 = Vector(T);
  for (int t = 0; t < T; ++t) {
    out.p1[t] = sigmoid(c_raw[t] + d[t]);
    out.p2[t] = sigmoid(s_raw[t] + d[t]);
  }

  out.p = Vector(T);
  if (cfg.fusion_mode == vsum::csnet::FusionMode::convex) {
    const double mx = std::max(params.fusion(0, 0), params.fusion(1, 0));
    const double e1 = std::exp(params.fusion(0, 0) - mx);
    const double e2 = std::exp(params.fusion(1, 0) - mx);
    const double w1 = e1 / (e1 + e2);
    const double w2 = e2 / (e1 + e2);
    for (int t = 0; t < T; ++t) out.p[t] = w1 * out.p1[t] + w2 * out.p2[t];
  } else {
    for (int t = 0; t < T; ++t) {
      const double v = params.fusion(0, 0) * out.p1[t] + params.fusion(1, 0) * out.p2[t];
      out.p[t] = std::min(std::max(v, 0.0), 1.0);
    }
  }
  return out;
}

struct VaeOut {
  Matrix mu, logvar, e, x_hat;
};

inline VaeOut vae_forward(const Matrix& x_tilde, const vsum::adversarial::VaeGanParams& params,
                          const vsum::adversarial::VaeGanConfig& cfg, const Matrix& eta) {
  VaeOut v;
  const Matrix henc = lstm_seq(params.enc, x_tilde, false);
  v.mu = fc_rows(params.enc_mu, henc);
  v.logvar = fc_rows(params.enc_logvar, henc);
  v.e = Matrix(v.mu.rows(), v.mu.cols());
  for (Eigen::Index r = 0; r < v.e.rows(); ++r)
    for (Eigen::Index c = 0; c < v.e.cols(); ++c)
      v.e(r, c) = v.mu(r, c) + std::exp(0.5 * v.logvar(r, c)) * eta(r, c);
  const Matrix hdec = lstm_seq(params.dec, v.e, false);
  v.x_hat = fc_rows(params.dec_out, hdec);
  return v;
}

struct DiscOut {
  Vector h_last;
  double logit = 0.0;
};

inline DiscOut discriminate(const Matrix& x, const vsum::adversarial::VaeGanParams& params) {
  const Matrix h = lstm_seq(params.disc, x, false);
  DiscOut d;
  d.h_last = h.row(h.rows() - 1).transpose();
  double acc = params.disc_head.b(0, 0);
  for (Eigen::Index i = 0; i < d.h_last.size(); ++i) acc += params.disc_head.W(0, i) * d.h_last[i];
  d.logit = acc;
  return d;
}

}  // namespace refimpl
