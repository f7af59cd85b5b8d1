#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vsum/autodiff.hpp"
#include "vsum/common.hpp"
#include "vsum/nets.hpp"
#include "vsum/rng.hpp"

namespace vsum::csnet {

enum class BoundaryMode { zero_pad, clamp };
enum class FusionMode { convex, affine };

inline const char* boundary_name(BoundaryMode m) {
  return m == BoundaryMode::zero_pad ? "zero-pad" : "clamp";
}
inline BoundaryMode boundary_from_name(const std::string& s) {
  if (s == "zero-pad") return BoundaryMode::zero_pad;
  if (s == "clamp") return BoundaryMode::clamp;
  throw ConfigError("unknown boundary_mode: " + s);
}
inline const char* fusion_name(FusionMode m) {
  return m == FusionMode::convex ? "convex" : "affine";
}
inline FusionMode fusion_from_name(const std::string& s) {
  if (s == "convex") return FusionMode::convex;
  if (s == "affine") return FusionMode::affine;
  throw ConfigError("unknown fusion_mode: " + s);
}

struct CSNetConfig {
  int M = 4;
  int D_in = 0;
  int D_h = 256;
  std::vector<int> strides = {1, 2, 4};
  BoundaryMode boundary_mode = BoundaryMode::zero_pad;
  FusionMode fusion_mode = FusionMode::convex;
  // Stride stream reuses the chunk stream's encoder and head when set.
  bool share_streams = false;
  // Ablation knobs: drop the difference term, or run a plain single-stream
  // scorer (one encoder over the whole sequence, no partitions, no fusion).
  bool use_difference = true;
  bool single_stream = false;

  void check() const {
    if (M < 1) throw ConfigError("csnet: M must be >= 1");
    if (D_in < 1) throw ConfigError("csnet: D_in must be >= 1");
    if (D_h < 1) throw ConfigError("csnet: D_h must be >= 1");
    for (std::size_t i = 0; i < strides.size(); ++i) {
      if (strides[i] < 1) throw ConfigError("csnet: strides must be positive");
      for (std::size_t j = i + 1; j < strides.size(); ++j)
        if (strides[i] == strides[j]) throw ConfigError("csnet: strides must be distinct");
    }
  }
};

struct CSNetParams {
  nets::Fc input_proj;             // D_in -> D_h
  nets::BiLstm chunk_enc;          // D_h -> D_h per direction
  nets::Fc chunk_head;             // 2*D_h -> 1
  nets::BiLstm stride_enc;
  nets::Fc stride_head;
  std::vector<nets::Fc> diff_proj; // one D_in -> 1 projection per stride
  Matrix fusion;                   // [2 x 1] scalars

  void collect(nets::ParamSet& ps, const std::string& prefix) {
    input_proj.collect(ps, prefix + ".input_proj");
    chunk_enc.collect(ps, prefix + ".chunk_enc");
    chunk_head.collect(ps, prefix + ".chunk_head");
    stride_enc.collect(ps, prefix + ".stride_enc");
    stride_head.collect(ps, prefix + ".stride_head");
    for (std::size_t i = 0; i < diff_proj.size(); ++i)
      diff_proj[i].collect(ps, prefix + ".diff_proj." + std::to_string(i));
    ps.add(prefix + ".fusion", fusion);
  }
};

inline CSNetParams make_csnet_params(const CSNetConfig& cfg, Rng& rng) {
  cfg.check();
  CSNetParams p;
  p.input_proj = nets::make_fc(cfg.D_in, cfg.D_h, rng);
  p.chunk_enc = nets::make_bilstm(cfg.D_h, cfg.D_h, rng);
  p.chunk_head = nets::make_fc(2 * cfg.D_h, 1, rng);
  p.stride_enc = nets::make_bilstm(cfg.D_h, cfg.D_h, rng);
  p.stride_head = nets::make_fc(2 * cfg.D_h, 1, rng);
  for (std::size_t i = 0; i < cfg.strides.size(); ++i)
    p.diff_proj.push_back(nets::make_fc(cfg.D_in, 1, rng));
  p.fusion = Matrix(2, 1);
  p.fusion << 0.5, 0.5;
  return p;
}

struct ScoreSequence {
  Vector p;        // [T_s], fused scores
  Vector p1, p2;   // per-stream scores; empty in single-stream mode
  Vector d;        // difference attention values; empty when disabled
};

inline int padded_length(int T_s, int M) { return ((T_s + M - 1) / M) * M; }

// Source padded position for each concatenated (part-major) position.
// Chunk parts are consecutive blocks; stride parts interleave at interval M.
inline std::vector<int> partition_map(int T_p, int M, bool stride_mode) {
  if (M < 1 || T_p < 1 || T_p % M != 0) throw ShapeError("partition_map: T_p must be a positive multiple of M");
  const int L = T_p / M;
  std::vector<int> map(static_cast<std::size_t>(T_p));
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < L; ++j)
      map[static_cast<std::size_t>(m * L + j)] = stride_mode ? m + j * M : m * L + j;
  return map;
}

namespace detail {
inline std::vector<Matrix> partition(const Matrix& x, int M, bool stride_mode) {
  const int T = static_cast<int>(x.rows());
  if (M < 1) throw ConfigError("partition: M must be >= 1");
  if (M > T) throw ConfigError("partition: M exceeds sequence length");
  if (T % M != 0) throw ShapeError("partition: sequence length not divisible by M");
  const int L = T / M;
  const auto map = partition_map(T, M, stride_mode);
  std::vector<Matrix> parts(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    Matrix part(L, x.cols());
    for (int j = 0; j < L; ++j) part.row(j) = x.row(map[static_cast<std::size_t>(m * L + j)]);
    parts[static_cast<std::size_t>(m)] = std::move(part);
  }
  return parts;
}
}  // namespace detail

inline std::vector<Matrix> chunk_partition(const Matrix& x, int M) {
  return detail::partition(x, M, false);
}

inline std::vector<Matrix> stride_partition(const Matrix& x, int M) {
  return detail::partition(x, M, true);
}

enum class PartitionMode { chunk, stride };

// Restores per-frame values computed on partitioned parts to original frame
// order; positions past T_s (padding) are dropped.
inline Vector reassemble(const std::vector<Vector>& parts, PartitionMode mode, int T_s, int M) {
  if (static_cast<int>(parts.size()) != M) throw ShapeError("reassemble: expected M parts");
  const int T_p = padded_length(T_s, M);
  const int L = T_p / M;
  for (const auto& part : parts)
    if (static_cast<int>(part.size()) != L) throw ShapeError("reassemble: part length mismatch");
  const auto map = partition_map(T_p, M, mode == PartitionMode::stride);
  Vector padded(T_p);
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < L; ++j) padded[map[static_cast<std::size_t>(m * L + j)]] = parts[static_cast<std::size_t>(m)][j];
  return padded.head(T_s);
}

struct CSNetVars {
  nets::FcVar input_proj;
  nets::BiLstmVar chunk_enc;
  nets::FcVar chunk_head;
  nets::BiLstmVar stride_enc;
  nets::FcVar stride_head;
  std::vector<nets::FcVar> diff_proj;
  ad::Var fusion;

  void vars(std::vector<ad::Var>& out) const {
    input_proj.vars(out);
    chunk_enc.vars(out);
    chunk_head.vars(out);
    stride_enc.vars(out);
    stride_head.vars(out);
    for (const auto& dp : diff_proj) dp.vars(out);
    out.push_back(fusion);
  }
};

inline CSNetVars put(ad::Tape& t, const CSNetParams& p) {
  CSNetVars v;
  v.input_proj = nets::put(t, p.input_proj);
  v.chunk_enc = nets::put(t, p.chunk_enc);
  v.chunk_head = nets::put(t, p.chunk_head);
  v.stride_enc = nets::put(t, p.stride_enc);
  v.stride_head = nets::put(t, p.stride_head);
  for (const auto& dp : p.diff_proj) v.diff_proj.push_back(nets::put(t, dp));
  v.fusion = t.param(p.fusion);
  return v;
}

struct ScoreVars {
  ad::Var p;
  ad::Var p1, p2;
  ad::Var d;
  bool has_streams = false;
  bool has_diff = false;
};

namespace detail {

// Per-part encoder + head scores, gathered straight from the projected
// sequence H [T_s x D_h]; padded positions pull zero rows.
inline std::vector<ad::Var> stream_scores(ad::Tape& t, ad::Var H, const nets::BiLstmVar& enc,
                                          const nets::FcVar& head, int T_s, int M, int D_h,
                                          bool stride_mode) {
  const int T_p = padded_length(T_s, M);
  const int L = T_p / M;
  const auto map = partition_map(T_p, M, stride_mode);
  std::vector<ad::Var> parts;
  parts.reserve(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    std::vector<int> idx(static_cast<std::size_t>(L));
    for (int j = 0; j < L; ++j) {
      const int q = map[static_cast<std::size_t>(m * L + j)];
      idx[static_cast<std::size_t>(j)] = q < T_s ? q : -1;
    }
    ad::Var part = ad::rows_gather(H, std::move(idx));
    ad::Var hidden = nets::bilstm_sequence(t, enc, part, D_h);
    parts.push_back(nets::fc_rows(head, hidden));
  }
  return parts;
}

// Concatenated part scores back to original order, pads dropped: [T_s x 1].
inline ad::Var reassemble_scores(ad::Tape& t, const std::vector<ad::Var>& parts, int T_s, int M,
                                 bool stride_mode) {
  ad::Var cat = ad::concat_rows(parts);
  const int T_p = padded_length(T_s, M);
  const int L = T_p / M;
  const auto map = partition_map(T_p, M, stride_mode);
  std::vector<int> inverse(static_cast<std::size_t>(T_p), -1);
  for (int pos = 0; pos < T_p; ++pos) inverse[static_cast<std::size_t>(map[static_cast<std::size_t>(pos)])] = pos;
  std::vector<int> perm(static_cast<std::size_t>(T_s));
  for (int q = 0; q < T_s; ++q) perm[static_cast<std::size_t>(q)] = inverse[static_cast<std::size_t>(q)];
  return ad::rows_gather(cat, std::move(perm));
}

// d_t = sum over strides of FC(|x_{t+k} - x_t|), on raw features: [T_s x 1].
inline ad::Var difference_term(ad::Tape& t, ad::Var X, const CSNetVars& pv,
                               const CSNetConfig& cfg, int T_s) {
  ad::Var d;
  bool first = true;
  for (std::size_t s = 0; s < cfg.strides.size(); ++s) {
    const int k = cfg.strides[s];
    if (k >= T_s) throw ConfigError("difference_attention: stride " + std::to_string(k) +
                                    " must be < sequence length " + std::to_string(T_s));
    std::vector<int> shift(static_cast<std::size_t>(T_s));
    std::vector<int> keep(static_cast<std::size_t>(T_s));
    for (int i = 0; i < T_s; ++i) {
      const bool in_range = i + k < T_s;
      shift[static_cast<std::size_t>(i)] =
          in_range ? i + k : (cfg.boundary_mode == BoundaryMode::clamp ? T_s - 1 : i);
      keep[static_cast<std::size_t>(i)] =
          (in_range || cfg.boundary_mode == BoundaryMode::clamp) ? i : -1;
    }
    ad::Var shifted = ad::rows_gather(X, std::move(shift));
    ad::Var diff = ad::abs_(ad::sub(shifted, X));
    // zero-pad boundary: the whole difference row becomes zero
    diff = ad::rows_gather(diff, std::move(keep));
    ad::Var dk = nets::fc_rows(pv.diff_proj[s], diff);
    d = first ? dk : ad::add(d, dk);
    first = false;
  }
  return d;
}

}  // namespace detail

// Builds the score graph on the tape. X is [T_s x D_in] (typically a
// constant node holding the video features).
inline ScoreVars build_scores(ad::Tape& t, ad::Var X, const CSNetVars& pv,
                              const CSNetConfig& cfg) {
  cfg.check();
  const int T_s = static_cast<int>(t.val(X).rows());
  if (static_cast<int>(t.val(X).cols()) != cfg.D_in)
    throw ShapeError("build_scores: feature width does not match D_in");
  const int M = cfg.single_stream ? 1 : cfg.M;
  if (M > T_s) throw ConfigError("build_scores: M exceeds sequence length");

  ad::Var H = nets::fc_rows(pv.input_proj, X);

  ScoreVars out;
  if (cfg.use_difference) {
    out.d = detail::difference_term(t, X, pv, cfg, T_s);
    out.has_diff = true;
  }

  auto with_diff = [&](ad::Var scores) {
    return cfg.use_difference ? ad::add(scores, out.d) : scores;
  };

  auto chunk_parts =
      detail::stream_scores(t, H, pv.chunk_enc, pv.chunk_head, T_s, M, cfg.D_h, false);
  ad::Var c_scores = detail::reassemble_scores(t, chunk_parts, T_s, M, false);

  if (cfg.single_stream) {
    out.p = ad::sigmoid(with_diff(c_scores));
    return out;
  }

  const nets::BiLstmVar& senc = cfg.share_streams ? pv.chunk_enc : pv.stride_enc;
  const nets::FcVar& shead = cfg.share_streams ? pv.chunk_head : pv.stride_head;
  auto stride_parts = detail::stream_scores(t, H, senc, shead, T_s, M, cfg.D_h, true);
  ad::Var s_scores = detail::reassemble_scores(t, stride_parts, T_s, M, true);

  out.p1 = ad::sigmoid(with_diff(c_scores));
  out.p2 = ad::sigmoid(with_diff(s_scores));
  out.has_streams = true;

  if (cfg.fusion_mode == FusionMode::convex) {
    ad::Var w = ad::softmax_col(pv.fusion);
    ad::Var w1 = ad::gather_elem(w, 0, 0);
    ad::Var w2 = ad::gather_elem(w, 1, 0);
    out.p = ad::add(ad::scalar_mul(w1, out.p1), ad::scalar_mul(w2, out.p2));
  } else {
    ad::Var w1 = ad::gather_elem(pv.fusion, 0, 0);
    ad::Var w2 = ad::gather_elem(pv.fusion, 1, 0);
    out.p = ad::clamp(ad::add(ad::scalar_mul(w1, out.p1), ad::scalar_mul(w2, out.p2)), 0.0, 1.0);
  }
  return out;
}

// Standalone difference attention over raw features, as a plain vector.
inline Vector difference_attention(const Matrix& x, const CSNetParams& params,
                                   const CSNetConfig& cfg) {
  ad::Tape t;
  ad::Var X = t.constant(x);
  CSNetVars pv;
  for (std::size_t i = 0; i < params.diff_proj.size(); ++i)
    pv.diff_proj.push_back(
        nets::FcVar{t.constant(params.diff_proj[i].W), t.constant(params.diff_proj[i].b)});
  ad::Var d = detail::difference_term(t, X, pv, cfg, static_cast<int>(x.rows()));
  return t.val(d).col(0);
}

// Scores a feature sequence with frozen parameters.
inline ScoreSequence forward(const Matrix& x, const CSNetParams& params, const CSNetConfig& cfg) {
  ad::Tape t;
  ad::Var X = t.constant(x);
  CSNetVars pv;
  pv.input_proj = {t.constant(params.input_proj.W), t.constant(params.input_proj.b)};
  auto put_lstm = [&](const nets::Lstm& l) {
    return nets::LstmVar{t.constant(l.W_ih), t.constant(l.W_hh), t.constant(l.b)};
  };
  pv.chunk_enc = {put_lstm(params.chunk_enc.fwd), put_lstm(params.chunk_enc.bwd)};
  pv.chunk_head = {t.constant(params.chunk_head.W), t.constant(params.chunk_head.b)};
  pv.stride_enc = {put_lstm(params.stride_enc.fwd), put_lstm(params.stride_enc.bwd)};
  pv.stride_head = {t.constant(params.stride_head.W), t.constant(params.stride_head.b)};
  for (const auto& dp : params.diff_proj)
    pv.diff_proj.push_back(nets::FcVar{t.constant(dp.W), t.constant(dp.b)});
  pv.fusion = t.constant(params.fusion);

  ScoreVars sv = build_scores(t, X, pv, cfg);
  ScoreSequence out;
  out.p = t.val(sv.p).col(0);
  for (Eigen::Index i = 0; i < out.p.size(); ++i)
    if (!std::isfinite(out.p[i]))
      throw NumericError("non-finite score at frame " + std::to_string(i));
  if (sv.has_streams) {
    out.p1 = t.val(sv.p1).col(0);
    out.p2 = t.val(sv.p2).col(0);
  }
  if (sv.has_diff) out.d = t.val(sv.d).col(0);
  return out;
}

inline ScoreSequence forward(const MatrixF& x, const CSNetParams& params, const CSNetConfig& cfg) {
  return forward(Matrix(x.cast<double>()), params, cfg);
}

}  // namespace vsum::csnet
