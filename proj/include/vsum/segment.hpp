#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vsum/common.hpp"

namespace vsum::segment {

// Ordered, disjoint, contiguous [start, end] intervals covering [0, n-1].
struct ShotSegmentation {
  std::vector<std::array<int, 2>> intervals;

  void check(int n) const {
    if (intervals.empty()) throw ValidationError("segmentation: no intervals");
    if (intervals.front()[0] != 0) throw ValidationError("segmentation: must start at 0");
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      if (intervals[i][0] > intervals[i][1])
        throw ValidationError("segmentation: empty interval at " + std::to_string(i));
      if (i > 0 && intervals[i][0] != intervals[i - 1][1] + 1)
        throw ValidationError("segmentation: gap or overlap at " + std::to_string(i));
    }
    if (intervals.back()[1] != n - 1) throw ValidationError("segmentation: must end at n-1");
  }
};

inline Matrix kernel_matrix(const Matrix& x) {
  if (x.rows() < 1) throw ShapeError("kernel_matrix: empty input");
  return x * x.transpose();
}

inline Matrix kernel_matrix_rbf(const Matrix& x, double gamma) {
  if (x.rows() < 1) throw ShapeError("kernel_matrix: empty input");
  if (gamma <= 0.0) throw ConfigError("kernel_matrix: gamma must be > 0");
  const Vector sq = x.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * (x * x.transpose())).colwise() + sq;
  d2.rowwise() += sq.transpose();
  return (-gamma * d2.array()).exp();
}

// Prefix sums over the kernel: within-segment scatter in O(1) per query.
class ScatterTable {
 public:
  explicit ScatterTable(const Matrix& K) {
    if (K.rows() != K.cols()) throw ShapeError("ScatterTable: kernel must be square");
    const Eigen::Index n = K.rows();
    diag_ = Vector::Zero(n + 1);
    block_ = Matrix::Zero(n + 1, n + 1);
    for (Eigen::Index i = 0; i < n; ++i) diag_[i + 1] = diag_[i] + K(i, i);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        block_(i + 1, j + 1) = K(i, j) + block_(i, j + 1) + block_(i + 1, j) - block_(i, j);
  }

  int size() const { return static_cast<int>(diag_.size()) - 1; }

  // J(a,b) = sum_t K[t,t] - (1/len) * sum_{s,t} K[s,t] over t,s in [a,b].
  double scatter(int a, int b) const {
    if (a < 0 || b < a || b >= size()) throw ShapeError("scatter: bad interval");
    const double len = static_cast<double>(b - a + 1);
    const double d = diag_[b + 1] - diag_[a];
    const double s = block_(b + 1, b + 1) - block_(a, b + 1) - block_(b + 1, a) + block_(a, a);
    return d - s / len;
  }

 private:
  Vector diag_;
  Matrix block_;
};

// Model-selection penalty on segment count.
inline double kts_penalty(int m, int T) {
  return static_cast<double>(m) * (std::log(static_cast<double>(T) / m) + 1.0);
}

struct KtsResult {
  ShotSegmentation segmentation;
  int n_segments = 0;
  double objective = 0.0;  // total scatter + penalty_weight * g(m)
};

// Exact DP over segment count and prefix length; picks the segment count
// minimizing scatter + penalty, preferring fewer segments on ties.
inline KtsResult kts_solve(const Matrix& K, int max_segments, double penalty_weight) {
  const int T = static_cast<int>(K.rows());
  if (max_segments < 1) throw ConfigError("kts: max_segments must be >= 1");
  if (max_segments > T) throw ConfigError("kts: max_segments exceeds sequence length");
  ScatterTable st(K);

  constexpr double inf = std::numeric_limits<double>::infinity();
  // cost[m][t]: best scatter splitting the first t positions into m segments
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(max_segments + 1),
                                        std::vector<double>(static_cast<std::size_t>(T + 1), inf));
  std::vector<std::vector<int>> parent(static_cast<std::size_t>(max_segments + 1),
                                       std::vector<int>(static_cast<std::size_t>(T + 1), -1));
  for (int t = 1; t <= T; ++t) {
    cost[1][static_cast<std::size_t>(t)] = st.scatter(0, t - 1);
    parent[1][static_cast<std::size_t>(t)] = 0;
  }
  for (int m = 2; m <= max_segments; ++m) {
    for (int t = m; t <= T; ++t) {
      double best = inf;
      int arg = -1;
      for (int s = m - 1; s <= t - 1; ++s) {
        const double c = cost[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(s)] +
                         st.scatter(s, t - 1);
        if (c < best) {
          best = c;
          arg = s;
        }
      }
      cost[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)] = best;
      parent[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)] = arg;
    }
  }

  int best_m = 1;
  double best_obj = cost[1][static_cast<std::size_t>(T)] + penalty_weight * kts_penalty(1, T);
  for (int m = 2; m <= max_segments; ++m) {
    const double obj =
        cost[static_cast<std::size_t>(m)][static_cast<std::size_t>(T)] +
        penalty_weight * kts_penalty(m, T);
    if (obj < best_obj) {
      best_obj = obj;
      best_m = m;
    }
  }

  KtsResult r;
  r.n_segments = best_m;
  r.objective = best_obj;
  std::vector<int> bounds;  // exclusive end positions, reversed
  int t = T;
  for (int m = best_m; m >= 1; --m) {
    bounds.push_back(t);
    t = parent[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)];
  }
  int start = 0;
  for (auto it = bounds.rbegin(); it != bounds.rend(); ++it) {
    r.segmentation.intervals.push_back({start, *it - 1});
    start = *it;
  }
  r.segmentation.check(T);
  return r;
}

inline ShotSegmentation kts_changepoints(const Matrix& K, int max_segments,
                                         double penalty_weight) {
  return kts_solve(K, max_segments, penalty_weight).segmentation;
}

inline int default_max_segments(int T_s) { return (T_s + 9) / 10; }

// Maps sampled-index intervals to original-frame intervals. A boundary after
// sampled index i lands at floor((picks[i] + picks[i+1]) / 2); the first
// interval starts at frame 0 and the last extends to n_frames-1.
inline ShotSegmentation to_original_frames(const ShotSegmentation& seg,
                                           const std::vector<int>& picks, int n_frames) {
  const int T_s = static_cast<int>(picks.size());
  if (T_s < 1) throw ValidationError("to_original_frames: empty picks");
  seg.check(T_s);
  for (int i = 0; i < T_s; ++i) {
    if (picks[static_cast<std::size_t>(i)] < 0 || picks[static_cast<std::size_t>(i)] >= n_frames)
      throw ValidationError("to_original_frames: pick out of range");
    if (i > 0 && picks[static_cast<std::size_t>(i)] <= picks[static_cast<std::size_t>(i - 1)])
      throw ValidationError("to_original_frames: picks must be strictly increasing");
  }
  ShotSegmentation out;
  int start = 0;
  for (std::size_t i = 0; i < seg.intervals.size(); ++i) {
    int end;
    if (i + 1 == seg.intervals.size()) {
      end = n_frames - 1;
    } else {
      const int se = seg.intervals[i][1];
      end = (picks[static_cast<std::size_t>(se)] + picks[static_cast<std::size_t>(se + 1)]) / 2;
    }
    out.intervals.push_back({start, end});
    start = end + 1;
  }
  out.check(n_frames);
  return out;
}

}  // namespace vsum::segment
