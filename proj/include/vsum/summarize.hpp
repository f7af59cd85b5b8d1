#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vsum/common.hpp"
#include "vsum/segment.hpp"

namespace vsum::summarize {

enum class PoolMode { mean, max, sum };

inline const char* pool_name(PoolMode m) {
  switch (m) {
    case PoolMode::mean: return "mean";
    case PoolMode::max: return "max";
    default: return "sum";
  }
}
inline PoolMode pool_from_name(const std::string& s) {
  if (s == "mean") return PoolMode::mean;
  if (s == "max") return PoolMode::max;
  if (s == "sum") return PoolMode::sum;
  throw ConfigError("unknown pool mode: " + s);
}

// Pools sampled-frame scores into one value per shot; shots with no sampled
// frame score 0.
inline Vector shot_scores(const Vector& p, const std::vector<int>& picks,
                          const segment::ShotSegmentation& seg,
                          PoolMode mode = PoolMode::mean) {
  if (p.size() != static_cast<Eigen::Index>(picks.size()))
    throw ShapeError("shot_scores: p and picks length mismatch");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(seg.intervals.size()));
  std::size_t t = 0;
  for (std::size_t s = 0; s < seg.intervals.size(); ++s) {
    const auto [start, end] = seg.intervals[s];
    double acc = 0.0;
    double mx = -std::numeric_limits<double>::infinity();
    int count = 0;
    while (t < picks.size() && picks[t] <= end) {
      if (picks[t] >= start) {
        acc += p[static_cast<Eigen::Index>(t)];
        mx = std::max(mx, p[static_cast<Eigen::Index>(t)]);
        ++count;
      }
      ++t;
    }
    if (count == 0) continue;
    switch (mode) {
      case PoolMode::mean: out[static_cast<Eigen::Index>(s)] = acc / count; break;
      case PoolMode::max: out[static_cast<Eigen::Index>(s)] = mx; break;
      case PoolMode::sum: out[static_cast<Eigen::Index>(s)] = acc; break;
    }
  }
  return out;
}

// Exact 0/1 knapsack; among optimal subsets returns the lexicographically
// smallest index set. The suffix table replays the DP arithmetic exactly, so
// the reconstruction equality test is bitwise-safe.
inline std::vector<int> knapsack_select(const std::vector<double>& values,
                                        const std::vector<int>& lengths, long budget) {
  if (values.size() != lengths.size()) throw ShapeError("knapsack: values/lengths mismatch");
  if (budget < 0) throw ValidationError("knapsack: negative budget");
  const int S = static_cast<int>(values.size());
  long total = 0;
  for (int len : lengths) {
    if (len <= 0) throw ValidationError("knapsack: lengths must be positive");
    total += len;
  }
  const long B = std::min(budget, total);

  // best[i][b]: max value using items i.. with capacity b
  std::vector<std::vector<double>> best(static_cast<std::size_t>(S + 1),
                                        std::vector<double>(static_cast<std::size_t>(B + 1), 0.0));
  for (int i = S - 1; i >= 0; --i) {
    const auto& nxt = best[static_cast<std::size_t>(i + 1)];
    auto& cur = best[static_cast<std::size_t>(i)];
    for (long b = 0; b <= B; ++b) {
      double v = nxt[static_cast<std::size_t>(b)];
      if (lengths[static_cast<std::size_t>(i)] <= b) {
        const double take = values[static_cast<std::size_t>(i)] +
                            nxt[static_cast<std::size_t>(b - lengths[static_cast<std::size_t>(i)])];
        if (take > v) v = take;
      }
      cur[static_cast<std::size_t>(b)] = v;
    }
  }

  std::vector<int> chosen;
  long b = B;
  for (int i = 0; i < S; ++i) {
    // remaining optimum 0 is achieved by the empty set, which is lex-smallest
    if (best[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)] == 0.0) break;
    const int w = lengths[static_cast<std::size_t>(i)];
    if (w <= b) {
      const double take = values[static_cast<std::size_t>(i)] +
                          best[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(b - w)];
      if (take == best[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)]) {
        chosen.push_back(i);
        b -= w;
        continue;
      }
    }
  }
  return chosen;
}

inline std::vector<std::uint8_t> to_frame_summary(const std::vector<int>& chosen,
                                                  const segment::ShotSegmentation& seg,
                                                  int n_frames) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n_frames), 0);
  for (int s : chosen) {
    if (s < 0 || s >= static_cast<int>(seg.intervals.size()))
      throw ValidationError("to_frame_summary: shot index out of range");
    const auto [start, end] = seg.intervals[static_cast<std::size_t>(s)];
    if (start < 0 || end >= n_frames) throw ValidationError("to_frame_summary: shot outside video");
    for (int f = start; f <= end; ++f) mask[static_cast<std::size_t>(f)] = 1;
  }
  return mask;
}

struct SummarySelection {
  std::vector<int> chosen_shots;
  std::vector<std::uint8_t> frame_mask;
  long budget_frames = 0;
};

// Scores shots, selects under a budget of ratio * n_frames original frames,
// and expands to a frame mask. seg is over original frames.
inline SummarySelection select_summary(const Vector& p, const std::vector<int>& picks,
                                       const segment::ShotSegmentation& seg, int n_frames,
                                       double ratio = 0.15, PoolMode mode = PoolMode::mean) {
  if (ratio < 0.0 || ratio > 1.0) throw ConfigError("select_summary: ratio must be in [0,1]");
  seg.check(n_frames);
  const Vector values = shot_scores(p, picks, seg, mode);
  std::vector<int> lengths;
  lengths.reserve(seg.intervals.size());
  for (const auto& iv : seg.intervals) lengths.push_back(iv[1] - iv[0] + 1);
  SummarySelection sel;
  sel.budget_frames = static_cast<long>(ratio * n_frames);
  sel.chosen_shots = knapsack_select(
      std::vector<double>(values.data(), values.data() + values.size()), lengths,
      sel.budget_frames);
  sel.frame_mask = to_frame_summary(sel.chosen_shots, seg, n_frames);
  return sel;
}

}  // namespace vsum::summarize
