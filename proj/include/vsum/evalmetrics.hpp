#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "vsum/common.hpp"
#include "vsum/dataio.hpp"
#include "vsum/rng.hpp"

namespace vsum::eval {

struct PRF {
  double P = 0.0;
  double R = 0.0;
  double F = 0.0;  // percent
};

namespace detail {
inline PRF fscore_counts(long overlap, long n_pred, long n_user) {
  PRF r;
  r.P = n_pred > 0 ? static_cast<double>(overlap) / static_cast<double>(n_pred) : 0.0;
  r.R = n_user > 0 ? static_cast<double>(overlap) / static_cast<double>(n_user) : 0.0;
  r.F = (r.P + r.R) > 0.0 ? 2.0 * r.P * r.R / (r.P + r.R) * 100.0 : 0.0;
  return r;
}
}  // namespace detail

inline PRF fscore(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& user) {
  if (pred.size() != user.size()) throw ShapeError("fscore: mask length mismatch");
  long overlap = 0, n_pred = 0, n_user = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    n_pred += pred[i] ? 1 : 0;
    n_user += user[i] ? 1 : 0;
    overlap += (pred[i] && user[i]) ? 1 : 0;
  }
  return detail::fscore_counts(overlap, n_pred, n_user);
}

enum class Aggregate { max, mean };

// Scores a predicted mask against every user summary and aggregates:
// summe-like takes the best user, tvsum-like the average; synthetic data
// follows the supplied aggregate (mean by default).
inline PRF evaluate_video_prf(const std::vector<std::uint8_t>& pred, const MaskMatrix& users,
                              dataio::DatasetKind kind, Aggregate synthetic_agg = Aggregate::mean) {
  const int U = static_cast<int>(users.rows());
  if (U < 1) throw ValidationError("evaluate_video: no user summaries");
  if (static_cast<std::size_t>(users.cols()) != pred.size())
    throw ShapeError("evaluate_video: mask length mismatch");

  Aggregate agg = synthetic_agg;
  if (kind == dataio::DatasetKind::summe_like) agg = Aggregate::max;
  if (kind == dataio::DatasetKind::tvsum_like) agg = Aggregate::mean;

  PRF best;
  PRF acc;
  for (int u = 0; u < U; ++u) {
    long overlap = 0, n_pred = 0, n_user = 0;
    for (Eigen::Index f = 0; f < users.cols(); ++f) {
      const bool pu = pred[static_cast<std::size_t>(f)] != 0;
      const bool uu = users(u, f) != 0;
      n_pred += pu ? 1 : 0;
      n_user += uu ? 1 : 0;
      overlap += (pu && uu) ? 1 : 0;
    }
    const PRF r = detail::fscore_counts(overlap, n_pred, n_user);
    if (u == 0 || r.F > best.F) best = r;
    acc.P += r.P;
    acc.R += r.R;
    acc.F += r.F;
  }
  if (agg == Aggregate::max) return best;
  return {acc.P / U, acc.R / U, acc.F / U};
}

inline double evaluate_video(const std::vector<std::uint8_t>& pred, const MaskMatrix& users,
                             dataio::DatasetKind kind, Aggregate synthetic_agg = Aggregate::mean) {
  return evaluate_video_prf(pred, users, kind, synthetic_agg).F;
}

enum class SplitSetting { canonical, augmented, transfer };

inline const char* setting_name(SplitSetting s) {
  switch (s) {
    case SplitSetting::canonical: return "canonical";
    case SplitSetting::augmented: return "augmented";
    default: return "transfer";
  }
}
inline SplitSetting setting_from_name(const std::string& s) {
  if (s == "canonical") return SplitSetting::canonical;
  if (s == "augmented") return SplitSetting::augmented;
  if (s == "transfer") return SplitSetting::transfer;
  throw ConfigError("unknown eval setting: " + s);
}

struct Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

inline std::string qualified_id(const dataio::Dataset& ds, std::size_t vi) {
  return ds.name + "/" + ds.videos[vi].id;
}

// Canonical: one seeded shuffle of the target, cut into n_repeats disjoint
// folds (sizes differing by at most one; earlier folds take the remainder),
// each fold serving once as the 20%-style test set. Augmented adds every
// auxiliary video to each train set. Transfer trains on the auxiliaries only
// and tests on the whole target, as a single split.
inline std::vector<Split> make_splits(const dataio::Dataset& target,
                                      const std::vector<dataio::Dataset>& aux,
                                      SplitSetting setting, int n_repeats = 5,
                                      std::uint64_t seed = 0) {
  const int n = static_cast<int>(target.videos.size());
  if (n_repeats < 1) throw ConfigError("make_splits: n_repeats must be >= 1");

  std::vector<std::string> aux_ids;
  for (const auto& ds : aux)
    for (std::size_t i = 0; i < ds.videos.size(); ++i) aux_ids.push_back(qualified_id(ds, i));

  if (setting == SplitSetting::transfer) {
    if (aux_ids.empty()) throw ValidationError("make_splits: transfer requires auxiliary datasets");
    Split s;
    s.train_ids = aux_ids;
    for (int i = 0; i < n; ++i) s.test_ids.push_back(qualified_id(target, static_cast<std::size_t>(i)));
    return {s};
  }

  if (n < n_repeats)
    throw ValidationError("make_splits: dataset too small for " + std::to_string(n_repeats) +
                          " folds");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5917));
  rng.shuffle(order);

  const int base = n / n_repeats;
  const int extra = n % n_repeats;
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(n_repeats));
  int at = 0;
  for (int f = 0; f < n_repeats; ++f) {
    const int len = base + (f < extra ? 1 : 0);
    for (int j = 0; j < len; ++j) folds[static_cast<std::size_t>(f)].push_back(order[static_cast<std::size_t>(at++)]);
  }

  std::vector<Split> splits(static_cast<std::size_t>(n_repeats));
  for (int f = 0; f < n_repeats; ++f) {
    Split& s = splits[static_cast<std::size_t>(f)];
    for (int g = 0; g < n_repeats; ++g)
      for (int vi : folds[static_cast<std::size_t>(g)]) {
        auto& dst = (g == f) ? s.test_ids : s.train_ids;
        dst.push_back(qualified_id(target, static_cast<std::size_t>(vi)));
      }
    if (setting == SplitSetting::augmented)
      s.train_ids.insert(s.train_ids.end(), aux_ids.begin(), aux_ids.end());
  }
  return splits;
}

struct VideoResult {
  std::string id;
  int split = 0;
  double P = 0.0;
  double R = 0.0;
  double F = 0.0;
};

struct EvalReport {
  SplitSetting setting = SplitSetting::canonical;
  std::uint64_t seed = 0;
  std::vector<Split> splits;
  std::vector<VideoResult> per_video;
  std::vector<double> split_means;
  double final_f = 0.0;
};

// Aggregates per-video results: split mean over its videos' F, final F the
// arithmetic mean of split means. Every split must have results.
inline EvalReport report(SplitSetting setting, std::uint64_t seed,
                         const std::vector<Split>& splits,
                         const std::vector<VideoResult>& per_video) {
  if (per_video.empty()) throw ValidationError("report: no results");
  if (splits.empty()) throw ValidationError("report: no splits");
  EvalReport r;
  r.setting = setting;
  r.seed = seed;
  r.splits = splits;
  r.per_video = per_video;
  const int k = static_cast<int>(splits.size());
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (const auto& v : per_video) {
    if (v.split < 0 || v.split >= k) throw ValidationError("report: result for unknown split");
    sums[static_cast<std::size_t>(v.split)] += v.F;
    counts[static_cast<std::size_t>(v.split)] += 1;
  }
  for (int f = 0; f < k; ++f) {
    if (counts[static_cast<std::size_t>(f)] == 0)
      throw ValidationError("report: split " + std::to_string(f) + " has no results");
    r.split_means.push_back(sums[static_cast<std::size_t>(f)] / counts[static_cast<std::size_t>(f)]);
  }
  r.final_f = std::accumulate(r.split_means.begin(), r.split_means.end(), 0.0) /
              static_cast<double>(k);
  return r;
}

}  // namespace vsum::eval
