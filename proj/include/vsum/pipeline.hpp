#pragma once

#include <algorithm>

#include "vsum/common.hpp"
#include "vsum/config.hpp"
#include "vsum/csnet.hpp"
#include "vsum/dataio.hpp"
#include "vsum/segment.hpp"
#include "vsum/summarize.hpp"

namespace vsum::pipeline {

struct VideoSummary {
  csnet::ScoreSequence scores;
  segment::ShotSegmentation shots;  // original-frame intervals
  summarize::SummarySelection selection;
};

// Uses the bundle's change points when present, otherwise segments the
// feature sequence and maps the result to original frames.
inline segment::ShotSegmentation shots_for(const dataio::VideoRecord& v,
                                           const config::EvalConfig& ec) {
  if (v.change_points) {
    segment::ShotSegmentation seg;
    seg.intervals = *v.change_points;
    seg.check(v.n_frames);
    return seg;
  }
  const Matrix x = v.features.cast<double>();
  const Matrix K = ec.kts_kernel == "rbf" ? segment::kernel_matrix_rbf(x, ec.kts_rbf_gamma)
                                          : segment::kernel_matrix(x);
  const int T_s = static_cast<int>(x.rows());
  const int ms = ec.kts_max_segments > 0 ? std::min(ec.kts_max_segments, T_s)
                                         : segment::default_max_segments(T_s);
  const segment::ShotSegmentation sampled = segment::kts_changepoints(K, ms, ec.kts_penalty);
  return segment::to_original_frames(sampled, v.picks, v.n_frames);
}

inline VideoSummary score_and_select(const dataio::VideoRecord& v,
                                     const csnet::CSNetParams& params,
                                     const csnet::CSNetConfig& eff_cfg,
                                     const config::EvalConfig& ec) {
  VideoSummary s;
  s.scores = csnet::forward(v.features, params, eff_cfg);
  s.shots = shots_for(v, ec);
  s.selection = summarize::select_summary(s.scores.p, v.picks, s.shots, v.n_frames,
                                          ec.budget_ratio, ec.pool);
  return s;
}

}  // namespace vsum::pipeline
