#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>

#include "vsum/common.hpp"
#include "vsum/dataio.hpp"
#include "vsum/pipeline.hpp"

namespace vsum::plotting {

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

// Min-max normalization to [0,1]; constant series map to 0.5.
inline Vector normalize01(const Vector& v) {
  if (v.size() == 0) return v;
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  if (hi - lo < 1e-12) return Vector::Constant(v.size(), 0.5);
  return (v.array() - lo) / (hi - lo);
}

}  // namespace detail

// One panel per video: shaded bands for selected key-shot frames, bars for
// predicted scores, dots for ground-truth scores, a polyline for the
// normalized difference-attention trace.
inline std::string video_svg(const dataio::VideoRecord& v, const pipeline::VideoSummary& s,
                             int width, int height) {
  const int T = static_cast<int>(s.scores.p.size());
  const double pad = 10.0;
  const double plot_w = width - 2 * pad;
  const double plot_h = height - 2 * pad;
  const double bw = plot_w / T;
  auto xpos = [&](int t) { return pad + bw * t; };
  auto ypos = [&](double val) { return pad + plot_h * (1.0 - std::clamp(val, 0.0, 1.0)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  // selected key-shots: band behind the sampled frames they contain
  for (int t = 0; t < T; ++t) {
    const int frame = v.picks[static_cast<std::size_t>(t)];
    if (s.selection.frame_mask[static_cast<std::size_t>(frame)]) {
      svg << "<rect x=\"" << detail::num(xpos(t)) << "\" y=\"" << detail::num(pad)
          << "\" width=\"" << detail::num(bw) << "\" height=\"" << detail::num(plot_h)
          << "\" fill=\"#ffe08a\"/>\n";
    }
  }

  // predicted score bars
  for (int t = 0; t < T; ++t) {
    const double val = s.scores.p[t];
    svg << "<rect x=\"" << detail::num(xpos(t) + 0.1 * bw) << "\" y=\"" << detail::num(ypos(val))
        << "\" width=\"" << detail::num(0.8 * bw) << "\" height=\""
        << detail::num(plot_h * std::clamp(val, 0.0, 1.0)) << "\" fill=\"#4a90d9\"/>\n";
  }

  // ground-truth dots
  if (v.gtscore) {
    for (int t = 0; t < T; ++t) {
      svg << "<circle cx=\"" << detail::num(xpos(t) + 0.5 * bw) << "\" cy=\""
          << detail::num(ypos(static_cast<double>((*v.gtscore)[t]))) << "\" r=\"1.5\" "
          << "fill=\"#2f9e44\"/>\n";
    }
  }

  // difference-attention polyline, normalized to the plot range
  if (s.scores.d.size() == T && T > 1) {
    const Vector dn = detail::normalize01(s.scores.d);
    svg << "<polyline fill=\"none\" stroke=\"#c92a2a\" stroke-width=\"1\" points=\"";
    for (int t = 0; t < T; ++t)
      svg << detail::num(xpos(t) + 0.5 * bw) << "," << detail::num(ypos(dn[t])) << " ";
    svg << "\"/>\n";
  }

  svg << "<text x=\"" << detail::num(pad) << "\" y=\"" << detail::num(pad - 2)
      << "\" font-size=\"8\" fill=\"#333\">" << v.id << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace vsum::plotting
