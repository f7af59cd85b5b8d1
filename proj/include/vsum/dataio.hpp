#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsum/common.hpp"
#include "vsum/rng.hpp"
#include "vsum/tensor_file.hpp"

namespace vsum::dataio {

enum class DatasetKind { summe_like, tvsum_like, synthetic };

inline std::string kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::summe_like: return "summe-like";
    case DatasetKind::tvsum_like: return "tvsum-like";
    case DatasetKind::synthetic: return "synthetic";
  }
  throw ConfigError("bad dataset kind");
}

inline DatasetKind kind_from_name(const std::string& s) {
  if (s == "summe-like") return DatasetKind::summe_like;
  if (s == "tvsum-like") return DatasetKind::tvsum_like;
  if (s == "synthetic") return DatasetKind::synthetic;
  throw FormatError("unknown dataset kind: " + s);
}

// Planted structure of a generated video, kept for oracle tests. Boundaries
// are segment start indices over sampled frames (first is always 0).
struct SyntheticTruth {
  std::vector<int> segment_starts;
  std::vector<std::uint8_t> important;
};

struct VideoRecord {
  std::string id;
  MatrixF features;  // T_s x D
  std::optional<VectorF> gtscore;           // T_s, values in [0,1]
  std::optional<MaskMatrix> user_summaries; // U x N_f
  std::optional<std::vector<std::array<int, 2>>> change_points;  // inclusive original-frame spans
  int n_frames = 0;
  std::vector<int> picks;  // original index of each sampled frame
  std::optional<SyntheticTruth> truth;

  int sampled_frames() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

struct Dataset {
  std::string name;
  DatasetKind kind = DatasetKind::synthetic;
  std::vector<VideoRecord> videos;
};

struct SyntheticSpec {
  int n_videos = 8;
  int t_min = 60;
  int t_max = 120;
  int feature_dim = 32;
  int n_users = 5;
  int seg_min = 3;
  int seg_max = 6;
  std::uint64_t seed = 0;
  double feature_noise = 0.05;
  double score_noise = 0.05;
  std::string name = "synthetic";

  void check() const {
    if (n_videos < 1 || t_min < 1 || t_max < t_min || feature_dim < 1 || n_users < 1 ||
        seg_min < 1 || seg_max < seg_min)
      throw ConfigError("invalid synthetic spec");
    if (feature_noise < 0 || score_noise < 0) throw ConfigError("negative noise level");
  }
};

struct Violation {
  std::string video;
  std::string field;
  std::string rule;
};

inline std::vector<Violation> validate(const Dataset& d) {
  std::vector<Violation> out;
  auto add = [&](const std::string& v, const std::string& f, const std::string& r) {
    out.push_back({v, f, r});
  };

  std::set<std::string> ids;
  for (const auto& v : d.videos) {
    if (!ids.insert(v.id).second) add(v.id, "id", "duplicate video id");

    const int t = v.sampled_frames();
    if (t < 1) add(v.id, "features", "T_s must be >= 1");
    if (v.feature_dim() < 1) add(v.id, "features", "D must be >= 1");
    if (!v.features.allFinite()) add(v.id, "features", "non-finite value");

    if (v.n_frames < 1) add(v.id, "n_frames", "must be >= 1");

    if (static_cast<int>(v.picks.size()) != t)
      add(v.id, "picks", "length must equal T_s");
    for (std::size_t i = 0; i < v.picks.size(); ++i) {
      if (v.picks[i] < 0 || v.picks[i] >= v.n_frames) {
        add(v.id, "picks", "index out of [0, n_frames)");
        break;
      }
      if (i > 0 && v.picks[i] <= v.picks[i - 1]) {
        add(v.id, "picks", "not strictly increasing");
        break;
      }
    }

    if (v.gtscore) {
      if (v.gtscore->size() != t) add(v.id, "gtscore", "length must equal T_s");
      for (Eigen::Index i = 0; i < v.gtscore->size(); ++i) {
        const float s = (*v.gtscore)(i);
        if (!(s >= 0.0f && s <= 1.0f)) {
          add(v.id, "gtscore", "score out of [0,1]");
          break;
        }
      }
    }

    if (v.user_summaries) {
      if (v.user_summaries->rows() < 1) add(v.id, "user_summaries", "needs at least one user");
      if (v.user_summaries->cols() != v.n_frames)
        add(v.id, "user_summaries", "row length must equal n_frames");
      bool binary = true;
      for (Eigen::Index i = 0; i < v.user_summaries->size() && binary; ++i)
        binary = v.user_summaries->data()[i] <= 1;
      if (!binary) add(v.id, "user_summaries", "values must be 0/1");
    }

    if (v.change_points) {
      const auto& cps = *v.change_points;
      if (cps.empty()) {
        add(v.id, "change_points", "empty interval list");
      } else {
        if (cps.front()[0] != 0) add(v.id, "change_points", "first interval must start at 0");
        if (cps.back()[1] != v.n_frames - 1)
          add(v.id, "change_points", "last interval must end at n_frames-1");
        for (std::size_t i = 0; i < cps.size(); ++i) {
          if (cps[i][0] > cps[i][1]) {
            add(v.id, "change_points", "interval start exceeds end");
            break;
          }
          if (i > 0) {
            if (cps[i][0] <= cps[i - 1][1]) {
              add(v.id, "change_points", "intervals overlap");
              break;
            }
            if (cps[i][0] != cps[i - 1][1] + 1) {
              add(v.id, "change_points", "gap between intervals");
              break;
            }
          }
        }
      }
    }
  }
  return out;
}

inline void require_valid(const Dataset& d) {
  auto violations = validate(d);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw ValidationError("dataset '" + d.name + "' invalid: video '" + v.video + "' field '" +
                          v.field + "': " + v.rule +
                          (violations.size() > 1
                               ? " (+" + std::to_string(violations.size() - 1) + " more)"
                               : ""));
  }
}

namespace detail {

inline std::filesystem::path tensor_path(const std::filesystem::path& dir, const std::string& id,
                                         const std::string& field) {
  return dir / (id + "." + field + ".ten");
}

}  // namespace detail

inline void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  if (d.videos.empty()) throw ValidationError("empty dataset");
  require_valid(d);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create bundle directory: " + dir.string());

  nlohmann::ordered_json manifest;
  manifest["name"] = d.name;
  manifest["kind"] = kind_name(d.kind);
  manifest["videos"] = nlohmann::ordered_json::array();

  for (const auto& v : d.videos) {
    nlohmann::ordered_json entry;
    entry["id"] = v.id;
    entry["n_frames"] = v.n_frames;
    std::vector<std::string> fields = {"features", "picks"};
    if (v.gtscore) fields.push_back("gtscore");
    if (v.user_summaries) fields.push_back("user_summaries");
    if (v.change_points) fields.push_back("change_points");
    entry["fields"] = fields;
    if (v.truth) {
      entry["synthetic_truth"] = {{"segment_starts", v.truth->segment_starts},
                                  {"important", v.truth->important}};
    }
    manifest["videos"].push_back(entry);

    io::write_tensor(detail::tensor_path(dir, v.id, "features"), io::from_matrix_f32(v.features));
    std::vector<std::int32_t> picks32(v.picks.begin(), v.picks.end());
    io::write_tensor(detail::tensor_path(dir, v.id, "picks"), io::from_i32_vector(picks32));
    if (v.gtscore)
      io::write_tensor(detail::tensor_path(dir, v.id, "gtscore"), io::from_vector_f32(*v.gtscore));
    if (v.user_summaries)
      io::write_tensor(detail::tensor_path(dir, v.id, "user_summaries"),
                       io::from_mask_matrix(*v.user_summaries));
    if (v.change_points)
      io::write_tensor(detail::tensor_path(dir, v.id, "change_points"),
                       io::from_i32_pairs(*v.change_points));
  }

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("missing manifest: " + manifest_path.string());

  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest parse error: " + std::string(e.what()));
  }

  Dataset d;
  try {
    d.name = manifest.at("name").get<std::string>();
    d.kind = kind_from_name(manifest.at("kind").get<std::string>());
    for (const auto& entry : manifest.at("videos")) {
      VideoRecord v;
      v.id = entry.at("id").get<std::string>();
      v.n_frames = entry.at("n_frames").get<int>();
      const auto fields = entry.at("fields").get<std::vector<std::string>>();

      auto has = [&](const char* f) {
        return std::find(fields.begin(), fields.end(), f) != fields.end();
      };
      if (!has("features") || !has("picks"))
        throw FormatError("video '" + v.id + "': features and picks are required fields");

      v.features =
          io::to_matrix_f32(io::read_tensor(detail::tensor_path(dir, v.id, "features")),
                            v.id + ".features");
      auto picks32 = io::to_i32_vector(io::read_tensor(detail::tensor_path(dir, v.id, "picks")),
                                       v.id + ".picks");
      v.picks.assign(picks32.begin(), picks32.end());
      if (has("gtscore"))
        v.gtscore = io::to_vector_f32(io::read_tensor(detail::tensor_path(dir, v.id, "gtscore")),
                                      v.id + ".gtscore");
      if (has("user_summaries"))
        v.user_summaries = io::to_mask_matrix(
            io::read_tensor(detail::tensor_path(dir, v.id, "user_summaries")),
            v.id + ".user_summaries");
      if (has("change_points"))
        v.change_points = io::to_i32_pairs(
            io::read_tensor(detail::tensor_path(dir, v.id, "change_points")),
            v.id + ".change_points");
      if (entry.contains("synthetic_truth")) {
        SyntheticTruth t;
        t.segment_starts = entry["synthetic_truth"].at("segment_starts").get<std::vector<int>>();
        t.important =
            entry["synthetic_truth"].at("important").get<std::vector<std::uint8_t>>();
        v.truth = std::move(t);
      }
      d.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest field error: " + std::string(e.what()));
  }

  require_valid(d);
  return d;
}

// Piecewise-stationary synthetic videos: per-segment feature centroids with
// i.i.d. noise, importance scores high on designated segments, and per-user
// noisy binarizations. Pure function of (spec, seed inside spec).
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.check();

  Dataset d;
  d.name = spec.name;
  d.kind = DatasetKind::synthetic;

  for (int vi = 0; vi < spec.n_videos; ++vi) {
    Rng rng(derive_seed(spec.seed, 0x5e9, static_cast<std::uint64_t>(vi)));
    VideoRecord v;
    v.id = "vid" + std::to_string(vi);

    const int t_s = static_cast<int>(rng.int_range(spec.t_min, spec.t_max));
    int n_seg = static_cast<int>(rng.int_range(spec.seg_min, spec.seg_max));
    n_seg = std::min(n_seg, std::max(1, t_s / 4));

    // Segment starts over sampled frames, min segment length 3 where possible.
    std::vector<int> starts = {0};
    if (n_seg > 1) {
      const int min_len = std::max(3, t_s / (4 * n_seg));
      std::set<int> cuts;
      int attempts = 0;
      while (static_cast<int>(cuts.size()) < n_seg - 1 && attempts < 1000) {
        ++attempts;
        const int c = static_cast<int>(rng.int_range(min_len, t_s - min_len));
        bool ok = true;
        for (int existing : cuts)
          if (std::abs(existing - c) < min_len) ok = false;
        if (ok) cuts.insert(c);
      }
      starts.insert(starts.end(), cuts.begin(), cuts.end());
      std::sort(starts.begin(), starts.end());
      n_seg = static_cast<int>(starts.size());
    }

    std::vector<int> seg_of(t_s);
    for (int s = 0; s < n_seg; ++s) {
      const int end = (s + 1 < n_seg) ? starts[s + 1] : t_s;
      for (int t = starts[s]; t < end; ++t) seg_of[t] = s;
    }

    std::vector<std::uint8_t> important(n_seg);
    for (int s = 0; s < n_seg; ++s) important[s] = rng.uniform() < 0.5 ? 1 : 0;
    if (n_seg >= 2) {
      const bool all_same =
          std::all_of(important.begin(), important.end(),
                      [&](std::uint8_t f) { return f == important[0]; });
      if (all_same) important.back() = important.back() ? 0 : 1;
    }

    // Importance must be discriminable from features alone, or no unsupervised
    // scorer could align with the planted annotations: important segments sit
    // at a smaller feature scale, the direction score-weighted reconstruction
    // favors.
    Matrix centroids(n_seg, spec.feature_dim);
    for (int s = 0; s < n_seg; ++s) {
      const double scale = important[s] ? 0.5 : 1.5;
      for (int c = 0; c < spec.feature_dim; ++c) centroids(s, c) = scale * rng.normal();
    }

    v.features.resize(t_s, spec.feature_dim);
    for (int t = 0; t < t_s; ++t)
      for (int c = 0; c < spec.feature_dim; ++c)
        v.features(t, c) =
            static_cast<float>(centroids(seg_of[t], c) + spec.feature_noise * rng.normal());

    VectorF gt(t_s);
    for (int t = 0; t < t_s; ++t) {
      const double base = important[seg_of[t]] ? 0.8 : 0.1;
      gt(t) = static_cast<float>(std::clamp(base + spec.score_noise * rng.normal(), 0.0, 1.0));
    }
    v.gtscore = gt;

    // 2fps-style sampling bookkeeping: every sampled frame covers two
    // original frames.
    v.n_frames = 2 * t_s;
    v.picks.resize(t_s);
    for (int t = 0; t < t_s; ++t) v.picks[t] = 2 * t;

    std::vector<std::array<int, 2>> cps(n_seg);
    for (int s = 0; s < n_seg; ++s) {
      const int sampled_end = (s + 1 < n_seg) ? starts[s + 1] - 1 : t_s - 1;
      cps[s] = {2 * starts[s], 2 * sampled_end + 1};
    }
    v.change_points = cps;

    MaskMatrix users(spec.n_users, v.n_frames);
    users.setZero();
    for (int u = 0; u < spec.n_users; ++u) {
      for (int s = 0; s < n_seg; ++s) {
        const double base = important[s] ? 0.8 : 0.1;
        const bool mark = base + spec.score_noise * rng.normal() > 0.5;
        if (mark)
          for (int f = cps[s][0]; f <= cps[s][1]; ++f) users(u, f) = 1;
      }
    }
    v.user_summaries = users;

    v.truth = SyntheticTruth{starts, important};
    d.videos.push_back(std::move(v));
  }
  return d;
}

// Bit-exact record comparison (tensor payloads compared by value; floats are
// finite by validation, so operator== is exact).
inline bool records_equal(const VideoRecord& a, const VideoRecord& b) {
  if (a.id != b.id || a.n_frames != b.n_frames || a.picks != b.picks) return false;
  if (a.features.rows() != b.features.rows() || a.features.cols() != b.features.cols() ||
      a.features != b.features)
    return false;
  if (a.gtscore.has_value() != b.gtscore.has_value()) return false;
  if (a.gtscore && (a.gtscore->size() != b.gtscore->size() || *a.gtscore != *b.gtscore))
    return false;
  if (a.user_summaries.has_value() != b.user_summaries.has_value()) return false;
  if (a.user_summaries &&
      (a.user_summaries->rows() != b.user_summaries->rows() ||
       a.user_summaries->cols() != b.user_summaries->cols() ||
       *a.user_summaries != *b.user_summaries))
    return false;
  if (a.change_points.has_value() != b.change_points.has_value()) return false;
  if (a.change_points && *a.change_points != *b.change_points) return false;
  return true;
}

inline bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.name != b.name || a.kind != b.kind || a.videos.size() != b.videos.size()) return false;
  for (std::size_t i = 0; i < a.videos.size(); ++i)
    if (!records_equal(a.videos[i], b.videos[i])) return false;
  return true;
}

}  // namespace vsum::dataio
