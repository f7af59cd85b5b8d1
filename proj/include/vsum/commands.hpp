#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsum/checkpoint.hpp"
#include "vsum/common.hpp"
#include "vsum/config.hpp"
#include "vsum/dataio.hpp"
#include "vsum/evalmetrics.hpp"
#include "vsum/pipeline.hpp"
#include "vsum/plotting.hpp"
#include "vsum/trainer.hpp"

namespace vsum::commands {

namespace fs = std::filesystem;

// Relative paths that do not exist locally are retried under VSUM_DATA_ROOT.
inline fs::path resolve_data_path(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  if (const char* root = std::getenv("VSUM_DATA_ROOT"); root && *root) {
    const fs::path under = fs::path(root) / path;
    if (fs::exists(under)) return under;
  }
  return path;
}

inline void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline nlohmann::ordered_json run_meta(const config::RunConfig& rc, const std::string& command) {
  nlohmann::ordered_json j;
  j["tool"] = "vsum";
  j["command"] = command;
  j["config"] = config::config_json(rc);
  return j;
}

inline void run_synth(const config::RunConfig& rc, const std::string& out_dir) {
  const dataio::Dataset ds = dataio::generate_synthetic(rc.synth);
  dataio::write_dataset(ds, out_dir);
  nlohmann::ordered_json meta = run_meta(rc, "synth");
  meta["seed"] = rc.synth.seed;
  write_json_file(fs::path(out_dir) / "run_config.json", meta);
}

inline int dataset_feature_dim(const dataio::Dataset& ds) {
  const int d = ds.videos.front().feature_dim();
  for (const auto& v : ds.videos)
    if (v.feature_dim() != d)
      throw ValidationError("dataset mixes feature widths (video " + v.id + ")");
  return d;
}

inline void run_train(const config::RunConfig& rc_in, const std::string& data_path,
                      const std::string& out_dir) {
  const dataio::Dataset ds = dataio::load_dataset(resolve_data_path(data_path));
  if (ds.videos.empty()) throw ValidationError("train: empty dataset");
  config::RunConfig rc = rc_in;
  rc.csnet.D_in = dataset_feature_dim(ds);
  rc.vae.D_in = rc.csnet.D_in;

  nlohmann::ordered_json meta = run_meta(rc, "train");
  meta["seed"] = rc.train.seed;
  meta["dataset"] = ds.name;
  meta["n_videos"] = ds.videos.size();
  meta["D_in"] = rc.csnet.D_in;

  const trainer::TrainResult res =
      trainer::train(ds, rc.csnet, rc.vae, rc.train, out_dir, meta);
  trainer::write_history_jsonl(res.history, fs::path(out_dir) / "history.jsonl");
}

// Rebuilds the training-time configuration from a checkpoint's config echo.
inline config::RunConfig checkpoint_config(const nlohmann::json& meta) {
  if (!meta.contains("config"))
    throw FormatError("checkpoint metadata lacks a config echo");
  config::RunConfig rc;
  config::apply_json(rc, meta["config"]);
  config::validate(rc);
  return rc;
}

struct LoadedModel {
  config::RunConfig train_rc;  // as echoed by the checkpoint
  csnet::CSNetParams scorer;
  adversarial::VaeGanParams vae;
  csnet::CSNetConfig eff_scorer_cfg;  // ablation flags applied
};

inline LoadedModel load_model(const fs::path& ckpt_dir, int D_in) {
  if (!checkpoint::exists(ckpt_dir))
    throw IoError("checkpoint not found: " + ckpt_dir.string());
  LoadedModel m;
  const nlohmann::json meta = checkpoint::read_meta(ckpt_dir);
  m.train_rc = checkpoint_config(meta);
  m.train_rc.csnet.D_in = D_in;
  m.train_rc.vae.D_in = D_in;
  Rng rng(0);
  m.scorer = csnet::make_csnet_params(m.train_rc.csnet, rng);
  m.vae = adversarial::make_vaegan_params(m.train_rc.vae, rng);
  checkpoint::load(ckpt_dir, m.scorer, m.vae);
  m.eff_scorer_cfg = trainer::effective_scorer_config(m.train_rc.csnet, m.train_rc.train.flags);
  return m;
}

inline void require_user_summaries(const dataio::Dataset& ds) {
  for (const auto& v : ds.videos)
    if (!v.user_summaries)
      throw ValidationError("evaluation requires user_summaries (video " + v.id + ")");
}

inline void write_report_files(const eval::EvalReport& rep, const nlohmann::ordered_json& meta,
                               const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());

  std::ofstream jl(out_dir / "report.jsonl");
  if (!jl) throw IoError("cannot write report.jsonl");
  {
    nlohmann::ordered_json m = meta;
    m["record"] = "meta";
    m["setting"] = eval::setting_name(rep.setting);
    m["eval_seed"] = rep.seed;
    m["final_f"] = rep.final_f;
    jl << m.dump() << "\n";
  }
  for (const auto& v : rep.per_video) {
    nlohmann::ordered_json j;
    j["record"] = "video";
    j["split"] = v.split;
    j["id"] = v.id;
    j["P"] = v.P;
    j["R"] = v.R;
    j["F"] = v.F;
    jl << j.dump() << "\n";
  }
  for (std::size_t i = 0; i < rep.split_means.size(); ++i) {
    nlohmann::ordered_json j;
    j["record"] = "split";
    j["split"] = i;
    j["mean_f"] = rep.split_means[i];
    j["n_train"] = rep.splits[i].train_ids.size();
    j["n_test"] = rep.splits[i].test_ids.size();
    jl << j.dump() << "\n";
  }

  std::ofstream txt(out_dir / "report.txt");
  if (!txt) throw IoError("cannot write report.txt");
  txt << "setting: " << eval::setting_name(rep.setting) << "   seed: " << rep.seed << "\n\n";
  txt << std::left << std::setw(6) << "split" << std::setw(28) << "video" << std::right
      << std::setw(8) << "P" << std::setw(8) << "R" << std::setw(9) << "F" << "\n";
  txt << std::string(59, '-') << "\n";
  txt << std::fixed << std::setprecision(3);
  for (const auto& v : rep.per_video)
    txt << std::left << std::setw(6) << v.split << std::setw(28) << v.id << std::right
        << std::setw(8) << v.P << std::setw(8) << v.R << std::setw(9) << v.F << "\n";
  txt << std::string(59, '-') << "\n";
  for (std::size_t i = 0; i < rep.split_means.size(); ++i)
    txt << "split " << i << " mean F: " << rep.split_means[i] << "\n";
  txt << "final F: " << rep.final_f << "\n";
}

inline void run_eval(const config::RunConfig& rc, const std::string& data_path,
                     const std::vector<std::string>& aux_paths, const std::string& ckpt_dir,
                     const std::string& out_dir) {
  const dataio::Dataset ds = dataio::load_dataset(resolve_data_path(data_path));
  if (ds.videos.empty()) throw ValidationError("eval: empty dataset");
  require_user_summaries(ds);

  std::vector<dataio::Dataset> aux;
  for (const auto& p : aux_paths) aux.push_back(dataio::load_dataset(resolve_data_path(p)));

  const LoadedModel model = load_model(resolve_data_path(ckpt_dir), dataset_feature_dim(ds));

  const std::vector<eval::Split> splits =
      eval::make_splits(ds, aux, rc.eval.setting, rc.eval.n_repeats, rc.eval.seed);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) index[eval::qualified_id(ds, i)] = i;

  std::vector<eval::VideoResult> results;
  for (std::size_t f = 0; f < splits.size(); ++f) {
    for (const std::string& qid : splits[f].test_ids) {
      const auto it = index.find(qid);
      if (it == index.end()) throw ValidationError("eval: unknown test id " + qid);
      const dataio::VideoRecord& v = ds.videos[it->second];
      const pipeline::VideoSummary s =
          pipeline::score_and_select(v, model.scorer, model.eff_scorer_cfg, rc.eval);
      const eval::PRF prf = eval::evaluate_video_prf(s.selection.frame_mask, *v.user_summaries,
                                                     ds.kind, rc.eval.synthetic_agg);
      results.push_back({qid, static_cast<int>(f), prf.P, prf.R, prf.F});
    }
  }

  const eval::EvalReport rep = eval::report(rc.eval.setting, rc.eval.seed, splits, results);
  nlohmann::ordered_json meta = run_meta(rc, "eval");
  meta["checkpoint"] = ckpt_dir;
  meta["dataset"] = ds.name;
  write_report_files(rep, meta, out_dir);
}

struct AblationRow {
  int exp = 0;  // 1-based, ablation_matrix() order
  trainer::AblationFlags flags;
  std::vector<double> f_scores;  // one per seed
  double mean_f = 0.0;
};

// Trains every flag combination on the whole bundle and scores every video,
// repeated over seeds, so flag contributions can be compared side by side.
inline std::vector<AblationRow> run_ablate(const config::RunConfig& rc_in,
                                           const std::string& data_path,
                                           const std::string& out_dir) {
  const dataio::Dataset ds = dataio::load_dataset(resolve_data_path(data_path));
  if (ds.videos.empty()) throw ValidationError("ablate: empty dataset");
  require_user_summaries(ds);
  config::RunConfig rc = rc_in;
  rc.csnet.D_in = dataset_feature_dim(ds);
  rc.vae.D_in = rc.csnet.D_in;

  const auto rows = trainer::ablation_matrix();
  std::vector<AblationRow> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    AblationRow row;
    row.exp = static_cast<int>(i) + 1;
    row.flags = rows[i];
    for (int s = 0; s < rc.ablate.n_seeds; ++s) {
      trainer::TrainConfig tc = rc.train;
      tc.flags = rows[i];
      tc.seed = rc.train.seed + static_cast<std::uint64_t>(s);
      const trainer::TrainResult res = trainer::train(ds, rc.csnet, rc.vae, tc);
      const csnet::CSNetConfig eff = trainer::effective_scorer_config(rc.csnet, rows[i]);
      double f_sum = 0.0;
      for (const auto& v : ds.videos) {
        const pipeline::VideoSummary vs =
            pipeline::score_and_select(v, res.state.scorer, eff, rc.eval);
        f_sum += eval::evaluate_video(vs.selection.frame_mask, *v.user_summaries, ds.kind,
                                      rc.eval.synthetic_agg);
      }
      row.f_scores.push_back(f_sum / static_cast<double>(ds.videos.size()));
    }
    row.mean_f = 0.0;
    for (double f : row.f_scores) row.mean_f += f;
    row.mean_f /= static_cast<double>(row.f_scores.size());
    out.push_back(row);
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir);

  std::ofstream jl(fs::path(out_dir) / "ablation.jsonl");
  if (!jl) throw IoError("cannot write ablation.jsonl");
  {
    nlohmann::ordered_json m = run_meta(rc, "ablate");
    m["record"] = "meta";
    m["dataset"] = ds.name;
    jl << m.dump() << "\n";
  }
  for (const auto& row : out) {
    nlohmann::ordered_json j;
    j["record"] = "row";
    j["exp"] = row.exp;
    j["use_csnet"] = row.flags.use_csnet;
    j["use_difference"] = row.flags.use_difference;
    j["use_variance_loss"] = row.flags.use_variance_loss;
    j["f_scores"] = row.f_scores;
    j["mean_f"] = row.mean_f;
    jl << j.dump() << "\n";
  }

  std::ofstream txt(fs::path(out_dir) / "ablation.txt");
  if (!txt) throw IoError("cannot write ablation.txt");
  txt << std::left << std::setw(8) << "Exp." << std::setw(7) << "CSNet" << std::setw(12)
      << "Difference" << std::setw(14) << "VarianceLoss" << std::right << std::setw(10)
      << "F-score" << "\n";
  txt << std::string(51, '-') << "\n";
  txt << std::fixed << std::setprecision(2);
  for (const auto& row : out) {
    txt << std::left << std::setw(8) << ("Exp." + std::to_string(row.exp)) << std::setw(7)
        << (row.flags.use_csnet ? "x" : "") << std::setw(12)
        << (row.flags.use_difference ? "x" : "") << std::setw(14)
        << (row.flags.use_variance_loss ? "x" : "") << std::right << std::setw(10) << row.mean_f
        << "\n";
  }
  return out;
}

inline void run_plot(const config::RunConfig& rc, const std::string& data_path,
                     const std::string& ckpt_dir, const std::string& out_dir) {
  const dataio::Dataset ds = dataio::load_dataset(resolve_data_path(data_path));
  if (ds.videos.empty()) throw ValidationError("plot: empty dataset");
  const LoadedModel model = load_model(resolve_data_path(ckpt_dir), dataset_feature_dim(ds));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir);

  std::ofstream jl(fs::path(out_dir) / "series.jsonl");
  if (!jl) throw IoError("cannot write series.jsonl");
  {
    nlohmann::ordered_json m = run_meta(rc, "plot");
    m["record"] = "meta";
    m["checkpoint"] = ckpt_dir;
    jl << m.dump() << "\n";
  }

  const int n = std::min<int>(rc.plot.max_videos, static_cast<int>(ds.videos.size()));
  for (int i = 0; i < n; ++i) {
    const dataio::VideoRecord& v = ds.videos[static_cast<std::size_t>(i)];
    const pipeline::VideoSummary s =
        pipeline::score_and_select(v, model.scorer, model.eff_scorer_cfg, rc.eval);

    std::ofstream svg(fs::path(out_dir) / (v.id + ".svg"));
    if (!svg) throw IoError("cannot write svg for " + v.id);
    svg << plotting::video_svg(v, s, rc.plot.width, rc.plot.height);

    nlohmann::ordered_json j;
    j["record"] = "video";
    j["id"] = v.id;
    j["p"] = std::vector<double>(s.scores.p.data(), s.scores.p.data() + s.scores.p.size());
    if (s.scores.d.size() > 0)
      j["d"] = std::vector<double>(s.scores.d.data(), s.scores.d.data() + s.scores.d.size());
    if (v.gtscore) {
      std::vector<double> gt;
      for (Eigen::Index t = 0; t < v.gtscore->size(); ++t)
        gt.push_back(static_cast<double>((*v.gtscore)[t]));
      j["gtscore"] = gt;
    }
    std::vector<int> selected;
    for (std::size_t t = 0; t < v.picks.size(); ++t)
      selected.push_back(s.selection.frame_mask[static_cast<std::size_t>(v.picks[t])] ? 1 : 0);
    j["selected"] = selected;
    j["shots"] = s.shots.intervals;
    j["chosen_shots"] = s.selection.chosen_shots;
    jl << j.dump() << "\n";
  }
}

}  // namespace vsum::commands
