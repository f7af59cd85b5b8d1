#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsum/adversarial.hpp"
#include "vsum/common.hpp"
#include "vsum/csnet.hpp"
#include "vsum/dataio.hpp"
#include "vsum/evalmetrics.hpp"
#include "vsum/summarize.hpp"
#include "vsum/trainer.hpp"

namespace vsum::config {

struct EvalConfig {
  eval::SplitSetting setting = eval::SplitSetting::canonical;
  int n_repeats = 5;
  std::uint64_t seed = 0;
  double budget_ratio = 0.15;
  summarize::PoolMode pool = summarize::PoolMode::mean;
  eval::Aggregate synthetic_agg = eval::Aggregate::mean;
  double kts_penalty = 1.0;
  int kts_max_segments = 0;  // 0: ceil(T_s / 10)
  std::string kts_kernel = "linear";
  double kts_rbf_gamma = 1.0;

  void check() const {
    if (n_repeats < 1) throw ConfigError("eval: n_repeats must be >= 1");
    if (budget_ratio < 0.0 || budget_ratio > 1.0)
      throw ConfigError("eval: budget_ratio must be in [0,1]");
    if (kts_penalty < 0.0) throw ConfigError("eval: kts_penalty must be >= 0");
    if (kts_max_segments < 0) throw ConfigError("eval: kts_max_segments must be >= 0");
    if (kts_kernel != "linear" && kts_kernel != "rbf")
      throw ConfigError("eval: kts_kernel must be linear or rbf");
    if (kts_rbf_gamma <= 0.0) throw ConfigError("eval: kts_rbf_gamma must be > 0");
  }
};

struct AblateConfig {
  int n_seeds = 3;

  void check() const {
    if (n_seeds < 1) throw ConfigError("ablate: n_seeds must be >= 1");
  }
};

struct PlotConfig {
  int max_videos = 4;
  int width = 900;
  int height = 220;

  void check() const {
    if (max_videos < 1) throw ConfigError("plot: max_videos must be >= 1");
    if (width < 100 || height < 60) throw ConfigError("plot: canvas too small");
  }
};

// Fully resolved run configuration: file values overlaid by --set overrides.
// The scorer's D_in is taken from the data at run time, never from config.
struct RunConfig {
  dataio::SyntheticSpec synth;
  csnet::CSNetConfig csnet;
  adversarial::VaeGanConfig vae;
  trainer::TrainConfig train;
  EvalConfig eval;
  AblateConfig ablate;
  PlotConfig plot;
};

namespace detail {

inline double as_double(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config: " + key + " must be a number");
  return v.get<double>();
}
inline int as_int(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config: " + key + " must be an integer");
  return v.get<int>();
}
inline std::uint64_t as_u64(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw ConfigError("config: " + key + " must be a nonnegative integer");
  const auto x = v.get<long long>();
  if (x < 0) throw ConfigError("config: " + key + " must be a nonnegative integer");
  return static_cast<std::uint64_t>(x);
}
inline bool as_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config: " + key + " must be a boolean");
  return v.get<bool>();
}
inline std::string as_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config: " + key + " must be a string");
  return v.get<std::string>();
}
inline std::vector<int> as_int_list(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config: " + key + " must be an array of integers");
  std::vector<int> out;
  for (const auto& e : v) out.push_back(as_int(e, key));
  return out;
}

}  // namespace detail

// Applies one "section.key" entry; unknown keys are rejected by name.
inline void apply_entry(RunConfig& rc, const std::string& section, const std::string& key,
                        const nlohmann::json& v) {
  using namespace detail;
  const std::string full = section + "." + key;
  if (section == "synth") {
    if (key == "n_videos") rc.synth.n_videos = as_int(v, full);
    else if (key == "t_min") rc.synth.t_min = as_int(v, full);
    else if (key == "t_max") rc.synth.t_max = as_int(v, full);
    else if (key == "feature_dim") rc.synth.feature_dim = as_int(v, full);
    else if (key == "n_users") rc.synth.n_users = as_int(v, full);
    else if (key == "seg_min") rc.synth.seg_min = as_int(v, full);
    else if (key == "seg_max") rc.synth.seg_max = as_int(v, full);
    else if (key == "seed") rc.synth.seed = as_u64(v, full);
    else if (key == "feature_noise") rc.synth.feature_noise = as_double(v, full);
    else if (key == "score_noise") rc.synth.score_noise = as_double(v, full);
    else if (key == "name") rc.synth.name = as_string(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "csnet") {
    if (key == "M") rc.csnet.M = as_int(v, full);
    else if (key == "D_h") rc.csnet.D_h = as_int(v, full);
    else if (key == "strides") rc.csnet.strides = as_int_list(v, full);
    else if (key == "boundary_mode") rc.csnet.boundary_mode = csnet::boundary_from_name(as_string(v, full));
    else if (key == "fusion_mode") rc.csnet.fusion_mode = csnet::fusion_from_name(as_string(v, full));
    else if (key == "share_streams") rc.csnet.share_streams = as_bool(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "vae") {
    if (key == "D_h") rc.vae.D_h = as_int(v, full);
    else if (key == "D_z") rc.vae.D_z = as_int(v, full);
    else if (key == "recon_raw_mse") rc.vae.recon_raw_mse = as_bool(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "train") {
    if (key == "max_epochs") rc.train.max_epochs = as_int(v, full);
    else if (key == "base_lr") rc.train.base_lr = as_double(v, full);
    else if (key == "lr_decay") rc.train.lr_decay = as_double(v, full);
    else if (key == "grad_clip") rc.train.grad_clip = as_double(v, full);
    else if (key == "supervised") rc.train.supervised = as_bool(v, full);
    else if (key == "seed") rc.train.seed = as_u64(v, full);
    else if (key == "use_csnet") rc.train.flags.use_csnet = as_bool(v, full);
    else if (key == "use_difference") rc.train.flags.use_difference = as_bool(v, full);
    else if (key == "use_variance_loss") rc.train.flags.use_variance_loss = as_bool(v, full);
    else if (key == "variance_on_streams") rc.train.variance_on_streams = as_bool(v, full);
    else if (key == "lambda_var") rc.train.weights.lambda_var = as_double(v, full);
    else if (key == "lambda_sparsity") rc.train.weights.lambda_sparsity = as_double(v, full);
    else if (key == "lambda_recon") rc.train.weights.lambda_recon = as_double(v, full);
    else if (key == "lambda_prior") rc.train.weights.lambda_prior = as_double(v, full);
    else if (key == "lambda_gan") rc.train.weights.lambda_gan = as_double(v, full);
    else if (key == "sigma_target") rc.train.weights.sigma_target = as_double(v, full);
    else if (key == "eps") rc.train.weights.eps = as_double(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "eval") {
    if (key == "setting") rc.eval.setting = eval::setting_from_name(as_string(v, full));
    else if (key == "n_repeats") rc.eval.n_repeats = as_int(v, full);
    else if (key == "seed") rc.eval.seed = as_u64(v, full);
    else if (key == "budget_ratio") rc.eval.budget_ratio = as_double(v, full);
    else if (key == "pool") rc.eval.pool = summarize::pool_from_name(as_string(v, full));
    else if (key == "synthetic_agg") {
      const std::string s = as_string(v, full);
      if (s == "max") rc.eval.synthetic_agg = eval::Aggregate::max;
      else if (s == "mean") rc.eval.synthetic_agg = eval::Aggregate::mean;
      else throw ConfigError("config: " + full + " must be max or mean");
    }
    else if (key == "kts_penalty") rc.eval.kts_penalty = as_double(v, full);
    else if (key == "kts_max_segments") rc.eval.kts_max_segments = as_int(v, full);
    else if (key == "kts_kernel") rc.eval.kts_kernel = as_string(v, full);
    else if (key == "kts_rbf_gamma") rc.eval.kts_rbf_gamma = as_double(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "ablate") {
    if (key == "n_seeds") rc.ablate.n_seeds = as_int(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "plot") {
    if (key == "max_videos") rc.plot.max_videos = as_int(v, full);
    else if (key == "width") rc.plot.width = as_int(v, full);
    else if (key == "height") rc.plot.height = as_int(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else {
    throw ConfigError("unknown config section: " + section);
  }
}

inline void apply_json(RunConfig& rc, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object of sections");
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object())
      throw ConfigError("config: section " + section + " must be an object");
    for (const auto& [key, value] : body.items()) apply_entry(rc, section, key, value);
  }
}

inline void validate(const RunConfig& rc) {
  rc.synth.check();
  // D_in comes from data; validate the structural scorer knobs only.
  csnet::CSNetConfig probe = rc.csnet;
  probe.D_in = 1;
  probe.check();
  adversarial::VaeGanConfig vprobe = rc.vae;
  vprobe.D_in = 1;
  vprobe.check();
  rc.train.check();
  rc.eval.check();
  rc.ablate.check();
  rc.plot.check();
}

// Overrides are "section.key=value" strings; values parse as JSON scalars,
// falling back to raw strings (so --set eval.setting=transfer works unquoted).
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig rc;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("config file not found: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    apply_json(rc, j);
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be section.key=value: " + ov);
    const std::string addr = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    const auto dot = addr.find('.');
    if (dot == std::string::npos) throw ConfigError("override must be section.key=value: " + ov);
    nlohmann::json v = nlohmann::json::parse(raw, nullptr, false);
    if (v.is_discarded()) v = raw;
    apply_entry(rc, addr.substr(0, dot), addr.substr(dot + 1), v);
  }
  validate(rc);
  return rc;
}

// Full resolved config, echoed verbatim into every artifact.
inline nlohmann::ordered_json config_json(const RunConfig& rc) {
  nlohmann::ordered_json j;
  j["synth"] = {{"n_videos", rc.synth.n_videos}, {"t_min", rc.synth.t_min},
                {"t_max", rc.synth.t_max},       {"feature_dim", rc.synth.feature_dim},
                {"n_users", rc.synth.n_users},   {"seg_min", rc.synth.seg_min},
                {"seg_max", rc.synth.seg_max},   {"seed", rc.synth.seed},
                {"feature_noise", rc.synth.feature_noise},
                {"score_noise", rc.synth.score_noise},
                {"name", rc.synth.name}};
  j["csnet"] = {{"M", rc.csnet.M},
                {"D_h", rc.csnet.D_h},
                {"strides", rc.csnet.strides},
                {"boundary_mode", csnet::boundary_name(rc.csnet.boundary_mode)},
                {"fusion_mode", csnet::fusion_name(rc.csnet.fusion_mode)},
                {"share_streams", rc.csnet.share_streams}};
  j["vae"] = {{"D_h", rc.vae.D_h}, {"D_z", rc.vae.D_z}, {"recon_raw_mse", rc.vae.recon_raw_mse}};
  j["train"] = {{"max_epochs", rc.train.max_epochs},
                {"base_lr", rc.train.base_lr},
                {"lr_decay", rc.train.lr_decay},
                {"grad_clip", rc.train.grad_clip},
                {"supervised", rc.train.supervised},
                {"seed", rc.train.seed},
                {"use_csnet", rc.train.flags.use_csnet},
                {"use_difference", rc.train.flags.use_difference},
                {"use_variance_loss", rc.train.flags.use_variance_loss},
                {"variance_on_streams", rc.train.variance_on_streams},
                {"lambda_var", rc.train.weights.lambda_var},
                {"lambda_sparsity", rc.train.weights.lambda_sparsity},
                {"lambda_recon", rc.train.weights.lambda_recon},
                {"lambda_prior", rc.train.weights.lambda_prior},
                {"lambda_gan", rc.train.weights.lambda_gan},
                {"sigma_target", rc.train.weights.sigma_target},
                {"eps", rc.train.weights.eps}};
  j["eval"] = {{"setting", eval::setting_name(rc.eval.setting)},
               {"n_repeats", rc.eval.n_repeats},
               {"seed", rc.eval.seed},
               {"budget_ratio", rc.eval.budget_ratio},
               {"pool", summarize::pool_name(rc.eval.pool)},
               {"synthetic_agg", rc.eval.synthetic_agg == eval::Aggregate::max ? "max" : "mean"},
               {"kts_penalty", rc.eval.kts_penalty},
               {"kts_max_segments", rc.eval.kts_max_segments},
               {"kts_kernel", rc.eval.kts_kernel},
               {"kts_rbf_gamma", rc.eval.kts_rbf_gamma}};
  j["ablate"] = {{"n_seeds", rc.ablate.n_seeds}};
  j["plot"] = {{"max_videos", rc.plot.max_videos},
               {"width", rc.plot.width},
               {"height", rc.plot.height}};
  return j;
}

}  // namespace vsum::config
