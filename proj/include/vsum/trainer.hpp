#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsum/adversarial.hpp"
#include "vsum/autodiff.hpp"
#include "vsum/checkpoint.hpp"
#include "vsum/common.hpp"
#include "vsum/csnet.hpp"
#include "vsum/dataio.hpp"
#include "vsum/nets.hpp"
#include "vsum/rng.hpp"

namespace vsum::trainer {

struct AblationFlags {
  bool use_csnet = true;
  bool use_difference = true;
  bool use_variance_loss = true;
};

// The eight experiment rows: all on/off combinations of
// (CSNet, Difference, Variance Loss) in the canonical order.
inline std::vector<AblationFlags> ablation_matrix() {
  return {
      {false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
      {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true},
  };
}

struct TrainConfig {
  int max_epochs = 20;
  double base_lr = 1e-4;
  double lr_decay = 0.1;  // applied from epoch 10 on
  adversarial::TrainWeights weights;
  AblationFlags flags;
  bool supervised = false;
  std::uint64_t seed = 0;
  double grad_clip = 5.0;
  // Adds the per-stream score variance losses on top of the fused one.
  bool variance_on_streams = false;

  void check() const {
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (base_lr <= 0.0) throw ConfigError("train: base_lr must be > 0");
    if (lr_decay <= 0.0) throw ConfigError("train: lr_decay must be > 0");
    if (grad_clip <= 0.0) throw ConfigError("train: grad_clip must be > 0");
    weights.check();
  }
};

inline double lr_schedule(int epoch, const TrainConfig& cfg) {
  cfg.check();
  if (epoch < 0 || epoch >= cfg.max_epochs) throw ConfigError("lr_schedule: epoch out of range");
  return epoch < 10 ? cfg.base_lr : cfg.base_lr * cfg.lr_decay;
}

struct EpochStats {
  adversarial::LossBundle losses;  // per-video means
  double score_variance = 0.0;     // mean median-deviation variance of p
  double lr = 0.0;
  double seconds = 0.0;  // wall clock; never serialized into traces
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

inline double clip_global_norm(std::vector<Matrix>& grads, double clip) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > clip && norm > 0.0) {
    const double f = clip / norm;
    for (Matrix& g : grads) g *= f;
  }
  return norm;
}

// Adaptive-moment optimizer over a fixed-order parameter group.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Matrix> m, v;

  void step(nets::ParamSet& ps, const std::vector<Matrix>& grads, double lr) {
    if (grads.size() != ps.size()) throw ShapeError("adam: grads/params mismatch");
    if (m.empty()) {
      for (Matrix* p : ps.tensors) {
        m.push_back(Matrix::Zero(p->rows(), p->cols()));
        v.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    if (m.size() != ps.size()) throw ShapeError("adam: state size mismatch");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
      const Matrix mhat = m[i] / bc1;
      const Matrix vhat = v[i] / bc2;
      *ps.tensors[i] -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    }
  }
};

struct TrainerState {
  csnet::CSNetConfig scorer_cfg;
  adversarial::VaeGanConfig vae_cfg;
  TrainConfig cfg;
  csnet::CSNetParams scorer;
  adversarial::VaeGanParams vae;
  AdamState adam_g, adam_d;
};

inline csnet::CSNetConfig effective_scorer_config(const csnet::CSNetConfig& base,
                                                  const AblationFlags& flags) {
  csnet::CSNetConfig cfg = base;
  cfg.use_difference = flags.use_difference;
  cfg.single_stream = !flags.use_csnet;
  return cfg;
}

inline TrainerState make_state(const csnet::CSNetConfig& scorer_cfg,
                               const adversarial::VaeGanConfig& vae_cfg,
                               const TrainConfig& cfg) {
  scorer_cfg.check();
  vae_cfg.check();
  cfg.check();
  if (scorer_cfg.D_in != vae_cfg.D_in)
    throw ConfigError("trainer: scorer and vae disagree on feature width");
  TrainerState st;
  st.scorer_cfg = scorer_cfg;
  st.vae_cfg = vae_cfg;
  st.cfg = cfg;
  Rng rng(derive_seed(cfg.seed, 0x11));
  st.scorer = csnet::make_csnet_params(scorer_cfg, rng);
  st.vae = adversarial::make_vaegan_params(vae_cfg, rng);
  return st;
}

// One alternating update on a single video: the scorer+VAE group descends
// the weighted generator objective, then the discriminator group descends
// L_gan_D, both from gradients taken at the pre-update parameter values.
// Returns the pre-update losses.
inline adversarial::LossBundle train_step(const dataio::VideoRecord& video, TrainerState& st,
                                          int epoch, int video_index,
                                          double* score_variance = nullptr) {
  const TrainConfig& cfg = st.cfg;
  const adversarial::TrainWeights& w = cfg.weights;
  if (cfg.supervised && !video.gtscore)
    throw ConfigError("supervised training requires gtscore (video " + video.id + ")");

  const Matrix x = video.features.cast<double>();
  const int T = static_cast<int>(x.rows());
  const int Z = st.vae_cfg.D_z;
  const csnet::CSNetConfig eff = effective_scorer_config(st.scorer_cfg, cfg.flags);

  // Fixed draw order: eta, uniform scores, eta for the uniform path.
  Rng nrng(derive_seed(cfg.seed, 0xA01, static_cast<std::uint64_t>(epoch),
                       static_cast<std::uint64_t>(video_index)));
  Matrix eta(T, Z), eta_u(T, Z), u(T, 1);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < Z; ++j) eta(i, j) = nrng.normal();
  for (int i = 0; i < T; ++i) u(i, 0) = nrng.uniform();
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < Z; ++j) eta_u(i, j) = nrng.normal();

  ad::Tape tape;
  ad::Var X = tape.constant(x);
  csnet::CSNetVars scorer_vars = csnet::put(tape, st.scorer);
  adversarial::VaeGanVars vae_vars = adversarial::put(tape, st.vae);

  csnet::ScoreVars scores = csnet::build_scores(tape, X, scorer_vars, eff);
  const std::string ctx = " (epoch " + std::to_string(epoch) + ", video " + video.id + ")";
  if (!tape.val(scores.p).allFinite()) throw NumericError("non-finite scores" + ctx);

  ad::Var x_tilde = ad::scale_rows(X, scores.p);
  adversarial::VaeVars vae_out =
      adversarial::build_vae(tape, x_tilde, vae_vars, tape.constant(eta), st.vae_cfg);

  ad::Var x_tilde_u = ad::scale_rows(X, tape.constant(u));
  adversarial::VaeVars vae_uni =
      adversarial::build_vae(tape, x_tilde_u, vae_vars, tape.constant(eta_u), st.vae_cfg);

  adversarial::DiscVars d_real = adversarial::build_disc(tape, X, vae_vars, st.vae_cfg);
  adversarial::DiscVars d_fake = adversarial::build_disc(tape, vae_out.x_hat, vae_vars, st.vae_cfg);
  adversarial::DiscVars d_funi = adversarial::build_disc(tape, vae_uni.x_hat, vae_vars, st.vae_cfg);

  ad::Var l_var = adversarial::build_variance_loss(tape, scores.p, w.eps);
  if (cfg.variance_on_streams && scores.has_streams) {
    l_var = ad::add(l_var, adversarial::build_variance_loss(tape, scores.p1, w.eps));
    l_var = ad::add(l_var, adversarial::build_variance_loss(tape, scores.p2, w.eps));
  }
  ad::Var l_sparsity = adversarial::build_sparsity_loss(tape, scores.p, w.sigma_target);
  ad::Var l_recon = st.vae_cfg.recon_raw_mse
                        ? ad::mean(ad::square(ad::sub(vae_out.x_hat, X)))
                        : ad::mean(ad::square(ad::sub(d_real.h_last, d_fake.h_last)));
  ad::Var l_prior = adversarial::build_kl(tape, vae_out.mu, vae_out.logvar);
  ad::Var l_gan_g = ad::bce_with_logit(d_fake.logit, 1.0);
  ad::Var l_gan_d = ad::add(ad::add(ad::bce_with_logit(d_real.logit, 1.0),
                                    ad::bce_with_logit(d_fake.logit, 0.0)),
                            ad::bce_with_logit(d_funi.logit, 0.0));

  ad::Var g_obj = ad::scale(l_sparsity, w.lambda_sparsity);
  g_obj = ad::add(g_obj, ad::scale(l_recon, w.lambda_recon));
  g_obj = ad::add(g_obj, ad::scale(l_prior, w.lambda_prior));
  g_obj = ad::add(g_obj, ad::scale(l_gan_g, w.lambda_gan));
  if (cfg.flags.use_variance_loss) g_obj = ad::add(g_obj, ad::scale(l_var, w.lambda_var));
  if (cfg.supervised) {
    Matrix gt(T, 1);
    for (int i = 0; i < T; ++i) gt(i, 0) = static_cast<double>((*video.gtscore)[i]);
    ad::Var gtv = tape.constant(gt);
    ad::Var one_minus_gt = tape.constant(Matrix(Matrix::Ones(T, 1) - gt));
    ad::Var pc = ad::clamp(scores.p, 1e-7, 1.0 - 1e-7);
    ad::Var ones = tape.constant(Matrix::Ones(T, 1));
    ad::Var ll = ad::add(ad::cmul(gtv, ad::log_(pc)),
                         ad::cmul(one_minus_gt, ad::log_(ad::sub(ones, pc))));
    g_obj = ad::add(g_obj, ad::scale(ad::mean(ll), -1.0));
  }

  adversarial::LossBundle bundle;
  bundle.L_var = tape.val(l_var)(0, 0);
  bundle.L_sparsity = tape.val(l_sparsity)(0, 0);
  bundle.L_recon = tape.val(l_recon)(0, 0);
  bundle.L_prior = tape.val(l_prior)(0, 0);
  bundle.L_gan_G = tape.val(l_gan_g)(0, 0);
  bundle.L_gan_D = tape.val(l_gan_d)(0, 0);
  if (!bundle.finite()) throw NumericError("non-finite loss" + ctx);
  if (score_variance)
    *score_variance = adversarial::median_deviation_variance(tape.val(scores.p).col(0));

  const double lr = lr_schedule(epoch, cfg);

  tape.backward(g_obj);
  nets::ParamSet gen;
  st.scorer.collect(gen, "scorer");
  st.vae.collect_gen(gen, "vae");
  std::vector<ad::Var> gen_vars;
  scorer_vars.vars(gen_vars);
  vae_vars.vars_gen(gen_vars);
  std::vector<Matrix> gen_grads;
  gen_grads.reserve(gen_vars.size());
  for (ad::Var v : gen_vars) gen_grads.push_back(tape.grad(v));
  clip_global_norm(gen_grads, cfg.grad_clip);
  st.adam_g.step(gen, gen_grads, lr);

  tape.backward(l_gan_d);
  nets::ParamSet disc;
  st.vae.collect_disc(disc, "vae");
  std::vector<ad::Var> disc_vars;
  vae_vars.vars_disc(disc_vars);
  std::vector<Matrix> disc_grads;
  disc_grads.reserve(disc_vars.size());
  for (ad::Var v : disc_vars) disc_grads.push_back(tape.grad(v));
  clip_global_norm(disc_grads, cfg.grad_clip);
  st.adam_d.step(disc, disc_grads, lr);

  return bundle;
}

struct TrainResult {
  TrainerState state;
  TrainHistory history;
};

// Full optimization loop: per epoch, a seeded shuffle of the videos and one
// train_step per video. Saves a checkpoint when a directory is given.
inline TrainResult train(const dataio::Dataset& ds, const csnet::CSNetConfig& scorer_cfg,
                         const adversarial::VaeGanConfig& vae_cfg, const TrainConfig& cfg,
                         const std::filesystem::path& checkpoint_dir = {},
                         const nlohmann::ordered_json& meta = nlohmann::ordered_json::object()) {
  if (ds.videos.empty()) throw ValidationError("train: empty dataset");
  for (const auto& v : ds.videos)
    if (v.feature_dim() != scorer_cfg.D_in)
      throw ConfigError("train: video " + v.id + " feature width " +
                        std::to_string(v.feature_dim()) + " != D_in " +
                        std::to_string(scorer_cfg.D_in));

  TrainResult out;
  out.state = make_state(scorer_cfg, vae_cfg, cfg);
  const int n = static_cast<int>(ds.videos.size());

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng srng(derive_seed(cfg.seed, 0xE9, static_cast<std::uint64_t>(epoch)));
    srng.shuffle(order);

    EpochStats stats;
    for (int vi : order) {
      double sv = 0.0;
      const adversarial::LossBundle b =
          train_step(ds.videos[static_cast<std::size_t>(vi)], out.state, epoch, vi, &sv);
      stats.losses.L_var += b.L_var;
      stats.losses.L_sparsity += b.L_sparsity;
      stats.losses.L_recon += b.L_recon;
      stats.losses.L_prior += b.L_prior;
      stats.losses.L_gan_G += b.L_gan_G;
      stats.losses.L_gan_D += b.L_gan_D;
      stats.score_variance += sv;
    }
    stats.losses.L_var /= n;
    stats.losses.L_sparsity /= n;
    stats.losses.L_recon /= n;
    stats.losses.L_prior /= n;
    stats.losses.L_gan_G /= n;
    stats.losses.L_gan_D /= n;
    stats.score_variance /= n;
    stats.lr = lr_schedule(epoch, cfg);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.history.epochs.push_back(stats);
  }

  if (!checkpoint_dir.empty())
    checkpoint::save(checkpoint_dir, out.state.scorer, out.state.vae, meta);
  return out;
}

// Training log: one record per epoch. Wall-clock time is deliberately not
// serialized so that identical (config, seed) runs produce identical traces.
inline void write_history_jsonl(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write history: " + path.string());
  for (std::size_t i = 0; i < h.epochs.size(); ++i) {
    const EpochStats& e = h.epochs[i];
    nlohmann::ordered_json j;
    j["record"] = "epoch";
    j["epoch"] = i;
    j["lr"] = e.lr;
    j["L_var"] = e.losses.L_var;
    j["L_sparsity"] = e.losses.L_sparsity;
    j["L_recon"] = e.losses.L_recon;
    j["L_prior"] = e.losses.L_prior;
    j["L_gan_G"] = e.losses.L_gan_G;
    j["L_gan_D"] = e.losses.L_gan_D;
    j["score_variance"] = e.score_variance;
    out << j.dump() << "\n";
  }
}

}  // namespace vsum::trainer
