#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "vsum/autodiff.hpp"
#include "vsum/common.hpp"
#include "vsum/nets.hpp"
#include "vsum/rng.hpp"

namespace vsum::adversarial {

struct TrainWeights {
  double lambda_var = 1.0;
  double lambda_sparsity = 1.0;
  double lambda_recon = 1.0;
  double lambda_prior = 1.0;
  double lambda_gan = 1.0;
  double sigma_target = 0.3;
  double eps = 1e-8;

  void check() const {
    if (eps <= 0.0) throw ConfigError("weights: eps must be > 0");
    if (lambda_var < 0 || lambda_sparsity < 0 || lambda_recon < 0 || lambda_prior < 0 ||
        lambda_gan < 0)
      throw ConfigError("weights: lambdas must be nonnegative");
    if (sigma_target <= 0.0 || sigma_target >= 1.0)
      throw ConfigError("weights: sigma_target must be in (0,1)");
  }
};

struct LossBundle {
  double L_var = 0.0;
  double L_sparsity = 0.0;
  double L_recon = 0.0;
  double L_prior = 0.0;
  double L_gan_G = 0.0;
  double L_gan_D = 0.0;

  bool finite() const {
    return std::isfinite(L_var) && std::isfinite(L_sparsity) && std::isfinite(L_recon) &&
           std::isfinite(L_prior) && std::isfinite(L_gan_G) && std::isfinite(L_gan_D);
  }
};

struct VaeGanConfig {
  int D_in = 0;
  int D_h = 256;  // recurrent hidden width for encoder/decoder/discriminator
  int D_z = 256;  // latent width
  bool recon_raw_mse = false;  // raw feature MSE instead of feature matching

  void check() const {
    if (D_in < 1) throw ConfigError("vae: D_in must be >= 1");
    if (D_h < 1) throw ConfigError("vae: D_h must be >= 1");
    if (D_z < 1) throw ConfigError("vae: D_z must be >= 1");
  }
};

struct VaeGanParams {
  nets::Lstm enc;         // D_in -> H
  nets::Fc enc_mu;        // H -> Z
  nets::Fc enc_logvar;    // H -> Z
  nets::Lstm dec;         // Z -> H
  nets::Fc dec_out;       // H -> D_in
  nets::Lstm disc;        // D_in -> H
  nets::Fc disc_head;     // H -> 1

  // Generator side: everything the scorer's objective updates besides the
  // scorer itself. The discriminator group is optimized separately.
  void collect_gen(nets::ParamSet& ps, const std::string& prefix) {
    enc.collect(ps, prefix + ".enc");
    enc_mu.collect(ps, prefix + ".enc_mu");
    enc_logvar.collect(ps, prefix + ".enc_logvar");
    dec.collect(ps, prefix + ".dec");
    dec_out.collect(ps, prefix + ".dec_out");
  }

  void collect_disc(nets::ParamSet& ps, const std::string& prefix) {
    disc.collect(ps, prefix + ".disc");
    disc_head.collect(ps, prefix + ".disc_head");
  }

  void collect(nets::ParamSet& ps, const std::string& prefix) {
    collect_gen(ps, prefix);
    collect_disc(ps, prefix);
  }
};

inline VaeGanParams make_vaegan_params(const VaeGanConfig& cfg, Rng& rng) {
  cfg.check();
  VaeGanParams p;
  p.enc = nets::make_lstm(cfg.D_in, cfg.D_h, rng);
  p.enc_mu = nets::make_fc(cfg.D_h, cfg.D_z, rng);
  p.enc_logvar = nets::make_fc(cfg.D_h, cfg.D_z, rng);
  p.dec = nets::make_lstm(cfg.D_z, cfg.D_h, rng);
  p.dec_out = nets::make_fc(cfg.D_h, cfg.D_in, rng);
  p.disc = nets::make_lstm(cfg.D_in, cfg.D_h, rng);
  p.disc_head = nets::make_fc(cfg.D_h, 1, rng);
  return p;
}

// (1/T) * sum |p_t - med(p)|^2; even length takes the mean of the two middle
// order statistics.
inline double median_deviation_variance(const Vector& p) {
  const Eigen::Index T = p.size();
  if (T < 1) throw ValidationError("median_deviation_variance: empty vector");
  std::vector<double> sorted(p.data(), p.data() + T);
  std::sort(sorted.begin(), sorted.end());
  const double med = (T % 2 == 1)
                         ? sorted[static_cast<std::size_t>(T / 2)]
                         : 0.5 * (sorted[static_cast<std::size_t>(T / 2 - 1)] +
                                  sorted[static_cast<std::size_t>(T / 2)]);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < T; ++i) {
    const double d = p[i] - med;
    acc += d * d;
  }
  return acc / static_cast<double>(T);
}

inline double variance_loss(const Vector& p, double eps) {
  if (eps <= 0.0) throw ConfigError("variance_loss: eps must be > 0");
  return 1.0 / (median_deviation_variance(p) + eps);
}

inline double sparsity_loss(const Vector& p, double sigma_target) {
  if (p.size() < 1) throw ValidationError("sparsity_loss: empty vector");
  const double m = p.mean() - sigma_target;
  return m * m;
}

inline Matrix weight_features(const Matrix& x, const Vector& p) {
  if (x.rows() != p.size()) throw ShapeError("weight_features: length mismatch");
  return x.array().colwise() * p.array();
}

// ---- tape builders ----

struct VaeGanVars {
  nets::LstmVar enc;
  nets::FcVar enc_mu, enc_logvar;
  nets::LstmVar dec;
  nets::FcVar dec_out;
  nets::LstmVar disc;
  nets::FcVar disc_head;

  void vars_gen(std::vector<ad::Var>& out) const {
    enc.vars(out);
    enc_mu.vars(out);
    enc_logvar.vars(out);
    dec.vars(out);
    dec_out.vars(out);
  }

  void vars_disc(std::vector<ad::Var>& out) const {
    disc.vars(out);
    disc_head.vars(out);
  }
};

inline VaeGanVars put(ad::Tape& t, const VaeGanParams& p) {
  VaeGanVars v;
  v.enc = nets::put(t, p.enc);
  v.enc_mu = nets::put(t, p.enc_mu);
  v.enc_logvar = nets::put(t, p.enc_logvar);
  v.dec = nets::put(t, p.dec);
  v.dec_out = nets::put(t, p.dec_out);
  v.disc = nets::put(t, p.disc);
  v.disc_head = nets::put(t, p.disc_head);
  return v;
}

// Median via the selected order statistic(s): gradient flows through the
// middle element, split equally between the two middle ones for even length.
inline ad::Var build_median(ad::Tape& t, ad::Var p) {
  const Matrix& pv = t.val(p);
  const int T = static_cast<int>(pv.rows());
  if (T < 1 || pv.cols() != 1) throw ShapeError("build_median: expects a nonempty column");
  std::vector<int> order(static_cast<std::size_t>(T));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pv(a, 0) < pv(b, 0); });
  if (T % 2 == 1) return ad::gather_elem(p, order[static_cast<std::size_t>(T / 2)], 0);
  ad::Var lo = ad::gather_elem(p, order[static_cast<std::size_t>(T / 2 - 1)], 0);
  ad::Var hi = ad::gather_elem(p, order[static_cast<std::size_t>(T / 2)], 0);
  return ad::scale(ad::add(lo, hi), 0.5);
}

inline ad::Var build_median_deviation_variance(ad::Tape& t, ad::Var p) {
  ad::Var med = build_median(t, p);
  ad::Var dev = ad::add_scalar_broadcast(p, ad::scale(med, -1.0));
  return ad::mean(ad::square(dev));
}

inline ad::Var build_variance_loss(ad::Tape& t, ad::Var p, double eps) {
  if (eps <= 0.0) throw ConfigError("variance_loss: eps must be > 0");
  return ad::reciprocal(ad::add_const(build_median_deviation_variance(t, p), eps));
}

inline ad::Var build_sparsity_loss(ad::Tape& t, ad::Var p, double sigma_target) {
  return ad::square(ad::add_const(ad::mean(p), -sigma_target));
}

struct VaeVars {
  ad::Var x_hat;   // [T x D_in]
  ad::Var mu;      // [T x Z]
  ad::Var logvar;  // [T x Z]
  ad::Var e;       // [T x Z]
};

// Encoder -> per-time latent stats -> reparameterized sample -> decoder.
// eta is a supplied noise node shaped [T x Z].
inline VaeVars build_vae(ad::Tape& t, ad::Var x_tilde, const VaeGanVars& pv, ad::Var eta,
                         const VaeGanConfig& cfg) {
  VaeVars v;
  ad::Var henc = nets::lstm_sequence(t, pv.enc, x_tilde, cfg.D_h, false);
  v.mu = nets::fc_rows(pv.enc_mu, henc);
  v.logvar = nets::fc_rows(pv.enc_logvar, henc);
  v.e = ad::add(v.mu, ad::cmul(ad::exp_(ad::scale(v.logvar, 0.5)), eta));
  ad::Var hdec = nets::lstm_sequence(t, pv.dec, v.e, cfg.D_h, false);
  v.x_hat = nets::fc_rows(pv.dec_out, hdec);
  return v;
}

struct DiscVars {
  ad::Var logit;   // [1 x 1]
  ad::Var h_last;  // [H x 1]
};

inline DiscVars build_disc(ad::Tape& t, ad::Var x_any, const VaeGanVars& pv,
                           const VaeGanConfig& cfg) {
  ad::Var h = nets::lstm_sequence(t, pv.disc, x_any, cfg.D_h, false);
  DiscVars d;
  d.h_last = ad::row_as_col(h, static_cast<int>(t.val(h).rows()) - 1);
  d.logit = nets::fc_col(pv.disc_head, d.h_last);
  return d;
}

// KL(N(mu, sigma^2) || N(0, I)) averaged over time:
// (1/T) * sum_t 0.5 * sum_z (mu^2 + e^lv - lv - 1).
inline ad::Var build_kl(ad::Tape& t, ad::Var mu, ad::Var logvar) {
  const double T = static_cast<double>(t.val(mu).rows());
  ad::Var term =
      ad::sub(ad::add(ad::square(mu), ad::exp_(logvar)), ad::add_const(logvar, 1.0));
  return ad::scale(ad::sum(term), 0.5 / T);
}

// ---- plain wrappers over the tape graph (frozen parameters) ----

namespace detail {
inline VaeGanVars put_const(ad::Tape& t, const VaeGanParams& p) {
  auto cl = [&](const nets::Lstm& l) {
    return nets::LstmVar{t.constant(l.W_ih), t.constant(l.W_hh), t.constant(l.b)};
  };
  auto cf = [&](const nets::Fc& f) { return nets::FcVar{t.constant(f.W), t.constant(f.b)}; };
  VaeGanVars v;
  v.enc = cl(p.enc);
  v.enc_mu = cf(p.enc_mu);
  v.enc_logvar = cf(p.enc_logvar);
  v.dec = cl(p.dec);
  v.dec_out = cf(p.dec_out);
  v.disc = cl(p.disc);
  v.disc_head = cf(p.disc_head);
  return v;
}
}  // namespace detail

struct VaeForwardResult {
  Matrix x_hat;
  Matrix mu;
  Matrix logvar;
};

inline VaeForwardResult vae_forward(const Matrix& x_tilde, const VaeGanParams& params,
                                    const VaeGanConfig& cfg, const Matrix& eta) {
  cfg.check();
  if (eta.rows() != x_tilde.rows() || eta.cols() != cfg.D_z)
    throw ShapeError("vae_forward: eta must be [T x D_z]");
  ad::Tape t;
  VaeGanVars pv = detail::put_const(t, params);
  VaeVars v = build_vae(t, t.constant(x_tilde), pv, t.constant(eta), cfg);
  if (!t.val(v.mu).allFinite() || !t.val(v.logvar).allFinite())
    throw NumericError("vae_forward: non-finite latent stats");
  return {t.val(v.x_hat), t.val(v.mu), t.val(v.logvar)};
}

struct DiscriminateResult {
  double logit = 0.0;
  Vector h_last;
};

inline DiscriminateResult discriminate(const Matrix& x_any, const VaeGanParams& params,
                                       const VaeGanConfig& cfg) {
  cfg.check();
  if (x_any.cols() != cfg.D_in) throw ShapeError("discriminate: feature width mismatch");
  ad::Tape t;
  VaeGanVars pv = detail::put_const(t, params);
  DiscVars d = build_disc(t, t.constant(x_any), pv, cfg);
  return {t.val(d.logit)(0, 0), Vector(t.val(d.h_last).col(0))};
}

inline double bce_with_logit_value(double logit, double target) {
  const double sp = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return sp - target * logit;
}

// Assembles the adversarial terms of a bundle from frozen parameters.
// L_var and L_sparsity are computed upstream from the score vector and
// passed through unchanged.
inline LossBundle adversarial_objectives(const Matrix& x, const Matrix& x_hat,
                                         const Matrix& x_hat_uniform, const Matrix& mu,
                                         const Matrix& logvar, const VaeGanParams& params,
                                         const VaeGanConfig& cfg, const TrainWeights& weights,
                                         double L_var, double L_sparsity) {
  weights.check();
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw ShapeError("adversarial_objectives: x/x_hat shape mismatch");
  LossBundle b;
  b.L_var = L_var;
  b.L_sparsity = L_sparsity;

  DiscriminateResult real = discriminate(x, params, cfg);
  DiscriminateResult fake = discriminate(x_hat, params, cfg);
  DiscriminateResult fake_u = discriminate(x_hat_uniform, params, cfg);

  if (cfg.recon_raw_mse) {
    b.L_recon = (x - x_hat).array().square().mean();
  } else {
    b.L_recon = (real.h_last - fake.h_last).array().square().mean();
  }

  const double T = static_cast<double>(mu.rows());
  b.L_prior =
      0.5 * (mu.array().square() + logvar.array().exp() - logvar.array() - 1.0).sum() / T;

  b.L_gan_D = bce_with_logit_value(real.logit, 1.0) + bce_with_logit_value(fake.logit, 0.0) +
              bce_with_logit_value(fake_u.logit, 0.0);
  b.L_gan_G = bce_with_logit_value(fake.logit, 1.0);
  return b;
}

}  // namespace vsum::adversarial
