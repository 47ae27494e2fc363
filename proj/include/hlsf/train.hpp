#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "hlsf/checkpoint.hpp"
#include "hlsf/config.hpp"
#include "hlsf/losses.hpp"
#include "hlsf/metrics.hpp"
#include "hlsf/parallel.hpp"
#include "hlsf/scene_io.hpp"

namespace hlsf {

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double bce = 0.0;
  double gan_g = 0.0;
  double gan_d = 0.0;
  double total = 0.0;
  double beta = 0.0;
};

/// Noise consumed by one example in one step, drawn ahead of the parallel
/// section so the stream order never depends on scheduling.
template <typename S>
struct LatentNoise {
  ad::Mat<S> post;   // D x bom_samples, reparameterized posterior draws
  ad::Mat<S> prior;  // D x 1, prior draw for the adversarial fake
};

template <typename S>
LatentNoise<S> draw_noise(Rng& rng, const ModelConfig& cfg) {
  LatentNoise<S> n;
  n.post.resize(cfg.D, cfg.bom_samples);
  for (int c = 0; c < n.post.cols(); ++c)
    for (int r = 0; r < cfg.D; ++r) n.post(r, c) = static_cast<S>(rng.normal());
  n.prior.resize(cfg.D, 1);
  for (int r = 0; r < cfg.D; ++r) n.prior(r, 0) = static_cast<S>(rng.normal());
  return n;
}

template <typename S>
struct ExampleLossVars {
  ad::Var<S> total;
  double recon = 0.0, kl = 0.0, bce = 0.0, gan_g = 0.0;
};

/// Full per-example objective on an existing tape: reconstruction and KL
/// on the ground-truth lane's context, the mode-selection loss over all
/// contexts, and the generator-side adversarial term when enabled.
template <typename S>
ExampleLossVars<S> example_loss(ad::Tape<S>& tape, const nn::Bound<S>& p, const ModelConfig& cfg,
                                const TrainConfig& tc, const Example& ex, double beta,
                                const LatentNoise<S>& noise) {
  const LaneContexts<S> ctx = build_contexts(tape, p, cfg, ex);
  const ad::Var<S> c_gt = cfg.single_context ? ctx.c.front()
                                             : ctx.c[static_cast<std::size_t>(ex.gt_index)];

  ExampleLossVars<S> out;

  ad::Var<S> bce_term;
  if (!cfg.single_context) {
    const ad::Var<S> logits = mode_logits(p, ctx.c);
    const ad::Var<S> weights = mode_weights_from_logits(logits, ex.lanes.valid, cfg.mask_fake);
    bce_term = mode_selection_loss(weights, ex.gt_index, cfg.categorical_bce);
  } else {
    bce_term = tape.constant(ad::Mat<S>::Zero(1, 1));
  }

  const ad::Var<S> y_tilde = encode_sequence(tape, p, cfg, ex.target_future4, "future");
  const GaussianHead<S> post = posterior_params(p, y_tilde, c_gt);
  const GaussianHead<S> prior = prior_params(p, c_gt);

  const ad::Var<S> z_post = sample_latent(post, tape.constant(noise.post));
  const ad::Var<S> decoded = decode_trajectory(tape, p, cfg, c_gt, z_post, Vec2(0.0, 0.0));

  ad::Var<S> recon_term;
  ad::Var<S> first_decode = decoded;
  if (cfg.bom_samples > 1) {
    // Best-of-many: the squared-error loss trains only the decode closest
    // to the ground truth (by ADE); the choice itself is not differentiated.
    int best = 0;
    double best_ade = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cfg.bom_samples; ++k) {
      double sum = 0.0;
      for (int t = 0; t < cfg.T; ++t) {
        const double dx = static_cast<double>(decoded.value()(2 * t, k)) - ex.future(t, 0);
        const double dy = static_cast<double>(decoded.value()(2 * t + 1, k)) - ex.future(t, 1);
        sum += std::sqrt(dx * dx + dy * dy);
      }
      if (sum < best_ade) {
        best_ade = sum;
        best = k;
      }
    }
    first_decode = ad::cols(decoded, best, 1);
    recon_term = recon_loss(first_decode, ex.future);
  } else {
    recon_term = recon_loss(decoded, ex.future);
  }

  const ad::Var<S> kl_term = kl_divergence(post, prior);

  ad::Var<S> gan_term;
  if (cfg.flags.gan) {
    const ad::Var<S> z_prior = sample_latent(prior, tape.constant(noise.prior));
    const ad::Var<S> prior_decode = decode_trajectory(tape, p, cfg, c_gt, z_prior, Vec2(0.0, 0.0));
    const ProcessedLane& lane = ex.lanes.lanes[static_cast<std::size_t>(ex.gt_index)];
    const ad::Var<S> lane_enc = ad::cols(ctx.lane_enc, ex.gt_index, 1);
    const std::vector<ad::Var<S>> fakes = {
        discriminator_score(tape, p, cfg, first_decode, lane, lane_enc),
        discriminator_score(tape, p, cfg, prior_decode, lane, lane_enc)};
    gan_term = gan_generator_loss(fakes);
  } else {
    gan_term = tape.constant(ad::Mat<S>::Zero(1, 1));
  }

  out.total = ad::add(
      ad::add(recon_term, ad::scale(kl_term, static_cast<S>(beta))),
      ad::add(ad::scale(bce_term, static_cast<S>(tc.alpha)),
              ad::scale(gan_term, static_cast<S>(cfg.flags.gan ? tc.kappa : 0.0))));
  out.recon = static_cast<double>(recon_term.value()(0, 0));
  out.kl = static_cast<double>(kl_term.value()(0, 0));
  out.bce = static_cast<double>(bce_term.value()(0, 0));
  out.gan_g = static_cast<double>(gan_term.value()(0, 0));
  return out;
}

/// Mean objective over a batch on one tape (used by gradient checks).
template <typename S>
struct BatchLossVars {
  ad::Var<S> total;
  LossBreakdown values;
};

template <typename S>
BatchLossVars<S> batch_loss(ad::Tape<S>& tape, const nn::Bound<S>& p, const ModelConfig& cfg,
                            const TrainConfig& tc, const std::vector<const Example*>& batch,
                            double beta, const std::vector<LatentNoise<S>>& noise) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  BatchLossVars<S> out;
  ad::Var<S> sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto one = example_loss(tape, p, cfg, tc, *batch[i], beta, noise[i]);
    sum = sum.valid() ? ad::add(sum, one.total) : one.total;
    out.values.recon += one.recon;
    out.values.kl += one.kl;
    out.values.bce += one.bce;
    out.values.gan_g += one.gan_g;
  }
  const S inv = S(1) / static_cast<S>(batch.size());
  out.total = ad::scale(sum, inv);
  out.values.recon *= inv;
  out.values.kl *= inv;
  out.values.bce *= inv;
  out.values.gan_g *= inv;
  out.values.beta = beta;
  out.values.total = static_cast<double>(out.total.value()(0, 0));
  return out;
}

/// Adam update over one side (model or discriminator) of the parameter
/// store, with global-norm clipping computed over that side only.
template <typename S>
void adam_step(nn::ParamStore<S>& store, const std::vector<ad::Mat<S>>& grads,
               std::vector<ad::Mat<S>>& moment_m, std::vector<ad::Mat<S>>& moment_v,
               std::uint64_t& t, double lr, double clip, bool disc_side) {
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (is_discriminator_param(store.items()[i].name) != disc_side) continue;
    norm_sq += static_cast<double>(grads[i].template cast<double>().squaredNorm());
  }
  const double norm = std::sqrt(norm_sq);
  const S scale = static_cast<S>(clip > 0.0 && norm > clip ? clip / norm : 1.0);

  ++t;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const S corr1 = static_cast<S>(1.0 / (1.0 - std::pow(b1, static_cast<double>(t))));
  const S corr2 = static_cast<S>(1.0 / (1.0 - std::pow(b2, static_cast<double>(t))));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (is_discriminator_param(store.items()[i].name) != disc_side) continue;
    const ad::Mat<S> g = grads[i] * scale;
    moment_m[i] = static_cast<S>(b1) * moment_m[i] + static_cast<S>(1.0 - b1) * g;
    moment_v[i] = static_cast<S>(b2) * moment_v[i] + static_cast<S>(1.0 - b2) * g.cwiseProduct(g);
    const ad::Mat<S> m_hat = moment_m[i] * corr1;
    const ad::Mat<S> v_hat = moment_v[i] * corr2;
    store.items()[i].value -=
        static_cast<S>(lr) *
        m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() + ad::Mat<S>::Constant(
                                v_hat.rows(), v_hat.cols(), static_cast<S>(eps)));
  }
}

/// Training driver holding parameters, optimizer moments and the step RNG.
template <typename S>
class Trainer {
 public:
  Trainer(const ModelConfig& cfg, const TrainConfig& tc) : cfg_(cfg), tc_(tc) {
    cfg_.validate();
    register_model_params(params_, cfg_);
    Rng init = Rng(cfg_.seed).fork("init");
    params_.init(init);
    rng_ = Rng(cfg_.seed).fork("train");
    for (const auto& it : params_.items()) {
      moment_m_.push_back(ad::Mat<S>::Zero(it.value.rows(), it.value.cols()));
      moment_v_.push_back(ad::Mat<S>::Zero(it.value.rows(), it.value.cols()));
    }
  }

  /// One batch: a discriminator update on fresh fakes, then one
  /// generator/model update. Throws on non-finite losses.
  LossBreakdown train_step(const std::vector<const Example*>& batch, double beta) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const std::size_t n = batch.size();

    std::vector<LatentNoise<S>> d_noise, g_noise;
    if (cfg_.flags.gan)
      for (std::size_t i = 0; i < n; ++i) d_noise.push_back(draw_noise<S>(rng_, cfg_));
    for (std::size_t i = 0; i < n; ++i) g_noise.push_back(draw_noise<S>(rng_, cfg_));

    LossBreakdown out;
    out.beta = beta;

    if (cfg_.flags.gan) out.gan_d = discriminator_update(batch, d_noise);

    // Generator/model phase: per-example tapes in parallel, gradients
    // merged in example order for a deterministic sum.
    std::vector<nn::GradAccum<S>> accums(n, nn::GradAccum<S>(params_));
    std::vector<ExampleLossVars<S>> losses(n);
    std::vector<std::unique_ptr<ad::Tape<S>>> tapes(n);
    parallel_for(static_cast<int>(n), [&](int i) {
      tapes[i] = std::make_unique<ad::Tape<S>>();
      const nn::Bound<S> p = nn::bind(*tapes[i], params_);
      losses[i] = example_loss(*tapes[i], p, cfg_, tc_, *batch[i], beta, g_noise[i]);
      tapes[i]->backward(losses[i].total);
      accums[i].add_from(*tapes[i], p, S(1) / static_cast<S>(n));
      tapes[i].reset();
    });

    nn::GradAccum<S> merged(params_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < merged.grads.size(); ++j) merged.grads[j] += accums[i].grads[j];

    for (std::size_t i = 0; i < n; ++i) {
      out.recon += losses[i].recon / n;
      out.kl += losses[i].kl / n;
      out.bce += losses[i].bce / n;
      out.gan_g += losses[i].gan_g / n;
    }
    out.total = out.recon + beta * out.kl + tc_.alpha * out.bce +
                (cfg_.flags.gan ? tc_.kappa : 0.0) * out.gan_g;
    if (!std::isfinite(out.total))
      throw std::runtime_error("train_step: non-finite loss at step " + std::to_string(step_) +
                               " (recon=" + std::to_string(out.recon) +
                               ", kl=" + std::to_string(out.kl) + ", bce=" + std::to_string(out.bce) +
                               ", gan_g=" + std::to_string(out.gan_g) + ")");

    adam_step(params_, merged.grads, moment_m_, moment_v_, t_model_, tc_.lr, tc_.clip, false);
    ++step_;
    return out;
  }

  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  std::uint64_t step() const { return step_; }
  Rng& rng() { return rng_; }

  TrainStateBlob snapshot_state(std::uint32_t epoch, double best_val) const {
    static_assert(std::is_same_v<S, float>, "train state is a float32 format");
    TrainStateBlob blob;
    blob.step = step_;
    blob.epoch = epoch;
    blob.best_val = best_val;
    blob.rng_state = rng_.state();
    blob.adam_t_model = t_model_;
    blob.adam_t_disc = t_disc_;
    blob.moment_m = moment_m_;
    blob.moment_v = moment_v_;
    return blob;
  }

  void restore_state(const TrainStateBlob& blob) {
    static_assert(std::is_same_v<S, float>, "train state is a float32 format");
    if (blob.moment_m.size() != params_.count())
      throw std::runtime_error("train state does not match the parameter manifest");
    step_ = blob.step;
    rng_.set_state(blob.rng_state);
    t_model_ = blob.adam_t_model;
    t_disc_ = blob.adam_t_disc;
    moment_m_ = blob.moment_m;
    moment_v_ = blob.moment_v;
  }

 private:
  /// Scores fresh detached fakes against the data and steps the
  /// discriminator. Model parameters only feed values here, never grads.
  double discriminator_update(const std::vector<const Example*>& batch,
                              const std::vector<LatentNoise<S>>& noise) {
    const std::size_t n = batch.size();
    struct Fakes {
      ad::Mat<S> post, prior, lane_enc;
    };
    std::vector<Fakes> fakes(n);
    parallel_for(static_cast<int>(n), [&](int i) {
      ad::Tape<S> tape;
      const nn::Bound<S> p = nn::bind_const(tape, params_);
      const Example& ex = *batch[i];
      const LaneContexts<S> ctx = build_contexts(tape, p, cfg_, ex);
      const ad::Var<S> c_gt = ctx.c[static_cast<std::size_t>(ex.gt_index)];
      const ad::Var<S> y_tilde = encode_sequence(tape, p, cfg_, ex.target_future4, "future");
      const GaussianHead<S> post = posterior_params(p, y_tilde, c_gt);
      const GaussianHead<S> prior = prior_params(p, c_gt);
      const ad::Var<S> dec_post = decode_trajectory(
          tape, p, cfg_, c_gt, sample_latent(post, tape.constant(noise[i].post)), Vec2(0, 0));
      const ad::Var<S> dec_prior = decode_trajectory(
          tape, p, cfg_, c_gt, sample_latent(prior, tape.constant(noise[i].prior)), Vec2(0, 0));
      fakes[i] = {dec_post.value(), dec_prior.value(),
                  ad::Mat<S>(ad::cols(ctx.lane_enc, ex.gt_index, 1).value())};
    });

    ad::Tape<S> tape;
    const nn::Bound<S> p = nn::bind(tape, params_);
    std::vector<ad::Var<S>> real_logits, fake_logits;
    for (std::size_t i = 0; i < n; ++i) {
      const Example& ex = *batch[i];
      const ProcessedLane& lane = ex.lanes.lanes[static_cast<std::size_t>(ex.gt_index)];
      const ad::Var<S> lane_enc = tape.constant(fakes[i].lane_enc);
      ad::Mat<S> real(2 * cfg_.T, 1);
      for (int t = 0; t < cfg_.T; ++t) {
        real(2 * t, 0) = static_cast<S>(ex.future(t, 0));
        real(2 * t + 1, 0) = static_cast<S>(ex.future(t, 1));
      }
      real_logits.push_back(
          discriminator_score(tape, p, cfg_, tape.constant(std::move(real)), lane, lane_enc));
      fake_logits.push_back(
          discriminator_score(tape, p, cfg_, tape.constant(fakes[i].post), lane, lane_enc));
      fake_logits.push_back(
          discriminator_score(tape, p, cfg_, tape.constant(fakes[i].prior), lane, lane_enc));
    }
    const ad::Var<S> loss = gan_discriminator_loss(real_logits, fake_logits);
    tape.backward(loss);
    nn::GradAccum<S> grads(params_);
    grads.add_from(tape, p);
    adam_step(params_, grads.grads, moment_m_, moment_v_, t_disc_, tc_.lr, tc_.clip, true);
    return static_cast<double>(loss.value()(0, 0));
  }

  ModelConfig cfg_;
  TrainConfig tc_;
  nn::ParamStore<S> params_;
  std::vector<ad::Mat<S>> moment_m_, moment_v_;
  std::uint64_t step_ = 0, t_model_ = 0, t_disc_ = 0;
  Rng rng_;
};

struct FitResult {
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::string state_path;
  std::string metrics_path;
  double best_val = std::numeric_limits<double>::infinity();
  std::uint64_t steps = 0;
};

/// Validation metric: mean over the held-out examples of the min-ADE over
/// val_k multi-mode samples, deterministic per (seed, epoch).
template <typename S>
double validation_min_ade(const nn::ParamStore<S>& params, const ModelConfig& cfg,
                          const std::vector<const Example*>& val, int val_k,
                          std::uint64_t seed_tag) {
  if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> scores(val.size(), 0.0);
  parallel_for(static_cast<int>(val.size()), [&](int i) {
    Rng rng = Rng(cfg.seed).fork("val").fork(seed_tag).fork(static_cast<std::uint64_t>(i));
    const PredictionSet pred = predict_example(params, cfg, *val[i], val_k, false, rng);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& traj : pred.trajs) best = std::min(best, ade(traj, val[i]->future));
    scores[static_cast<std::size_t>(i)] = best;
  });
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

/// Full training run: splits train/validation, loops epochs with cyclical
/// beta annealing, validates every val_every epochs and checkpoints on
/// improvement. Writes metrics.csv and ckpt/{best,last}.ckpt (+ state).
FitResult fit(const std::vector<Scene>& scenes, const RunConfig& rc, const std::string& run_dir);

}  // namespace hlsf
