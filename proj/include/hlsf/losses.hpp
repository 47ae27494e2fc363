#pragma once

#include <vector>

#include "hlsf/model.hpp"

namespace hlsf {

/// Mean over timesteps of the squared Euclidean position error. `decoded`
/// is a (2T x 1) stacked trajectory on the tape.
template <typename S>
ad::Var<S> recon_loss(const ad::Var<S>& decoded, const Eigen::MatrixX2d& future) {
  const int t_steps = static_cast<int>(future.rows());
  if (decoded.rows() != 2 * t_steps || decoded.cols() != 1)
    throw std::invalid_argument("recon_loss: trajectory shape mismatch");
  ad::Mat<S> y(2 * t_steps, 1);
  for (int t = 0; t < t_steps; ++t) {
    y(2 * t, 0) = static_cast<S>(future(t, 0));
    y(2 * t + 1, 0) = static_cast<S>(future(t, 1));
  }
  ad::Tape<S>& tape = *decoded.tape;
  return ad::scale(ad::sum_all(ad::square(ad::sub(decoded, tape.constant(std::move(y))))),
                   S(1) / static_cast<S>(t_steps));
}

/// Closed-form KL between diagonal Gaussians q and p, summed over the
/// latent dimensions.
template <typename S>
ad::Var<S> kl_divergence(const GaussianHead<S>& q, const GaussianHead<S>& p) {
  const ad::Var<S> var_q = ad::square(q.sigma);
  const ad::Var<S> var_p = ad::square(p.sigma);
  const ad::Var<S> mean_term = ad::square(ad::sub(q.mu, p.mu));
  const ad::Var<S> ratio = ad::div(ad::add(var_q, mean_term), ad::scale(var_p, S(2)));
  const ad::Var<S> logs = ad::sub(ad::log_(p.sigma), ad::log_(q.sigma));
  const int d = q.mu.rows();
  return ad::add_scalar(ad::sum_all(ad::add(logs, ratio)), S(-0.5) * static_cast<S>(d));
}

/// Mode-selection loss against the one-hot ground-truth lane. As written
/// this is elementwise binary cross entropy over the softmax vector; the
/// categorical flag switches to -log w_gt only.
template <typename S>
ad::Var<S> mode_selection_loss(const ad::Var<S>& weights, int gt_index, bool categorical) {
  if (gt_index < 0 || gt_index >= weights.rows())
    throw std::invalid_argument("mode_selection_loss: gt index out of range");
  constexpr S eps = S(1e-12);
  const ad::Var<S> w_gt = ad::rows(weights, gt_index, 1);
  ad::Var<S> loss = ad::neg(ad::log_(ad::add_scalar(w_gt, eps)));
  if (categorical) return loss;
  for (int m = 0; m < weights.rows(); ++m) {
    if (m == gt_index) continue;
    const ad::Var<S> one_minus =
        ad::add_scalar(ad::neg(ad::rows(weights, m, 1)), S(1) + eps);
    loss = ad::sub(loss, ad::log_(one_minus));
  }
  return loss;
}

/// Non-saturating adversarial losses from raw logits.
/// gan_d = mean softplus(-real) + mean softplus(fake),
/// gan_g = mean softplus(-fake).
template <typename S>
ad::Var<S> gan_discriminator_loss(const std::vector<ad::Var<S>>& real_logits,
                                  const std::vector<ad::Var<S>>& fake_logits) {
  if (real_logits.empty() || fake_logits.empty())
    throw std::invalid_argument("gan_discriminator_loss: empty batch");
  const ad::Var<S> real = ad::vcat(real_logits);
  const ad::Var<S> fake = ad::vcat(fake_logits);
  return ad::add(ad::mean_all(ad::softplus(ad::neg(real))),
                 ad::mean_all(ad::softplus(fake)));
}

template <typename S>
ad::Var<S> gan_generator_loss(const std::vector<ad::Var<S>>& fake_logits) {
  if (fake_logits.empty()) throw std::invalid_argument("gan_generator_loss: empty batch");
  return ad::mean_all(ad::softplus(ad::neg(ad::vcat(fake_logits))));
}

/// Cyclical annealing: within each cycle beta ramps linearly from 0 to
/// beta_max over ramp_fraction of the cycle, then holds.
inline double beta_schedule(long long step, long long total_steps, int cycles,
                            double ramp_fraction, double beta_max) {
  if (cycles < 1) throw std::invalid_argument("beta_schedule: cycles must be >= 1");
  if (ramp_fraction <= 0.0 || ramp_fraction > 1.0)
    throw std::invalid_argument("beta_schedule: ramp_fraction in (0, 1]");
  if (total_steps < 1) return beta_max;
  const double cycle_len = static_cast<double>(total_steps) / cycles;
  const double pos = std::fmod(static_cast<double>(step), cycle_len) / cycle_len;
  return beta_max * std::min(1.0, pos / ramp_fraction);
}

}  // namespace hlsf
