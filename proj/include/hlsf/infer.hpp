#pragma once

#include <string>
#include <vector>

#include "hlsf/model.hpp"

namespace hlsf {

/// Integer sample allocation over the modes: every mode gets its floor
/// share floor(K * w_m); the leftover goes to the largest fractional
/// parts, ties to the lowest index. Sums to K for any weight vector.
struct AllocationPlan {
  std::vector<int> counts;
  int K = 0;
};
AllocationPlan allocate_samples(const std::vector<double>& weights, int K);

/// K sampled trajectories for one target with their mode assignments.
struct PredictionSet {
  std::string scene_id;
  std::string target_id;
  int K = 0;
  std::vector<double> weights;          // per mode, as used for allocation
  std::vector<int> counts;              // per mode
  std::vector<Eigen::MatrixX2d> trajs;  // K trajectories, T x 2 each
  std::vector<int> mode_of;             // reference mode per trajectory
};

/// Prediction JSONL, one target per line:
///   {"scene_id", "target_id", "K", "weights", "counts", "trajs", "mode_of"}
void write_predictions(const std::string& path, const std::vector<PredictionSet>& preds);
std::vector<PredictionSet> read_predictions(const std::string& path);

/// Samples K trajectories for one example. Multi-mode inference draws
/// counts_m prior samples per lane (weights renormalized over real lanes);
/// single-mode inference takes all K from the highest-weight mode.
template <typename S>
PredictionSet predict_example(const nn::ParamStore<S>& params, const ModelConfig& cfg,
                              const Example& ex, int K, bool single_mode, Rng& rng) {
  if (K < 1) throw std::invalid_argument("predict: K must be >= 1");
  ad::Tape<S> tape;
  const nn::Bound<S> p = nn::bind_const(tape, params);
  const LaneContexts<S> ctx = build_contexts(tape, p, cfg, ex);

  PredictionSet out;
  out.scene_id = ex.scene_id;
  out.target_id = ex.target_id;
  out.K = K;

  const int modes = static_cast<int>(ctx.c.size());
  if (cfg.single_context) {
    out.weights = {1.0};
    out.counts = {K};
  } else {
    const ad::Var<S> logits = mode_logits(p, ctx.c);
    const ad::Var<S> w = mode_weights_from_logits(logits, ex.lanes.valid, cfg.mask_fake);
    // Fake lanes are padding; sampling from them would decode against
    // all-zero geometry, so their mass is redistributed.
    std::vector<double> weights(static_cast<std::size_t>(modes), 0.0);
    double total = 0.0;
    for (int m = 0; m < modes; ++m) {
      if (ex.lanes.lanes[static_cast<std::size_t>(m)].is_fake) continue;
      weights[static_cast<std::size_t>(m)] = static_cast<double>(w.value()(m, 0));
      total += weights[static_cast<std::size_t>(m)];
    }
    int real_lanes = 0;
    for (int m = 0; m < modes; ++m)
      real_lanes += ex.lanes.lanes[static_cast<std::size_t>(m)].is_fake ? 0 : 1;
    for (int m = 0; m < modes; ++m) {
      if (ex.lanes.lanes[static_cast<std::size_t>(m)].is_fake) continue;
      weights[static_cast<std::size_t>(m)] =
          total > 0.0 ? weights[static_cast<std::size_t>(m)] / total : 1.0 / real_lanes;
    }
    out.weights = weights;
    if (single_mode) {
      int best = 0;
      for (int m = 1; m < modes; ++m)
        if (weights[static_cast<std::size_t>(m)] > weights[static_cast<std::size_t>(best)])
          best = m;
      out.counts.assign(static_cast<std::size_t>(modes), 0);
      out.counts[static_cast<std::size_t>(best)] = K;
    } else {
      out.counts = allocate_samples(weights, K).counts;
    }
  }

  const int t_steps = cfg.T;
  for (int m = 0; m < static_cast<int>(out.counts.size()); ++m) {
    const int n = out.counts[static_cast<std::size_t>(m)];
    if (n == 0) continue;
    const GaussianHead<S> prior = prior_params(p, ctx.c[static_cast<std::size_t>(m)]);
    ad::Mat<S> eps(cfg.D, n);
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < cfg.D; ++r) eps(r, c) = static_cast<S>(rng.normal());
    const ad::Var<S> z = sample_latent(prior, tape.constant(std::move(eps)));
    const ad::Var<S> decoded =
        decode_trajectory(tape, p, cfg, ctx.c[static_cast<std::size_t>(m)], z, Vec2(0.0, 0.0));
    for (int c = 0; c < n; ++c) {
      Eigen::MatrixX2d traj(t_steps, 2);
      for (int t = 0; t < t_steps; ++t) {
        traj(t, 0) = static_cast<double>(decoded.value()(2 * t, c));
        traj(t, 1) = static_cast<double>(decoded.value()(2 * t + 1, c));
      }
      out.trajs.push_back(std::move(traj));
      out.mode_of.push_back(m);
    }
  }
  return out;
}

}  // namespace hlsf
