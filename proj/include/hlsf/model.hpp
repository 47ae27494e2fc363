#pragma once

#include <string>
#include <vector>

#include "hlsf/autodiff.hpp"
#include "hlsf/candidates.hpp"
#include "hlsf/nn.hpp"

namespace hlsf {

enum class Recipe { M1, M2, M3, M4, M5, Baseline, BaselineBOM };

Recipe recipe_from_string(const std::string& name);
std::string recipe_to_string(Recipe r);

struct ModelDims {
  int history_embed = 16;
  int history_hidden = 16;
  int lane_embed = 64;
  int lane_hidden = 64;
  int message = 16;
  int node_hidden = 16;
  int mode_embed = 64;
  int decoder_embed = 16;
  int decoder_hidden = 128;
  int att_hidden = 64;   // additive-attention score width
  int head_hidden = 64;  // first layer of the posterior/prior heads
  int disc_embed = 16;
  int disc_hidden = 16;
};

struct ModelFlags {
  bool pdp = true;  // speed/heading/tangent preprocessing on the inputs
  bool vli = true;  // surrounding-lane attention context
  bool v2i = true;  // neighbor message-passing context
  bool gan = true;  // lane-shape discriminator regularization
};

struct ModelConfig {
  int M = 10;      // lane candidates
  int D = 16;      // latent width
  int F = 80;      // points per lane
  int H = 4;       // history steps (H+1 positions)
  int T = 12;      // future steps
  double tau = 5.0;
  int k_rounds = 1;
  ModelDims dims;
  ModelFlags flags;
  bool single_context = false;   // Baseline: one attention context, no modes
  int bom_samples = 1;           // > 1 trains on the best of this many decodes
  bool mask_fake = false;        // drop fake lanes from the mode softmax
  bool categorical_bce = false;  // alternative to the elementwise mode loss
  std::uint64_t seed = 0;
  double psi = 2.0;

  /// Width of one lane-level context vector under the active flags.
  int context_width() const {
    if (single_context) return dims.history_hidden + dims.lane_hidden;
    int w = dims.history_hidden + (flags.vli ? 2 * dims.lane_hidden : dims.lane_hidden);
    if (flags.v2i) w += dims.node_hidden;
    return w;
  }
  int history_row_width() const { return flags.pdp ? 4 : 2; }
  CandidateConfig candidates() const {
    CandidateConfig c;
    c.M = M;
    c.reach = static_cast<double>(F);
    c.spacing = 1.0;
    return c;
  }
  void validate() const;
};

/// Applies a training recipe's flag set on top of a base config.
ModelConfig apply_recipe(ModelConfig base, Recipe recipe);

/// One (scene, target) pair reduced to model inputs, all in the target
/// frame: preprocessed rows, candidate lanes, per-lane neighbor sets.
struct Example {
  std::string scene_id;
  std::string target_id;
  std::string group;                 // generator branch hint, for reports
  Eigen::MatrixXd target_history;    // (H+1) x 4: x, y, speed, heading
  Eigen::MatrixXd target_future4;    // T x 4, continuation kinematics
  Eigen::MatrixX2d future;           // T x 2 ground truth positions
  std::vector<Eigen::MatrixXd> other_history;  // per non-target agent
  std::vector<Vec2> other_current;
  LaneCandidateSet lanes;
  std::vector<std::vector<std::string>> chains;
  std::vector<std::vector<int>> lane_neighbors;  // indices into other_*
  int gt_index = -1;
};

/// Feature extraction for one target. The candidate subsample stream is
/// derived from the scene id alone, so every consumer sees the same lanes.
Example build_example(const Scene& scene, const std::string& target_id, const ModelConfig& cfg);

/// Examples for every target of every scene; scenes without a candidate
/// lane in reach are skipped.
std::vector<Example> build_examples(const std::vector<Scene>& scenes, const ModelConfig& cfg);

// ---- parameter manifest ----

/// Registers every learnable parameter for the config, in the fixed order
/// documented in the README. Names are stable across runs and recipes.
template <typename S>
void register_model_params(nn::ParamStore<S>& store, const ModelConfig& cfg) {
  const auto& d = cfg.dims;
  nn::register_linear(store, "hist_enc.embed", cfg.history_row_width(), d.history_embed);
  nn::register_lstm(store, "hist_enc.lstm", d.history_embed, d.history_hidden);
  nn::register_linear(store, "fut_enc.embed", cfg.history_row_width(), d.history_embed);
  nn::register_lstm(store, "fut_enc.lstm", d.history_embed, d.history_hidden);
  nn::register_linear(store, "lane_enc.embed", 5, d.lane_embed);
  nn::register_lstm(store, "lane_enc.lstm", d.lane_embed, d.lane_hidden);

  if (cfg.flags.vli || cfg.single_context) {
    store.add("vli.W_x", d.att_hidden, d.history_hidden, d.history_hidden);
    store.add("vli.W_l", d.att_hidden, d.lane_hidden, d.lane_hidden);
    store.add("vli.v", 1, d.att_hidden, d.att_hidden);
  }
  if (cfg.flags.v2i && !cfg.single_context) {
    nn::register_linear(store, "v2i.msg", 2 + 2 * d.node_hidden, d.message);
    nn::register_gru(store, "v2i.gru", d.message, d.node_hidden);
  }
  if (!cfg.single_context) {
    nn::register_linear(store, "mode.embed", cfg.context_width(), d.mode_embed);
    nn::register_linear(store, "mode.out", cfg.M * d.mode_embed, cfg.M);
  }

  const int c_w = cfg.context_width();
  for (const char* head : {"post.mean", "post.std"}) {
    nn::register_linear(store, std::string(head) + ".l1", d.history_hidden + c_w, d.head_hidden);
    nn::register_linear(store, std::string(head) + ".l2", d.head_hidden, cfg.D);
  }
  for (const char* head : {"prior.mean", "prior.std"}) {
    nn::register_linear(store, std::string(head) + ".l1", c_w, d.head_hidden);
    nn::register_linear(store, std::string(head) + ".l2", d.head_hidden, cfg.D);
  }

  nn::register_linear(store, "dec.embed", 2, d.decoder_embed);
  nn::register_lstm(store, "dec.lstm", d.decoder_embed + c_w + cfg.D, d.decoder_hidden);
  nn::register_linear(store, "dec.out", d.decoder_hidden, 2);

  if (cfg.flags.gan) {
    nn::register_linear(store, "disc.embed", 4, d.disc_embed);
    nn::register_lstm(store, "disc.lstm", d.disc_embed, d.disc_hidden);
    nn::register_linear(store, "disc.out", d.disc_hidden + d.lane_hidden, 1);
  }
}

/// Parameter names owned by the discriminator (excluded from the model's
/// optimizer step and vice versa).
inline bool is_discriminator_param(const std::string& name) {
  return name.rfind("disc.", 0) == 0;
}

// ---- forward passes ----

template <typename S>
struct LaneContexts {
  ad::Var<S> x_tilde;                 // target history encoding
  ad::Var<S> lane_enc;                // lane_hidden x M, all candidate encodings
  std::vector<ad::Var<S>> c;          // M contexts (or 1 when single_context)
  std::vector<ad::Var<S>> alpha;      // per-lane attention weights (empty w/o VLI)
  std::vector<ad::Var<S>> other_enc;  // encodings of the other agents
};

namespace detail {

/// Sequence rows -> per-step column batches. `rows` selects the leading
/// row width (2 with preprocessing off).
template <typename S>
std::vector<ad::Var<S>> steps_from_rows(ad::Tape<S>& tape,
                                        const std::vector<const Eigen::MatrixXd*>& seqs,
                                        int width) {
  const int n = static_cast<int>(seqs.front()->rows());
  std::vector<ad::Var<S>> steps;
  steps.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    ad::Mat<S> x(width, static_cast<int>(seqs.size()));
    for (std::size_t j = 0; j < seqs.size(); ++j)
      x.col(static_cast<int>(j)) =
          seqs[j]->row(t).head(width).transpose().template cast<S>();
    steps.push_back(tape.constant(std::move(x)));
  }
  return steps;
}

}  // namespace detail

/// Encodes one preprocessed sequence (history/future kind uses the 4-wide
/// vehicle rows, lane kind the 5-wide lane rows).
template <typename S>
ad::Var<S> encode_sequence(ad::Tape<S>& tape, const nn::Bound<S>& p, const ModelConfig& cfg,
                           const Eigen::MatrixXd& rows, const std::string& kind) {
  const bool lane = kind == "lane";
  const int width = lane ? 5 : cfg.history_row_width();
  if (rows.cols() < width) throw std::invalid_argument("encode_sequence: row width mismatch");
  const std::string net = lane ? "lane_enc" : (kind == "future" ? "fut_enc" : "hist_enc");
  const auto steps = detail::steps_from_rows<S>(tape, {&rows}, width);
  return nn::encode_rows(p, net + ".embed", net + ".lstm",
                         steps, lane ? cfg.dims.lane_hidden : cfg.dims.history_hidden);
}

/// Additive attention scores of the target encoding against every lane
/// encoding: v . tanh(W_x X + W_l L), one score per lane column.
template <typename S>
ad::Var<S> vli_scores(const nn::Bound<S>& p, const ad::Var<S>& x_tilde,
                      const ad::Var<S>& lane_enc) {
  const ad::Var<S> keys =
      ad::tanh_(ad::add_bias(ad::matmul(p["vli.W_l"], lane_enc), ad::matmul(p["vli.W_x"], x_tilde)));
  return ad::matmul(p["vli.v"], keys);  // 1 x M
}

/// VLI context for reference lane m: the lane's own encoding concatenated
/// with the attention-weighted sum of the other lanes. Attention weights
/// are a softmax over the surrounding lanes only.
template <typename S>
std::pair<ad::Var<S>, ad::Var<S>> vli_context(const nn::Bound<S>& p, const ad::Var<S>& x_tilde,
                                              const ad::Var<S>& lane_enc, int m) {
  ad::Tape<S>& tape = *x_tilde.tape;
  const int m_total = lane_enc.cols();
  const ad::Var<S> own = ad::cols(lane_enc, m, 1);
  if (m_total == 1) {
    const ad::Var<S> zero = tape.constant(ad::Mat<S>::Zero(lane_enc.rows(), 1));
    return {ad::vcat(own, zero), tape.constant(ad::Mat<S>::Zero(0, 1))};
  }
  const ad::Var<S> scores = vli_scores(p, x_tilde, lane_enc);
  std::vector<ad::Var<S>> score_parts, lane_parts;
  if (m > 0) {
    score_parts.push_back(ad::cols(scores, 0, m));
    lane_parts.push_back(ad::cols(lane_enc, 0, m));
  }
  if (m + 1 < m_total) {
    score_parts.push_back(ad::cols(scores, m + 1, m_total - m - 1));
    lane_parts.push_back(ad::cols(lane_enc, m + 1, m_total - m - 1));
  }
  const ad::Var<S> others_scores = ad::hcat(score_parts);  // 1 x (M-1)
  const ad::Var<S> others = ad::hcat(lane_parts);          // lane_hidden x (M-1)
  // Softmax over the row: transpose via vcat of single columns is avoided
  // by treating the row as one column per score.
  std::vector<ad::Var<S>> cols_v;
  for (int l = 0; l < m_total - 1; ++l) cols_v.push_back(ad::cols(others_scores, l, 1));
  const ad::Var<S> alpha = ad::softmax(ad::vcat(cols_v));  // (M-1) x 1
  const ad::Var<S> summary = ad::matmul(others, alpha);
  return {ad::vcat(own, summary), alpha};
}

/// Baseline attention summary over all lanes (no reference lane).
template <typename S>
std::pair<ad::Var<S>, ad::Var<S>> attention_over_all(const nn::Bound<S>& p,
                                                     const ad::Var<S>& x_tilde,
                                                     const ad::Var<S>& lane_enc) {
  const ad::Var<S> scores = vli_scores(p, x_tilde, lane_enc);
  std::vector<ad::Var<S>> cols_v;
  for (int l = 0; l < lane_enc.cols(); ++l) cols_v.push_back(ad::cols(scores, l, 1));
  const ad::Var<S> alpha = ad::softmax(ad::vcat(cols_v));
  return {ad::matmul(lane_enc, alpha), alpha};
}

/// Message-passing context over the neighbors of reference lane m. Every
/// node in the neighborhood exchanges messages for k_rounds, then the
/// neighbors' final states are summed. The target alone yields zero.
template <typename S>
ad::Var<S> v2i_context(ad::Tape<S>& tape, const nn::Bound<S>& p, const ModelConfig& cfg,
                       const ad::Var<S>& x_tilde, const std::vector<ad::Var<S>>& other_enc,
                       const std::vector<Vec2>& other_current, const std::vector<int>& neighbors) {
  const int hidden = cfg.dims.node_hidden;
  if (neighbors.empty()) return tape.constant(ad::Mat<S>::Zero(hidden, 1));

  std::vector<ad::Var<S>> h;  // node 0 = target, then the selected neighbors
  std::vector<Vec2> pos;
  h.push_back(x_tilde);
  pos.push_back(Vec2(0.0, 0.0));
  for (int j : neighbors) {
    h.push_back(other_enc[static_cast<std::size_t>(j)]);
    pos.push_back(other_current[static_cast<std::size_t>(j)]);
  }

  const int n = static_cast<int>(h.size());
  for (int round = 0; round < cfg.k_rounds; ++round) {
    std::vector<ad::Var<S>> next;
    next.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      ad::Var<S> incoming;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        ad::Mat<S> rel(2, 1);
        rel(0, 0) = static_cast<S>(pos[j].x() - pos[i].x());
        rel(1, 0) = static_cast<S>(pos[j].y() - pos[i].y());
        const ad::Var<S> msg = nn::linear_relu(
            p, "v2i.msg", ad::vcat(std::vector<ad::Var<S>>{tape.constant(rel), h[i], h[j]}));
        incoming = incoming.valid() ? ad::add(incoming, msg) : msg;
      }
      next.push_back(nn::gru_step(p, "v2i.gru", incoming, h[i]));
    }
    h = std::move(next);
  }

  ad::Var<S> b;
  for (int i = 1; i < n; ++i) b = b.valid() ? ad::add(b, h[i]) : h[i];
  return b;
}

/// Full scene-context extraction for one example.
template <typename S>
LaneContexts<S> build_contexts(ad::Tape<S>& tape, const nn::Bound<S>& p, const ModelConfig& cfg,
                               const Example& ex) {
  LaneContexts<S> out;

  // Histories (target plus all other agents) share the encoder; batch them.
  std::vector<const Eigen::MatrixXd*> seqs{&ex.target_history};
  for (const auto& oh : ex.other_history) seqs.push_back(&oh);
  const auto hist_steps = detail::steps_from_rows<S>(tape, seqs, cfg.history_row_width());
  const ad::Var<S> hist_all = nn::encode_rows(p, "hist_enc.embed", "hist_enc.lstm", hist_steps,
                                              cfg.dims.history_hidden);
  out.x_tilde = ad::cols(hist_all, 0, 1);
  const bool need_others = cfg.flags.v2i && !cfg.single_context;
  if (need_others)
    for (std::size_t j = 0; j < ex.other_history.size(); ++j)
      out.other_enc.push_back(ad::cols(hist_all, static_cast<int>(j) + 1, 1));

  // Lane rows, all M lanes batched as columns. With preprocessing off only
  // the raw coordinates survive (tangent/direction columns zeroed).
  const int f = ex.lanes.lanes.front().size();
  std::vector<ad::Var<S>> lane_steps;
  lane_steps.reserve(static_cast<std::size_t>(f));
  for (int t = 0; t < f; ++t) {
    ad::Mat<S> x(5, ex.lanes.count());
    for (int m = 0; m < ex.lanes.count(); ++m) {
      x.col(m) = ex.lanes.lanes[m].rows.row(t).transpose().template cast<S>();
      if (!cfg.flags.pdp) x.col(m).tail(3).setZero();
    }
    lane_steps.push_back(tape.constant(std::move(x)));
  }
  out.lane_enc =
      nn::encode_rows(p, "lane_enc.embed", "lane_enc.lstm", lane_steps, cfg.dims.lane_hidden);

  if (cfg.single_context) {
    const auto [summary, alpha] = attention_over_all(p, out.x_tilde, out.lane_enc);
    out.c.push_back(ad::vcat(out.x_tilde, summary));
    out.alpha.push_back(alpha);
    return out;
  }

  for (int m = 0; m < ex.lanes.count(); ++m) {
    std::vector<ad::Var<S>> parts{out.x_tilde};
    if (cfg.flags.vli) {
      auto [a, alpha] = vli_context(p, out.x_tilde, out.lane_enc, m);
      parts.push_back(a);
      out.alpha.push_back(alpha);
    } else {
      parts.push_back(ad::cols(out.lane_enc, m, 1));
    }
    if (cfg.flags.v2i) {
      parts.push_back(v2i_context(tape, p, cfg, out.x_tilde, out.other_enc, ex.other_current,
                                  ex.lane_neighbors[static_cast<std::size_t>(m)]));
    }
    out.c.push_back(ad::vcat(parts));
  }
  return out;
}

/// Mode logits from the M contexts: each embedded and rectified, then the
/// concatenation projected to M scores.
template <typename S>
ad::Var<S> mode_logits(const nn::Bound<S>& p, const std::vector<ad::Var<S>>& contexts) {
  std::vector<ad::Var<S>> embedded;
  embedded.reserve(contexts.size());
  for (const auto& c : contexts) embedded.push_back(nn::linear_relu(p, "mode.embed", c));
  return nn::linear(p, "mode.out", ad::vcat(embedded));
}

/// Mode weights; with mask_fake the softmax runs over real lanes only and
/// fake lanes get exactly zero weight.
template <typename S>
ad::Var<S> mode_weights_from_logits(const ad::Var<S>& logits, const std::vector<bool>& valid,
                                    bool mask_fake) {
  if (!mask_fake) return ad::softmax(logits);
  ad::Tape<S>& tape = *logits.tape;
  std::vector<ad::Var<S>> kept;
  std::vector<int> where;
  for (int m = 0; m < logits.rows(); ++m) {
    if (!valid[static_cast<std::size_t>(m)]) continue;
    kept.push_back(ad::rows(logits, m, 1));
    where.push_back(m);
  }
  const ad::Var<S> sm = ad::softmax(ad::vcat(kept));
  std::vector<ad::Var<S>> full;
  int at = 0;
  for (int m = 0; m < logits.rows(); ++m) {
    if (at < static_cast<int>(where.size()) && where[static_cast<std::size_t>(at)] == m) {
      full.push_back(ad::rows(sm, at, 1));
      ++at;
    } else {
      full.push_back(tape.constant(ad::Mat<S>::Zero(1, 1)));
    }
  }
  return ad::vcat(full);
}

template <typename S>
struct GaussianHead {
  ad::Var<S> mu;
  ad::Var<S> sigma;  // strictly positive: softplus(raw) + 1e-4
};

template <typename S>
GaussianHead<S> posterior_params(const nn::Bound<S>& p, const ad::Var<S>& y_tilde,
                                 const ad::Var<S>& c) {
  const ad::Var<S> in = ad::vcat(y_tilde, c);
  return {nn::linear(p, "post.mean.l2", ad::relu(nn::linear(p, "post.mean.l1", in))),
          ad::add_scalar(
              ad::softplus(nn::linear(p, "post.std.l2", ad::relu(nn::linear(p, "post.std.l1", in)))),
              S(1e-4))};
}

template <typename S>
GaussianHead<S> prior_params(const nn::Bound<S>& p, const ad::Var<S>& c) {
  return {nn::linear(p, "prior.mean.l2", ad::relu(nn::linear(p, "prior.mean.l1", c))),
          ad::add_scalar(ad::softplus(nn::linear(p, "prior.std.l2",
                                                 ad::relu(nn::linear(p, "prior.std.l1", c)))),
                         S(1e-4))};
}

/// Reparameterized draw: z = mu + sigma * eps. The noise comes in as a
/// constant, one column per sample.
template <typename S>
ad::Var<S> sample_latent(const GaussianHead<S>& g, const ad::Var<S>& eps) {
  const int k = eps.cols();
  const ad::Var<S> mu = k == 1 ? g.mu : ad::broadcast_cols(g.mu, k);
  const ad::Var<S> sigma = k == 1 ? g.sigma : ad::broadcast_cols(g.sigma, k);
  return ad::add(mu, ad::hadamard(sigma, eps));
}

/// Autoregressive decoder: returns the predicted positions stacked as a
/// (2T x K) matrix, K = z.cols() trajectories decoded in parallel.
template <typename S>
ad::Var<S> decode_trajectory(ad::Tape<S>& tape, const nn::Bound<S>& p, const ModelConfig& cfg,
                             const ad::Var<S>& c, const ad::Var<S>& z, const Vec2& start) {
  const int k = z.cols();
  const ad::Var<S> ctx = k == 1 ? c : ad::broadcast_cols(c, k);
  ad::Mat<S> p0(2, k);
  p0.row(0).setConstant(static_cast<S>(start.x()));
  p0.row(1).setConstant(static_cast<S>(start.y()));
  ad::Var<S> prev = tape.constant(std::move(p0));
  auto state = nn::lstm_zero_state(tape, cfg.dims.decoder_hidden, k);
  std::vector<ad::Var<S>> outputs;
  outputs.reserve(static_cast<std::size_t>(cfg.T));
  for (int t = 0; t < cfg.T; ++t) {
    const ad::Var<S> e = nn::linear_relu(p, "dec.embed", prev);
    state = nn::lstm_step(p, "dec.lstm", ad::vcat(std::vector<ad::Var<S>>{e, ctx, z}), state);
    prev = nn::linear(p, "dec.out", state.h);
    outputs.push_back(prev);
  }
  return ad::vcat(outputs);  // (2T) x K
}

/// Discriminator logit for a trajectory (2T x 1 stacked, or a constant
/// ground-truth trajectory) against a real reference lane. The offset
/// features subtract the nearest centerline point of each step, selected
/// by value; gradients flow through the trajectory coordinates.
template <typename S>
ad::Var<S> discriminator_score(ad::Tape<S>& tape, const nn::Bound<S>& p, const ModelConfig& cfg,
                               const ad::Var<S>& traj, const ProcessedLane& lane,
                               const ad::Var<S>& lane_encoding) {
  if (lane.is_fake) throw std::invalid_argument("discriminator_score: fake lane");
  if (traj.rows() != 2 * cfg.T || traj.cols() != 1)
    throw std::invalid_argument("discriminator_score: trajectory shape");

  auto state = nn::lstm_zero_state(tape, cfg.dims.disc_hidden, 1);
  for (int t = 0; t < cfg.T; ++t) {
    const ad::Var<S> pt = ad::rows(traj, 2 * t, 2);
    const Vec2 value(static_cast<double>(pt.value()(0, 0)), static_cast<double>(pt.value()(1, 0)));
    const auto near = nearest_centerline_point(value, lane);
    ad::Mat<S> lf(2, 1);
    lf << static_cast<S>(near.point.x()), static_cast<S>(near.point.y());
    const ad::Var<S> delta = ad::sub(pt, tape.constant(std::move(lf)));
    const ad::Var<S> row = ad::vcat(pt, delta);
    state = nn::lstm_step(p, "disc.lstm", nn::linear_relu(p, "disc.embed", row), state);
  }
  return nn::linear(p, "disc.out", ad::vcat(state.h, lane_encoding));
}

}  // namespace hlsf
