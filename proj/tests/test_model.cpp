#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hlsf/infer.hpp"
#include "hlsf/model.hpp"
#include "hlsf/synth.hpp"
#include "oracles.hpp"

using namespace hlsf;
using D = double;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.M = 3;
  cfg.D = 2;
  cfg.F = 6;
  cfg.H = 2;
  cfg.T = 3;
  cfg.dims.history_embed = 3;
  cfg.dims.history_hidden = 4;
  cfg.dims.lane_embed = 3;
  cfg.dims.lane_hidden = 4;
  cfg.dims.message = 3;
  cfg.dims.node_hidden = 4;
  cfg.dims.mode_embed = 3;
  cfg.dims.decoder_embed = 3;
  cfg.dims.decoder_hidden = 5;
  cfg.dims.att_hidden = 3;
  cfg.dims.head_hidden = 4;
  cfg.dims.disc_embed = 3;
  cfg.dims.disc_hidden = 3;
  cfg.seed = 11;
  return cfg;
}

/// Hand-built example for the tiny config: three short lanes, the target
/// plus two other agents.
Example tiny_example(const ModelConfig& cfg, bool second_lane_fake = false) {
  Example ex;
  ex.scene_id = "tiny-0";
  ex.target_id = "target";
  ex.group = "g0";

  Eigen::MatrixX2d hist(cfg.H + 1, 2);
  hist << -2.0, 0.1, -1.0, 0.0, 0.0, 0.0;
  ex.target_history = derive_kinematics(hist, 2.0).rows;

  Eigen::MatrixX2d joined(cfg.T + 1, 2);
  joined << 0.0, 0.0, 1.1, 0.05, 2.2, 0.1, 3.2, 0.3;
  ex.target_future4 = derive_kinematics(joined, 2.0).rows.bottomRows(cfg.T);
  ex.future = joined.bottomRows(cfg.T);

  for (int a = 0; a < 2; ++a) {
    Eigen::MatrixX2d oh(cfg.H + 1, 2);
    const double y = a == 0 ? 1.5 : -8.0;
    oh << -2.0 + 0.3 * a, y, -1.0, y + 0.1, 0.2 * a, y;
    ex.other_history.push_back(derive_kinematics(oh, 2.0).rows);
    ex.other_current.push_back(Vec2(0.2 * a, y));
  }

  for (int m = 0; m < cfg.M; ++m) {
    ProcessedLane lane;
    if (second_lane_fake && m == 2) {
      lane.rows.setZero(cfg.F, 5);
      lane.is_fake = true;
    } else {
      Eigen::MatrixX2d pts(cfg.F, 2);
      for (int i = 0; i < cfg.F; ++i) pts.row(i) << 1.0 * (i + 1), 1.7 * m;
      lane = derive_lane_geometry(make_polyline(pts));
    }
    ex.lanes.lanes.push_back(lane);
    ex.lanes.valid.push_back(!lane.is_fake);
  }
  ex.lanes.gt_index = 0;
  ex.lanes.lanes[0].gt = true;
  ex.gt_index = 0;

  for (int m = 0; m < cfg.M; ++m) {
    std::vector<int> neigh;
    if (!ex.lanes.lanes[m].is_fake)
      for (int j = 0; j < 2; ++j) {
        const auto near = nearest_centerline_point(ex.other_current[j], ex.lanes.lanes[m]);
        if (near.distance <= cfg.tau) neigh.push_back(j);
      }
    ex.lane_neighbors.push_back(neigh);
    ex.chains.push_back({});
  }
  return ex;
}

nn::ParamStore<D> tiny_params(const ModelConfig& cfg, std::uint64_t seed = 5) {
  nn::ParamStore<D> store;
  register_model_params(store, cfg);
  Rng rng(seed);
  store.init(rng);
  return store;
}

}  // namespace

TEST_CASE("encode_sequence: minimal input, constant fake lanes, purity") {
  const ModelConfig cfg = tiny_config();
  const auto store = tiny_params(cfg);

  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);

  Eigen::MatrixXd one_row(1, 4);
  one_row << 0.5, -0.25, 1.0, 0.1;
  const auto h1 = encode_sequence(tape, p, cfg, one_row, "history");
  CHECK(h1.rows() == cfg.dims.history_hidden);
  CHECK(h1.value().allFinite());

  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(cfg.F, 5);
  const auto f1 = encode_sequence(tape, p, cfg, zeros, "lane");
  const auto f2 = encode_sequence(tape, p, cfg, zeros, "lane");
  CHECK((f1.value() - f2.value()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(f1.rows() == cfg.dims.lane_hidden);

  Eigen::MatrixXd too_narrow(3, 1);
  too_narrow.setOnes();
  CHECK_THROWS_AS(encode_sequence(tape, p, cfg, too_narrow, "history"), std::invalid_argument);
}

TEST_CASE("encode_sequence matches the plain-Eigen oracle") {
  const ModelConfig cfg = tiny_config();
  const auto store = tiny_params(cfg, 17);

  Rng rng(3);
  Eigen::MatrixXd rows(4, 4);
  for (int i = 0; i < rows.size(); ++i) rows.data()[i] = rng.uniform(-1, 1);

  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);
  const auto got = encode_sequence(tape, p, cfg, rows, "history");
  const auto want = oracle::encode(store, "hist_enc.embed", "hist_enc.lstm", rows, 4,
                                   cfg.dims.history_hidden);
  CHECK((got.value().col(0) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("vli_context: uniform attention for identical lanes, M=1 degenerate case") {
  const ModelConfig cfg = tiny_config();
  const auto store = tiny_params(cfg);
  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);

  const int lh = cfg.dims.lane_hidden;
  ad::Mat<D> x = ad::Mat<D>::Constant(cfg.dims.history_hidden, 1, 0.3);
  ad::Mat<D> lanes(lh, 3);
  lanes.col(0) = Eigen::VectorXd::LinSpaced(lh, -0.2, 0.4);
  lanes.col(1) = lanes.col(0);
  lanes.col(2) = lanes.col(0);
  const auto [a, alpha] = vli_context(p, tape.constant(x), tape.constant(lanes), 0);
  CHECK(a.rows() == 2 * lh);
  for (int i = 0; i < alpha.rows(); ++i)
    CHECK(alpha.value()(i, 0) == doctest::Approx(0.5).epsilon(1e-12));

  const auto [a1, alpha1] = vli_context(p, tape.constant(x), tape.constant(ad::Mat<D>(lanes.col(0))), 0);
  CHECK(a1.rows() == 2 * lh);
  CHECK(a1.value().bottomRows(lh).cwiseAbs().maxCoeff() == 0.0);  // zero summary
  CHECK(alpha1.rows() == 0);
}

TEST_CASE("vli_context matches a hand-rolled attention oracle") {
  const ModelConfig cfg = tiny_config();
  const auto store = tiny_params(cfg, 23);
  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);

  Rng rng(9);
  ad::Mat<D> x(cfg.dims.history_hidden, 1);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  ad::Mat<D> lanes(cfg.dims.lane_hidden, cfg.M);
  for (int i = 0; i < lanes.size(); ++i) lanes.data()[i] = rng.uniform(-1, 1);

  for (int m = 0; m < cfg.M; ++m) {
    const auto [a, alpha] = vli_context(p, tape.constant(x), tape.constant(lanes), m);
    std::vector<int> subset;
    for (int l = 0; l < cfg.M; ++l)
      if (l != m) subset.push_back(l);
    const Eigen::VectorXd want_alpha = oracle::attention_weights(store, x.col(0), lanes, subset);
    CHECK((alpha.value().col(0) - want_alpha).cwiseAbs().maxCoeff() < 1e-9);

    Eigen::VectorXd want_summary = Eigen::VectorXd::Zero(cfg.dims.lane_hidden);
    for (std::size_t i = 0; i < subset.size(); ++i)
      want_summary += want_alpha[static_cast<int>(i)] * lanes.col(subset[i]);
    CHECK((a.value().col(0).head(cfg.dims.lane_hidden) - lanes.col(m)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((a.value().col(0).tail(cfg.dims.lane_hidden) - want_summary).cwiseAbs().maxCoeff() < 1e-9);
    // Proper distribution over the surrounding lanes.
    CHECK(alpha.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("v2i_context: zero without neighbors, permutation invariant, matches unroll") {
  const ModelConfig cfg = tiny_config();
  const auto store = tiny_params(cfg, 31);
  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);

  Rng rng(13);
  const int nh = cfg.dims.node_hidden;
  ad::Mat<D> x(nh, 1);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  std::vector<ad::Var<D>> others;
  std::vector<Vec2> current;
  std::vector<Eigen::VectorXd> other_vals;
  for (int j = 0; j < 2; ++j) {
    ad::Mat<D> e(nh, 1);
    for (int i = 0; i < e.size(); ++i) e.data()[i] = rng.uniform(-1, 1);
    other_vals.push_back(e.col(0));
    others.push_back(tape.constant(e));
    current.push_back(Vec2(rng.uniform(-3, 3), rng.uniform(-3, 3)));
  }
  const auto x_var = tape.constant(x);

  // Target-only neighborhood.
  const auto b0 = v2i_context(tape, p, cfg, x_var, others, current, {});
  CHECK(b0.value().cwiseAbs().maxCoeff() == 0.0);

  // Hand unroll with one round.
  const auto b = v2i_context(tape, p, cfg, x_var, others, current, {0, 1});
  const Eigen::VectorXd want = oracle::v2i(
      store, {x.col(0), other_vals[0], other_vals[1]},
      {Eigen::Vector2d(0, 0), current[0], current[1]}, cfg.k_rounds);
  CHECK((b.value().col(0) - want).cwiseAbs().maxCoeff() < 1e-9);

  // Neighbor order must not matter.
  const auto b_perm = v2i_context(tape, p, cfg, x_var, others, current, {1, 0});
  CHECK((b.value() - b_perm.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("context widths track the ablation flags") {
  ModelConfig cfg;  // default dims
  cfg.seed = 3;
  CHECK(apply_recipe(cfg, Recipe::M5).context_width() == 160);
  CHECK(apply_recipe(cfg, Recipe::M4).context_width() == 160);
  CHECK(apply_recipe(cfg, Recipe::M3).context_width() == 144);
  CHECK(apply_recipe(cfg, Recipe::M2).context_width() == 80);
  CHECK(apply_recipe(cfg, Recipe::M1).context_width() == 80);
  CHECK(apply_recipe(cfg, Recipe::Baseline).context_width() == 80);

  // Decoder input width at defaults: embedding + context + latent.
  const ModelConfig m5 = apply_recipe(cfg, Recipe::M5);
  CHECK(m5.dims.decoder_embed + m5.context_width() + m5.D == 192);

  // Built contexts report the same widths.
  const ModelConfig tiny = tiny_config();
  for (Recipe r : {Recipe::M1, Recipe::M3, Recipe::M5}) {
    const ModelConfig c = apply_recipe(tiny, r);
    const auto store = tiny_params(c);
    const Example ex = tiny_example(c);
    ad::Tape<D> tape;
    const auto p = nn::bind_const(tape, store);
    const auto ctx = build_contexts(tape, p, c, ex);
    CHECK(static_cast<int>(ctx.c.size()) == c.M);
    for (const auto& cv : ctx.c) CHECK(cv.rows() == c.context_width());
  }
}

TEST_CASE("mode weights: softmax behavior and manual forward") {
  const ModelConfig cfg = tiny_config();
  const auto store = tiny_params(cfg, 41);
  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);

  // Saturation: one dominant logit.
  ad::Mat<D> logits(3, 1);
  logits << 20.0, 0.0, -1.0;
  const auto w = ad::softmax(tape.constant(logits));
  CHECK(w.value()(0, 0) > 0.999);

  // Equal logits, equal weights.
  const auto w_eq = ad::softmax(tape.constant(ad::Mat<D>::Zero(3, 1)));
  for (int i = 0; i < 3; ++i) CHECK(w_eq.value()(i, 0) == doctest::Approx(1.0 / 3));

  // Manual forward of the mode network at tiny dims.
  const Example ex = tiny_example(cfg);
  const auto ctx = build_contexts(tape, p, cfg, ex);
  const auto got = mode_logits(p, ctx.c);

  Eigen::VectorXd concat(cfg.M * cfg.dims.mode_embed);
  for (int m = 0; m < cfg.M; ++m)
    concat.segment(m * cfg.dims.mode_embed, cfg.dims.mode_embed) =
        oracle::relu(oracle::linear(store, "mode.embed", ctx.c[m].value().col(0)));
  const Eigen::VectorXd want = oracle::linear(store, "mode.out", concat);
  CHECK((got.value().col(0) - want).cwiseAbs().maxCoeff() < 1e-9);

  // Weight vector is a distribution.
  const auto weights = mode_weights_from_logits(got, ex.lanes.valid, cfg.mask_fake);
  CHECK(weights.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(weights.value().minCoeff() >= 0.0);
  CHECK_THROWS_AS(mode_logits(p, std::vector<ad::Var<D>>{}), std::invalid_argument);
}

TEST_CASE("fake-lane masking zeroes fake modes") {
  ModelConfig cfg = tiny_config();
  cfg.mask_fake = true;
  const auto store = tiny_params(cfg);
  const Example ex = tiny_example(cfg, true);
  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);
  const auto ctx = build_contexts(tape, p, cfg, ex);
  const auto w = mode_weights_from_logits(mode_logits(p, ctx.c), ex.lanes.valid, true);
  CHECK(w.value()(2, 0) == 0.0);
  CHECK(w.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior and prior heads") {
  const ModelConfig cfg = tiny_config();

  SUBCASE("zero parameters give mu 0 and sigma softplus(0)+1e-4") {
    nn::ParamStore<D> store;
    register_model_params(store, cfg);  // zero-initialized
    ad::Tape<D> tape;
    const auto p = nn::bind_const(tape, store);
    const auto c = tape.constant(ad::Mat<D>::Constant(cfg.context_width(), 1, 0.7));
    const auto y = tape.constant(ad::Mat<D>::Constant(cfg.dims.history_hidden, 1, -0.2));
    const auto post = posterior_params(p, y, c);
    CHECK(post.mu.value().cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < cfg.D; ++i)
      CHECK(post.sigma.value()(i, 0) == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-12));
  }

  SUBCASE("manual two-layer forward") {
    const auto store = tiny_params(cfg, 51);
    ad::Tape<D> tape;
    const auto p = nn::bind_const(tape, store);
    Rng rng(4);
    ad::Mat<D> c(cfg.context_width(), 1), y(cfg.dims.history_hidden, 1);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(-1, 1);
    for (int i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform(-1, 1);

    const auto post = posterior_params(p, tape.constant(y), tape.constant(c));
    Eigen::VectorXd in(y.rows() + c.rows());
    in << y.col(0), c.col(0);
    const Eigen::VectorXd mu =
        oracle::linear(store, "post.mean.l2", oracle::relu(oracle::linear(store, "post.mean.l1", in)));
    Eigen::VectorXd raw =
        oracle::linear(store, "post.std.l2", oracle::relu(oracle::linear(store, "post.std.l1", in)));
    const Eigen::VectorXd sigma =
        raw.unaryExpr([](double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0) + 1e-4; });
    CHECK((post.mu.value().col(0) - mu).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((post.sigma.value().col(0) - sigma).cwiseAbs().maxCoeff() < 1e-9);

    const auto prior = prior_params(p, tape.constant(c));
    CHECK((prior.mu.value() - post.mu.value()).cwiseAbs().maxCoeff() > 1e-8);
    CHECK(prior.sigma.value().minCoeff() > 0.0);
  }
}

TEST_CASE("sample_latent: identity at zero noise, Monte Carlo moments") {
  const ModelConfig cfg = tiny_config();
  ad::Tape<D> tape;
  ad::Mat<D> mu(2, 1), sigma(2, 1);
  mu << 0.7, -1.3;
  sigma << 0.5, 2.0;
  GaussianHead<D> g{tape.constant(mu), tape.constant(sigma)};

  const auto z0 = sample_latent(g, tape.constant(ad::Mat<D>::Zero(2, 1)));
  CHECK((z0.value() - mu).cwiseAbs().maxCoeff() == 0.0);

  const int n = 100000;
  Rng rng(77);
  ad::Mat<D> eps(2, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < 2; ++r) eps(r, c) = rng.normal();
  const auto z = sample_latent(g, tape.constant(eps));
  for (int r = 0; r < 2; ++r) {
    const double mean = z.value().row(r).mean();
    const double var =
        (z.value().row(r).array() - mean).square().sum() / (n - 1);
    const double se_mean = sigma(r, 0) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean - mu(r, 0)) < 3 * se_mean);
    const double se_sd = sigma(r, 0) / std::sqrt(2.0 * (n - 1));
    CHECK(std::abs(std::sqrt(var) - sigma(r, 0)) < 3 * se_sd);
  }
}

TEST_CASE("decoder: output length, determinism, zero-parameter trace") {
  const ModelConfig cfg = tiny_config();

  SUBCASE("length and determinism") {
    const auto store = tiny_params(cfg, 61);
    ad::Tape<D> tape;
    const auto p = nn::bind_const(tape, store);
    Rng rng(5);
    ad::Mat<D> c(cfg.context_width(), 1), z(cfg.D, 1);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(-1, 1);
    for (int i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-1, 1);
    const auto a = decode_trajectory(tape, p, cfg, tape.constant(c), tape.constant(z), Vec2(0, 0));
    const auto b = decode_trajectory(tape, p, cfg, tape.constant(c), tape.constant(z), Vec2(0, 0));
    CHECK(a.rows() == 2 * cfg.T);
    CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zero parameters decode to the output bias everywhere") {
    nn::ParamStore<D> store;
    register_model_params(store, cfg);
    store.at("dec.out.b") << 0.4, -0.2;
    ad::Tape<D> tape;
    const auto p = nn::bind_const(tape, store);
    const auto out = decode_trajectory(tape, p, cfg, tape.constant(ad::Mat<D>::Zero(cfg.context_width(), 1)),
                                       tape.constant(ad::Mat<D>::Zero(cfg.D, 1)), Vec2(0, 0));
    for (int t = 0; t < cfg.T; ++t) {
      CHECK(out.value()(2 * t, 0) == doctest::Approx(0.4));
      CHECK(out.value()(2 * t + 1, 0) == doctest::Approx(-0.2));
    }
  }
}

TEST_CASE("discriminator: determinism, offset sensitivity, manual forward") {
  const ModelConfig cfg = tiny_config();
  const auto store = tiny_params(cfg, 71);
  const Example ex = tiny_example(cfg);
  const ProcessedLane& lane = ex.lanes.lanes[0];

  ad::Tape<D> tape;
  const auto p = nn::bind_const(tape, store);
  const auto lane_enc = encode_sequence(tape, p, cfg, lane.rows, "lane");

  ad::Mat<D> on_lane(2 * cfg.T, 1), off_lane(2 * cfg.T, 1);
  for (int t = 0; t < cfg.T; ++t) {
    on_lane(2 * t, 0) = 1.0 + t;
    on_lane(2 * t + 1, 0) = 0.0;
    off_lane(2 * t, 0) = 1.0 + t;
    off_lane(2 * t + 1, 0) = 5.0;
  }
  const auto s1 = discriminator_score(tape, p, cfg, tape.constant(on_lane), lane, lane_enc);
  const auto s2 = discriminator_score(tape, p, cfg, tape.constant(on_lane), lane, lane_enc);
  const auto s3 = discriminator_score(tape, p, cfg, tape.constant(off_lane), lane, lane_enc);
  CHECK(s1.value()(0, 0) == s2.value()(0, 0));
  CHECK(s1.value()(0, 0) != s3.value()(0, 0));

  // Manual forward: rows are [p; p - nearest lane point].
  oracle::LstmState st{Eigen::VectorXd::Zero(cfg.dims.disc_hidden),
                       Eigen::VectorXd::Zero(cfg.dims.disc_hidden)};
  for (int t = 0; t < cfg.T; ++t) {
    const Vec2 pt(on_lane(2 * t, 0), on_lane(2 * t + 1, 0));
    const auto near = nearest_centerline_point(pt, lane);
    Eigen::VectorXd row(4);
    row << pt.x(), pt.y(), pt.x() - near.point.x(), pt.y() - near.point.y();
    st = oracle::lstm_step(store, "disc.lstm",
                           oracle::relu(oracle::linear(store, "disc.embed", row)), st);
  }
  Eigen::VectorXd cat(cfg.dims.disc_hidden + cfg.dims.lane_hidden);
  cat << st.h, lane_enc.value().col(0);
  const double want = oracle::linear(store, "disc.out", cat)(0);
  CHECK(s1.value()(0, 0) == doctest::Approx(want).epsilon(1e-9));

  ProcessedLane fake;
  fake.rows.setZero(cfg.F, 5);
  fake.is_fake = true;
  CHECK_THROWS_AS(discriminator_score(tape, p, cfg, tape.constant(on_lane), fake, lane_enc),
                  std::invalid_argument);
}

TEST_CASE("rigid-transform invariance of inputs and predictions") {
  // The same underlying scene observed in two world frames produces the
  // same target-frame features and the same predictions.
  SynthSpec spec;
  spec.templates = {"fork3", "merge", "lane_change"};
  spec.count = 9;
  spec.seed = 99;
  const auto scenes = generate_dataset(spec);

  ModelConfig cfg;
  cfg.seed = 7;
  cfg = apply_recipe(cfg, Recipe::M5);
  nn::ParamStore<D> store;
  register_model_params(store, cfg);
  Rng prng(123);
  store.init(prng);

  for (const auto& scene : scenes) {
    Scene moved = scene;
    Rng rng = Rng(1234).fork(scene.scene_id);
    const double phi = rng.uniform(-3.1, 3.1);
    const Vec2 shift(rng.uniform(-100, 100), rng.uniform(-100, 100));
    const double c = std::cos(phi), s = std::sin(phi);
    auto xform = [&](Eigen::MatrixX2d& pts) {
      for (int i = 0; i < pts.rows(); ++i) {
        const Vec2 v = pts.row(i).transpose();
        pts.row(i) = Vec2(c * v.x() - s * v.y() + shift.x(), s * v.x() + c * v.y() + shift.y())
                         .transpose();
      }
    };
    for (auto& seg : moved.map.segments) xform(seg.centerline.pts);
    for (auto& tr : moved.tracks) xform(tr.positions);

    const Example a = build_example(scene, "target", cfg);
    const Example b = build_example(moved, "target", cfg);

    CHECK((a.target_history - b.target_history).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((a.future - b.future).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE(a.lanes.count() == b.lanes.count());
    for (int m = 0; m < a.lanes.count(); ++m)
      CHECK((a.lanes.lanes[m].rows - b.lanes.lanes[m].rows).cwiseAbs().maxCoeff() < 1e-6);

    Rng ra(555), rb(555);
    const auto pa = predict_example(store, cfg, a, 6, false, ra);
    const auto pb = predict_example(store, cfg, b, 6, false, rb);
    REQUIRE(pa.trajs.size() == pb.trajs.size());
    for (std::size_t k = 0; k < pa.trajs.size(); ++k)
      CHECK((pa.trajs[k] - pb.trajs[k]).cwiseAbs().maxCoeff() < 1e-5);
    for (std::size_t m = 0; m < pa.weights.size(); ++m)
      CHECK(pa.weights[m] == doctest::Approx(pb.weights[m]).epsilon(1e-6));
  }
}
