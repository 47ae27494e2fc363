#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hlsf/synth.hpp"
#include "hlsf/train.hpp"

using namespace hlsf;
using D = double;

namespace {

ModelConfig tiny_config(Recipe recipe = Recipe::M5) {
  ModelConfig cfg;
  cfg.M = 3;
  cfg.D = 2;
  cfg.F = 6;
  cfg.H = 2;
  cfg.T = 3;
  cfg.dims = ModelDims{3, 4, 3, 4, 3, 4, 3, 3, 5, 3, 4, 3, 3};
  cfg.seed = 11;
  return apply_recipe(cfg, recipe);
}

Example tiny_example(const ModelConfig& cfg, std::uint64_t salt) {
  Rng rng(salt);
  Example ex;
  ex.scene_id = "t-" + std::to_string(salt);
  ex.target_id = "target";
  ex.group = "g";
  Eigen::MatrixX2d hist(cfg.H + 1, 2);
  for (int i = 0; i <= cfg.H; ++i) hist.row(i) << -2.0 + i + rng.uniform(-0.1, 0.1), rng.uniform(-0.2, 0.2);
  ex.target_history = derive_kinematics(hist, 2.0).rows;
  Eigen::MatrixX2d joined(cfg.T + 1, 2);
  joined.row(0) = hist.row(cfg.H);
  for (int t = 1; t <= cfg.T; ++t)
    joined.row(t) << hist(cfg.H, 0) + 1.1 * t, hist(cfg.H, 1) + rng.uniform(-0.3, 0.3);
  ex.target_future4 = derive_kinematics(joined, 2.0).rows.bottomRows(cfg.T);
  ex.future = joined.bottomRows(cfg.T);
  Eigen::MatrixX2d oh = hist;
  oh.col(1).array() += 1.2;
  ex.other_history.push_back(derive_kinematics(oh, 2.0).rows);
  ex.other_current.push_back(Vec2(oh(cfg.H, 0), oh(cfg.H, 1)));
  for (int m = 0; m < cfg.M; ++m) {
    Eigen::MatrixX2d pts(cfg.F, 2);
    for (int i = 0; i < cfg.F; ++i) pts.row(i) << 1.0 * (i + 1), 1.6 * m;
    ex.lanes.lanes.push_back(derive_lane_geometry(make_polyline(pts)));
    ex.lanes.valid.push_back(true);
    ex.lane_neighbors.push_back(m == 0 ? std::vector<int>{0} : std::vector<int>{});
    ex.chains.push_back({});
  }
  ex.lanes.gt_index = 0;
  ex.lanes.lanes[0].gt = true;
  ex.gt_index = 0;
  return ex;
}

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(p);
  return p.string();
}

bool same_bytes(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return !sa.empty() && sa == sb;
}

}  // namespace

TEST_CASE("KL: zero at equality, hand value 0.5, Monte Carlo agreement") {
  ad::Tape<D> tape;
  ad::Mat<D> mu(2, 1), sigma(2, 1);
  mu << 0.3, -0.9;
  sigma << 0.7, 1.4;
  GaussianHead<D> g{tape.constant(mu), tape.constant(sigma)};
  CHECK(kl_divergence(g, g).value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));

  ad::Mat<D> mu_e(2, 1), sig_e(2, 1), mu_p(2, 1), sig_p(2, 1);
  mu_e << 1.0, 0.0;
  sig_e << 1.0, 1.0;
  mu_p << 0.0, 0.0;
  sig_p << 1.0, 1.0;
  GaussianHead<D> q{tape.constant(mu_e), tape.constant(sig_e)};
  GaussianHead<D> p{tape.constant(mu_p), tape.constant(sig_p)};
  CHECK(kl_divergence(q, p).value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  // Monte Carlo oracle: E_q[log q(z) - log p(z)] over 1e5 draws.
  Rng rng(42);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double log_q = 0.0, log_p = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double z = mu_e(d, 0) + sig_e(d, 0) * rng.normal();
      const double tq = (z - mu_e(d, 0)) / sig_e(d, 0);
      const double tp = (z - mu_p(d, 0)) / sig_p(d, 0);
      log_q += -0.5 * tq * tq - std::log(sig_e(d, 0));
      log_p += -0.5 * tp * tp - std::log(sig_p(d, 0));
    }
    const double v = log_q - log_p;
    sum += v;
    sum_sq += v * v;
  }
  const double mc = sum / n;
  const double se = std::sqrt((sum_sq / n - mc * mc) / n);
  CHECK(std::abs(mc - 0.5) < 3 * se);
}

TEST_CASE("reconstruction: zero at equality, forced arithmetic") {
  ad::Tape<D> tape;
  Eigen::MatrixX2d y(3, 2);
  y << 0, 0, 1, 0, 2, 1;
  ad::Mat<D> same(6, 1);
  same << 0, 0, 1, 0, 2, 1;
  CHECK(recon_loss(tape.constant(same), y).value()(0, 0) == doctest::Approx(0.0));

  // Constant (1, 0) offset: squared error 1 per step, mean 1.
  ad::Mat<D> shifted = same;
  for (int t = 0; t < 3; ++t) shifted(2 * t, 0) += 1.0;
  CHECK(recon_loss(tape.constant(shifted), y).value()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("mode loss: perfect prediction, uniform hand value, finite differences") {
  ad::Tape<D> tape;
  ad::Mat<D> sharp(10, 1);
  sharp.setConstant(-30.0);
  sharp(4, 0) = 30.0;
  const auto w_sharp = ad::softmax(tape.leaf(sharp));
  CHECK(mode_selection_loss(w_sharp, 4, false).value()(0, 0) == doctest::Approx(0.0).epsilon(1e-6));

  // Uniform weights over M=10: -ln(0.1) - 9 ln(0.9).
  const double want = -std::log(0.1) - 9.0 * std::log(0.9);
  CHECK(want == doctest::Approx(3.2505).epsilon(1e-4));
  ad::Tape<D> tape2;
  const auto logits = tape2.leaf(ad::Mat<D>::Zero(10, 1));
  const auto loss = mode_selection_loss(ad::softmax(logits), 3, false);
  CHECK(loss.value()(0, 0) == doctest::Approx(want).epsilon(1e-9));

  // Gradient at uniform weights vs central differences.
  tape2.backward(loss);
  const ad::Mat<D> grad = tape2.grad(logits);
  for (int i = 0; i < 10; ++i) {
    auto eval = [&](double bump) {
      ad::Tape<D> t3;
      ad::Mat<D> x = ad::Mat<D>::Zero(10, 1);
      x(i, 0) += bump;
      return mode_selection_loss(ad::softmax(t3.constant(x)), 3, false).value()(0, 0);
    };
    const double h = 1e-6;
    const double fd = (eval(h) - eval(-h)) / (2 * h);
    CHECK(grad(i, 0) == doctest::Approx(fd).epsilon(1e-5));
  }

  // Categorical variant reduces to -log w_gt.
  ad::Tape<D> tape4;
  const auto w_u = ad::softmax(tape4.constant(ad::Mat<D>::Zero(10, 1)));
  CHECK(mode_selection_loss(w_u, 3, true).value()(0, 0) == doctest::Approx(-std::log(0.1)).epsilon(1e-9));
}

TEST_CASE("adversarial losses: zero-logit values and saturation") {
  ad::Tape<D> tape;
  const auto zero = tape.constant(ad::Mat<D>::Zero(1, 1));
  const std::vector<ad::Var<D>> reals{zero}, fakes{zero};
  CHECK(gan_discriminator_loss(reals, fakes).value()(0, 0) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(gan_generator_loss(fakes).value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // A perfect discriminator drives its loss toward zero.
  const std::vector<ad::Var<D>> big{tape.constant(ad::Mat<D>::Constant(1, 1, 40.0))};
  const std::vector<ad::Var<D>> neg_big{tape.constant(ad::Mat<D>::Constant(1, 1, -40.0))};
  CHECK(gan_discriminator_loss(big, neg_big).value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("beta schedule: endpoints, ramp midpoint, periodic hold") {
  CHECK(beta_schedule(0, 1000, 4, 0.5, 0.5) == doctest::Approx(0.0));
  // 25% into a cycle with half-cycle ramp: halfway up the ramp.
  CHECK(beta_schedule(250, 4000, 4, 0.5, 0.5) == doctest::Approx(0.25));
  // Hold region.
  CHECK(beta_schedule(700, 4000, 4, 0.5, 0.5) == doctest::Approx(0.5));
  // Periodic, bounded, piecewise linear.
  for (long long s = 0; s < 2000; ++s) {
    const double b = beta_schedule(s, 2000, 4, 0.5, 0.5);
    CHECK(b >= 0.0);
    CHECK(b <= 0.5);
    CHECK(b == doctest::Approx(beta_schedule(s + 500, 2000, 4, 0.5, 0.5)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(beta_schedule(0, 100, 0, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("train_step: smoke, losses finite, parameters move") {
  const ModelConfig cfg = tiny_config(Recipe::M5);
  TrainConfig tc;
  tc.lr = 1e-3;
  Trainer<float> trainer(cfg, tc);
  const Example ex = tiny_example(cfg, 1);
  const auto before = trainer.params().at("dec.out.W");
  const LossBreakdown lb = trainer.train_step({&ex}, 0.3);
  CHECK(std::isfinite(lb.total));
  CHECK(lb.recon > 0.0);
  CHECK(lb.kl >= 0.0);
  CHECK(lb.bce > 0.0);
  CHECK(lb.gan_d > 0.0);
  CHECK(lb.beta == doctest::Approx(0.3));
  CHECK(lb.total == doctest::Approx(lb.recon + 0.3 * lb.kl + tc.alpha * lb.bce +
                                    tc.kappa * lb.gan_g).epsilon(1e-9));
  const auto after = trainer.params().at("dec.out.W");
  CHECK((before - after).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("kappa = 0 decouples the model step from the discriminator") {
  const ModelConfig cfg = tiny_config(Recipe::M5);
  TrainConfig tc;
  tc.kappa = 0.0;
  Trainer<float> a(cfg, tc), b(cfg, tc);
  // Perturb only b's discriminator parameters.
  b.params().at("disc.out.W").array() += 0.5f;
  b.params().at("disc.lstm.W_ih").array() -= 0.25f;

  const Example ex0 = tiny_example(cfg, 2), ex1 = tiny_example(cfg, 3);
  a.train_step({&ex0, &ex1}, 0.2);
  b.train_step({&ex0, &ex1}, 0.2);
  for (const auto& item : a.params().items()) {
    if (is_discriminator_param(item.name)) continue;
    INFO(item.name);
    CHECK((item.value - b.params().at(item.name)).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("gan off: discriminator never registered, no adversarial terms") {
  const ModelConfig cfg = tiny_config(Recipe::M4);
  TrainConfig tc;
  Trainer<float> trainer(cfg, tc);
  for (const auto& item : trainer.params().items()) CHECK(!is_discriminator_param(item.name));
  const Example ex = tiny_example(cfg, 4);
  const LossBreakdown lb = trainer.train_step({&ex}, 0.1);
  CHECK(lb.gan_g == 0.0);
  CHECK(lb.gan_d == 0.0);
}

TEST_CASE("loss decreases on a fixed batch") {
  const ModelConfig cfg = tiny_config(Recipe::M4);
  TrainConfig tc;
  tc.lr = 1e-4;
  Trainer<float> trainer(cfg, tc);
  const Example ex0 = tiny_example(cfg, 5), ex1 = tiny_example(cfg, 6);
  double first = 0.0, last = 0.0;
  for (int s = 0; s < 50; ++s) {
    const LossBreakdown lb = trainer.train_step({&ex0, &ex1}, 0.1);
    if (s == 0) first = lb.total;
    last = lb.total;
  }
  CHECK(last < first);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  const ModelConfig cfg = tiny_config(Recipe::M4);
  TrainConfig tc;
  Trainer<float> trainer(cfg, tc);
  trainer.params().at("dec.out.W").setConstant(1e30f);
  const Example ex = tiny_example(cfg, 7);
  CHECK_THROWS_AS(trainer.train_step({&ex}, 0.1), std::runtime_error);
}

TEST_CASE("checkpoint: save/load round trip is exact and byte-stable") {
  const ModelConfig cfg = tiny_config(Recipe::M5);
  TrainConfig tc;
  Trainer<float> trainer(cfg, tc);
  const Example ex = tiny_example(cfg, 8);
  trainer.train_step({&ex}, 0.2);

  const std::string dir = temp_dir("hlsf_ckpt_test");
  const std::string p1 = dir + "/a.ckpt", p2 = dir + "/b.ckpt";
  save_checkpoint(p1, Checkpoint{1, cfg, cfg.seed, trainer.step(), trainer.params()});
  const Checkpoint loaded = load_checkpoint(p1);
  CHECK(loaded.step == trainer.step());
  CHECK(loaded.config.M == cfg.M);
  CHECK(loaded.config.flags.gan == cfg.flags.gan);
  for (const auto& item : trainer.params().items()) {
    const auto& got = loaded.params.at(item.name);
    CHECK((got - item.value).cwiseAbs().maxCoeff() == 0.0f);
  }
  save_checkpoint(p2, loaded);
  CHECK(same_bytes(p1, p2));
  std::filesystem::remove_all(dir);
}

TEST_CASE("resume reproduces the next steps bit-identically") {
  const ModelConfig cfg = tiny_config(Recipe::M5);
  TrainConfig tc;
  const Example e0 = tiny_example(cfg, 10), e1 = tiny_example(cfg, 11), e2 = tiny_example(cfg, 12);
  const std::vector<std::vector<const Example*>> batches = {{&e0, &e1}, {&e2}, {&e1, &e2}, {&e0}};

  Trainer<float> full(cfg, tc);
  full.train_step(batches[0], 0.1);
  full.train_step(batches[1], 0.2);

  const std::string dir = temp_dir("hlsf_resume_test");
  save_checkpoint(dir + "/mid.ckpt", Checkpoint{1, cfg, cfg.seed, full.step(), full.params()});
  save_train_state(dir + "/mid.state", full.snapshot_state(0, 1e9));

  full.train_step(batches[2], 0.3);
  full.train_step(batches[3], 0.4);

  Trainer<float> resumed(cfg, tc);
  const Checkpoint ckpt = load_checkpoint(dir + "/mid.ckpt");
  for (const auto& item : ckpt.params.items()) resumed.params().at(item.name) = item.value;
  resumed.restore_state(load_train_state(dir + "/mid.state"));
  CHECK(resumed.step() == 2);
  resumed.train_step(batches[2], 0.3);
  resumed.train_step(batches[3], 0.4);

  for (const auto& item : full.params().items()) {
    INFO(item.name);
    CHECK((item.value - resumed.params().at(item.name)).cwiseAbs().maxCoeff() == 0.0f);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("train state file round-trips byte-identically") {
  const ModelConfig cfg = tiny_config(Recipe::M5);
  TrainConfig tc;
  Trainer<float> trainer(cfg, tc);
  const Example ex = tiny_example(cfg, 13);
  trainer.train_step({&ex}, 0.1);
  const std::string dir = temp_dir("hlsf_state_test");
  save_train_state(dir + "/a.state", trainer.snapshot_state(3, 0.25));
  save_train_state(dir + "/b.state", load_train_state(dir + "/a.state"));
  CHECK(same_bytes(dir + "/a.state", dir + "/b.state"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("recipe contradictions are config errors") {
  ModelConfig cfg = tiny_config(Recipe::Baseline);
  CHECK(cfg.single_context);
  cfg.flags.gan = true;  // Baseline with a discriminator
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  ModelConfig bom = tiny_config(Recipe::M5);
  bom.bom_samples = 5;  // best-of-many outside the Baseline
  CHECK_THROWS_AS(bom.validate(), std::invalid_argument);
}

TEST_CASE("fit: smoke run trains, validates and checkpoints") {
  RunConfig rc;
  rc.model = tiny_config(Recipe::M5);
  rc.model.M = 6;
  rc.model.F = 30;
  rc.model.H = 4;
  rc.model.T = 12;
  rc.model.seed = 5;
  rc.train.recipe = Recipe::M5;
  rc.train.epochs = 2;
  rc.train.val_every = 1;
  rc.train.batch = 8;
  rc.synth.templates = {"fork3"};
  rc.synth.count = 40;
  rc.synth.seed = 5;

  const auto scenes = generate_dataset(rc.synth);
  const std::string dir = temp_dir("hlsf_fit_smoke");
  const FitResult result = fit(scenes, rc, dir);
  CHECK(std::filesystem::exists(result.best_checkpoint));
  CHECK(std::filesystem::exists(result.last_checkpoint));
  CHECK(std::filesystem::exists(result.state_path));
  CHECK(std::isfinite(result.best_val));
  CHECK(result.steps > 0);

  std::ifstream csv(result.metrics_path);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "step,recon,kl,bce,gan_g,gan_d,beta,val_minade");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows >= static_cast<int>(result.steps));
  std::filesystem::remove_all(dir);
}
