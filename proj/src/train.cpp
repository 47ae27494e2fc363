#include "hlsf/train.hpp"

namespace hlsf {

namespace {

std::string csv_row(std::uint64_t step, const LossBreakdown& lb, const std::string& val) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s\n",
                static_cast<unsigned long long>(step), lb.recon, lb.kl, lb.bce, lb.gan_g, lb.gan_d,
                lb.beta, val.c_str());
  return buf;
}

std::string fmt_g9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

FitResult fit(const std::vector<Scene>& scenes, const RunConfig& rc, const std::string& run_dir) {
  const ModelConfig cfg = apply_recipe(rc.model, rc.train.recipe);
  const TrainConfig& tc = rc.train;
  if (scenes.empty()) throw std::invalid_argument("fit: empty dataset");

  std::filesystem::create_directories(run_dir + "/ckpt");

  std::vector<Example> examples = build_examples(scenes, cfg);
  if (examples.empty()) throw std::runtime_error("fit: no example had a candidate lane in reach");

  const auto splits = split_dataset(static_cast<int>(examples.size()),
                                    {1.0 - tc.val_fraction, tc.val_fraction},
                                    Rng(cfg.seed).fork("split").state());
  std::vector<const Example*> train_set, val_set;
  for (int i : splits[0]) train_set.push_back(&examples[static_cast<std::size_t>(i)]);
  for (int i : splits[1]) val_set.push_back(&examples[static_cast<std::size_t>(i)]);
  if (train_set.empty()) throw std::runtime_error("fit: empty training split");

  Trainer<float> trainer(cfg, tc);

  const int steps_per_epoch =
      (static_cast<int>(train_set.size()) + tc.batch - 1) / tc.batch;
  const long long total_steps = static_cast<long long>(steps_per_epoch) * tc.epochs;

  FitResult result;
  result.metrics_path = run_dir + "/metrics.csv";
  result.best_checkpoint = run_dir + "/ckpt/best.ckpt";
  result.last_checkpoint = run_dir + "/ckpt/last.ckpt";
  result.state_path = run_dir + "/ckpt/last.state";

  std::ofstream csv(result.metrics_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open for writing: " + result.metrics_path);
  csv << "step,recon,kl,bce,gan_g,gan_d,beta,val_minade\n";

  bool have_best = false;
  LossBreakdown last_lb;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    // Deterministic per-epoch shuffle, independent of the step RNG.
    std::vector<const Example*> order = train_set;
    Rng shuffle_rng = Rng(cfg.seed).fork("shuffle").fork(static_cast<std::uint64_t>(epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[shuffle_rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);

    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(tc.batch)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(tc.batch));
      const std::vector<const Example*> batch(order.begin() + static_cast<long>(at),
                                              order.begin() + static_cast<long>(end));
      const double beta = beta_schedule(static_cast<long long>(trainer.step()), total_steps,
                                        tc.cycles, tc.ramp, tc.beta_max);
      last_lb = trainer.train_step(batch, beta);
      csv << csv_row(trainer.step(), last_lb, "");
    }

    const bool validate = !val_set.empty() &&
                          ((epoch + 1) % tc.val_every == 0 || epoch == tc.epochs - 1);
    if (validate) {
      const double val_ade = validation_min_ade(trainer.params(), cfg, val_set, tc.val_k,
                                                static_cast<std::uint64_t>(epoch));
      csv << csv_row(trainer.step(), last_lb, fmt_g9(val_ade));
      if (val_ade < result.best_val) {
        result.best_val = val_ade;
        have_best = true;
        save_checkpoint(result.best_checkpoint,
                        Checkpoint{1, cfg, cfg.seed, trainer.step(), trainer.params()});
      }
    }
  }
  csv.close();

  save_checkpoint(result.last_checkpoint,
                  Checkpoint{1, cfg, cfg.seed, trainer.step(), trainer.params()});
  save_train_state(result.state_path,
                   trainer.snapshot_state(static_cast<std::uint32_t>(tc.epochs), result.best_val));
  if (!have_best)
    save_checkpoint(result.best_checkpoint,
                    Checkpoint{1, cfg, cfg.seed, trainer.step(), trainer.params()});
  result.steps = trainer.step();
  return result;
}

}  // namespace hlsf
