#pragma once

#include <map>
#include <string>

#include "hlsf/model.hpp"
#include "hlsf/synth.hpp"

namespace hlsf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything the tools read from a config file or flags: model shape,
/// training recipe and schedule, generator knobs, inference settings.
struct TrainConfig {
  Recipe recipe = Recipe::M5;
  double lr = 1e-4;
  int batch = 8;
  int epochs = 12;
  int val_every = 3;       // epochs between validations
  double alpha = 1.0;      // mode-loss weight
  double kappa = 0.01;     // adversarial weight
  double beta_max = 0.5;   // KL weight ceiling
  int cycles = 4;          // annealing cycles over the run
  double ramp = 0.5;       // fraction of a cycle spent ramping
  double clip = 10.0;      // gradient-norm ceiling
  double val_fraction = 0.1;
  int val_k = 5;           // samples per example for validation min-ADE
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthSpec synth;
  int K = 15;                        // trajectories per prediction
  std::string predict_mode = "multi";  // or "single"
};

/// key=value lines, '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

/// Applies one key. Unknown keys or malformed values raise ConfigError.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies a whole map (file contents, then flag overrides).
void apply_all(RunConfig& cfg, const std::map<std::string, std::string>& kv);

/// Serializations used for manifests and reproducibility snapshots.
std::map<std::string, std::string> model_config_to_kv(const ModelConfig& m);
ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv);
std::string run_config_to_text(const RunConfig& cfg);

}  // namespace hlsf
