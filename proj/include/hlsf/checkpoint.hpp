#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hlsf/model.hpp"
#include "hlsf/nn.hpp"

namespace hlsf {

/// Self-describing parameter container: a small header (format version,
/// model config, seed, training step) followed by name -> shape + 32-bit
/// little-endian float payload for every parameter, in manifest order.
struct Checkpoint {
  std::uint32_t version = 1;
  ModelConfig config;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  nn::ParamStore<float> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Optimizer and loop state needed to resume training bit-for-bit:
/// Adam moments aligned with the parameter manifest, step counters, the
/// training RNG state and the best validation metric so far.
struct TrainStateBlob {
  std::uint64_t step = 0;
  std::uint32_t epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::uint64_t rng_state = 0;
  std::uint64_t adam_t_model = 0;
  std::uint64_t adam_t_disc = 0;
  std::vector<ad::Mat<float>> moment_m;
  std::vector<ad::Mat<float>> moment_v;
};

void save_train_state(const std::string& path, const TrainStateBlob& state);
TrainStateBlob load_train_state(const std::string& path);

}  // namespace hlsf
