#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hlsf/rng.hpp"
#include "hlsf/scene.hpp"

namespace hlsf {

/// Synthetic-dataset recipe. Scene i draws everything from
/// Rng(seed).fork(i), so generation is deterministic and embarrassingly
/// parallel across scenes.
struct SynthSpec {
  std::vector<std::string> templates = {"fork3"};
  int count = 100;
  std::uint64_t seed = 0;

  double psi = 2.0;  // Hz
  int H = 4;         // 2 s history at 2 Hz
  int T = 12;        // 6 s future at 2 Hz

  double noise_lat = 0.12;  // m, per-step lateral jitter
  double noise_lon = 0.08;  // m, per-step longitudinal jitter

  // fork3: branch pick probabilities and the share of scenes where the
  // vehicle has not reached the fork yet (future branch not observable).
  double fork_p0 = 0.5, fork_p1 = 0.3, fork_p2 = 0.2;
  double frac_ambiguous = 0.25;

  int min_neighbors = 1, max_neighbors = 3;
};

/// Known template names, in the order scenes cycle through a mixed spec.
const std::vector<std::string>& synth_templates();

/// Applies a named horizon profile: "nuscenes" (2 Hz, H=4, T=12) or
/// "argoverse" (2 Hz, H=4, T=6). Throws on unknown names.
void apply_profile(SynthSpec& spec, const std::string& profile);

/// Generates scene `index` of the spec. Throws on unknown template names.
Scene generate_scene(const SynthSpec& spec, int index);

/// All `count` scenes, generated in parallel, returned in index order.
std::vector<Scene> generate_dataset(const SynthSpec& spec);

}  // namespace hlsf
