#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "hlsf/rng.hpp"
#include "hlsf/scene.hpp"

namespace hlsf {

/// Schema or syntax problem in a scene file; message carries "line N: ...".
struct SceneParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One scene per JSON line. Keys and layout are fixed:
///   {"scene_id", "psi", "H", "T",
///    "map": {"segments": [{"id", "pts": [[x,y],...]}], "succ", "pred"},
///    "tracks": [{"agent_id", "pts", "valid"}], "targets", "gt_lane_hint"}
std::string scene_to_json_line(const Scene& scene);
Scene scene_from_json_line(const std::string& line, int line_number = 0);

void write_scenes(const std::string& path, const std::vector<Scene>& scenes);

/// Streams a JSONL file scene by scene without materializing the dataset.
void for_each_scene(const std::string& path, const std::function<void(Scene&&)>& fn);

std::vector<Scene> read_scenes(const std::string& path);

/// Deterministic disjoint/exhaustive split into index lists whose sizes
/// follow `fractions` (largest-remainder rounding). Fractions must sum to
/// 1 within 1e-9.
std::vector<std::vector<int>> split_dataset(int count, const std::vector<double>& fractions,
                                            std::uint64_t seed);

}  // namespace hlsf
