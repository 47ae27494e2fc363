#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hlsf/geometry.hpp"
#include "hlsf/rng.hpp"
#include "hlsf/scene.hpp"

namespace hlsf {

/// Raised when no lane lies within the search radius; callers skip the scene.
struct EmptyCandidateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scene transformed into one target's frame at the current timestep:
/// target at the origin, heading along +x.
struct SceneView {
  TargetFrame frame;
  int target_index = -1;                    // into the agent arrays below
  std::vector<std::string> agent_ids;
  std::vector<Eigen::MatrixX2d> histories;  // (H+1) x 2 per agent, local frame
  std::vector<Vec2> current_positions;      // per agent, local frame
  Eigen::MatrixX2d target_future;           // T x 2, local frame
  VectorMap local_map;                      // map with all segments transformed
};

/// Builds the target-centered view. The frame heading comes from the last
/// moving step of the target's history; a fully stationary target falls
/// back to the tangent of the nearest map segment, then to zero rotation.
/// Throws when the target is unknown or has fewer than 2 history points.
SceneView to_target_frame(const Scene& scene, const std::string& target_id);

struct CandidateConfig {
  int M = 10;                  // fixed candidate count
  double search_radius = 10.0; // m, seed segments this close to the vehicle
  double reach = 80.0;         // m of lane ahead of the vehicle
  double spacing = 1.0;        // m between resampled points
};

/// Candidate set plus the segment-id chain each real lane was assembled
/// from (used to relate candidates back to generator hints).
struct BuiltCandidates {
  LaneCandidateSet set;
  std::vector<std::vector<std::string>> chains;  // empty for fake lanes
};

/// Lane-candidate acquisition in the local frame (vehicle at origin,
/// heading +x). Seeds are segments within search_radius, extended through
/// successor connectivity to `reach` meters ahead and resampled at
/// `spacing`. Paths that are suffixes of one another are deduplicated.
/// When more than M remain, the ground-truth lane (labeled against
/// `future`) plus M-1 uniformly drawn others are kept; when fewer, all-zero
/// fake lanes pad the set. Throws when no lane lies within the radius.
BuiltCandidates build_lane_candidates(const VectorMap& local_map, const Eigen::MatrixX2d& future,
                                      const CandidateConfig& config, Rng& rng);

}  // namespace hlsf
