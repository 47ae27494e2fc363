#pragma once

#include <map>
#include <string>
#include <vector>

#include "hlsf/geometry.hpp"

namespace hlsf {

/// One lane centerline segment of the vectorized map.
struct MapSegment {
  std::string id;
  Polyline centerline;
};

/// Vectorized road map: centerline segments plus connectivity.
struct VectorMap {
  std::vector<MapSegment> segments;
  std::map<std::string, std::vector<std::string>> successors;
  std::map<std::string, std::vector<std::string>> predecessors;

  const MapSegment* find(const std::string& id) const;
};

/// One agent's track over the full H+1+T window. valid[t] marks usable
/// timesteps; target agents must be valid everywhere.
struct AgentTrack {
  std::string agent_id;
  Eigen::MatrixX2d positions;
  std::vector<bool> valid;
};

/// Unit of ingestion and persistence: map, tracks, prediction targets.
struct Scene {
  std::string scene_id;
  double psi = 2.0;  // Hz
  int H = 4;         // history steps before the current one
  int T = 12;        // future steps
  VectorMap map;
  std::vector<AgentTrack> tracks;
  std::vector<std::string> target_ids;
  std::map<std::string, std::string> gt_lane_hint;  // target id -> true segment id

  int total_steps() const { return H + 1 + T; }
  const AgentTrack* find_track(const std::string& agent_id) const;
};

/// Structural checks: positive horizons, adjacency referencing existing
/// segments, successor/predecessor endpoints within 0.5 m, targets present
/// with fully valid tracks of the declared length. Throws on violation.
void validate_scene(const Scene& scene);

}  // namespace hlsf
