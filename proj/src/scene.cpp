#include "hlsf/scene.hpp"

#include <stdexcept>

namespace hlsf {

const MapSegment* VectorMap::find(const std::string& id) const {
  for (const auto& seg : segments)
    if (seg.id == id) return &seg;
  return nullptr;
}

const AgentTrack* Scene::find_track(const std::string& agent_id) const {
  for (const auto& tr : tracks)
    if (tr.agent_id == agent_id) return &tr;
  return nullptr;
}

void validate_scene(const Scene& scene) {
  if (scene.H < 1 || scene.T < 1)
    throw std::invalid_argument("scene " + scene.scene_id + ": H and T must be >= 1");
  if (scene.psi <= 0.0)
    throw std::invalid_argument("scene " + scene.scene_id + ": psi must be > 0");

  auto check_adjacency = [&](const std::map<std::string, std::vector<std::string>>& adj,
                             bool succ) {
    for (const auto& [from, tos] : adj) {
      const MapSegment* a = scene.map.find(from);
      if (!a) throw std::invalid_argument("scene " + scene.scene_id + ": adjacency references unknown segment " + from);
      for (const auto& to : tos) {
        const MapSegment* b = scene.map.find(to);
        if (!b) throw std::invalid_argument("scene " + scene.scene_id + ": adjacency references unknown segment " + to);
        const Vec2 tail = succ ? a->centerline.point(a->centerline.size() - 1)
                               : b->centerline.point(b->centerline.size() - 1);
        const Vec2 head = succ ? b->centerline.point(0) : a->centerline.point(0);
        if ((tail - head).norm() > 0.5)
          throw std::invalid_argument("scene " + scene.scene_id + ": segments " + from + " -> " + to +
                                      " do not join within 0.5 m");
      }
    }
  };
  check_adjacency(scene.map.successors, true);
  check_adjacency(scene.map.predecessors, false);

  const int n = scene.total_steps();
  for (const auto& tr : scene.tracks) {
    if (tr.positions.rows() != n)
      throw std::invalid_argument("scene " + scene.scene_id + ": track " + tr.agent_id +
                                  " has wrong length");
    if (static_cast<int>(tr.valid.size()) != n)
      throw std::invalid_argument("scene " + scene.scene_id + ": track " + tr.agent_id +
                                  " has wrong valid-mask length");
  }
  for (const auto& target : scene.target_ids) {
    const AgentTrack* tr = scene.find_track(target);
    if (!tr) throw std::invalid_argument("scene " + scene.scene_id + ": target " + target + " has no track");
    for (bool v : tr->valid)
      if (!v) throw std::invalid_argument("scene " + scene.scene_id + ": target " + target +
                                          " track must be fully valid");
  }
}

}  // namespace hlsf
