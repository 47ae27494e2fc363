#include "hlsf/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace hlsf {

using json = nlohmann::ordered_json;

namespace {

json points_to_json(const Eigen::MatrixX2d& pts) {
  json arr = json::array();
  for (int i = 0; i < pts.rows(); ++i) arr.push_back({pts(i, 0), pts(i, 1)});
  return arr;
}

Eigen::MatrixX2d points_from_json(const json& arr, int line, const std::string& where) {
  if (!arr.is_array())
    throw SceneParseError("line " + std::to_string(line) + ": " + where + " must be an array");
  Eigen::MatrixX2d pts(static_cast<int>(arr.size()), 2);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& p = arr[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw SceneParseError("line " + std::to_string(line) + ": " + where + "[" +
                            std::to_string(i) + "] must be [x, y]");
    pts(static_cast<int>(i), 0) = p[0].get<double>();
    pts(static_cast<int>(i), 1) = p[1].get<double>();
  }
  return pts;
}

const json& require(const json& obj, const char* field, int line) {
  const auto it = obj.find(field);
  if (it == obj.end())
    throw SceneParseError("line " + std::to_string(line) + ": missing field " + field);
  return *it;
}

}  // namespace

std::string scene_to_json_line(const Scene& scene) {
  json j;
  j["scene_id"] = scene.scene_id;
  j["psi"] = scene.psi;
  j["H"] = scene.H;
  j["T"] = scene.T;

  json segments = json::array();
  for (const auto& seg : scene.map.segments)
    segments.push_back({{"id", seg.id}, {"pts", points_to_json(seg.centerline.pts)}});
  json succ = json::object(), pred = json::object();
  for (const auto& [k, v] : scene.map.successors) succ[k] = v;
  for (const auto& [k, v] : scene.map.predecessors) pred[k] = v;
  j["map"] = {{"segments", std::move(segments)}, {"succ", std::move(succ)}, {"pred", std::move(pred)}};

  json tracks = json::array();
  for (const auto& tr : scene.tracks) {
    json valid = json::array();
    for (bool v : tr.valid) valid.push_back(v);
    tracks.push_back({{"agent_id", tr.agent_id},
                      {"pts", points_to_json(tr.positions)},
                      {"valid", std::move(valid)}});
  }
  j["tracks"] = std::move(tracks);
  j["targets"] = scene.target_ids;
  json hint = json::object();
  for (const auto& [k, v] : scene.gt_lane_hint) hint[k] = v;
  j["gt_lane_hint"] = std::move(hint);
  return j.dump();
}

Scene scene_from_json_line(const std::string& line, int line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SceneParseError("line " + std::to_string(line_number) + ": " + e.what());
  }
  if (!j.is_object())
    throw SceneParseError("line " + std::to_string(line_number) + ": scene must be an object");

  Scene scene;
  scene.scene_id = require(j, "scene_id", line_number).get<std::string>();
  scene.psi = require(j, "psi", line_number).get<double>();
  scene.H = require(j, "H", line_number).get<int>();
  scene.T = require(j, "T", line_number).get<int>();

  const json& map = require(j, "map", line_number);
  for (const auto& seg : require(map, "segments", line_number)) {
    MapSegment s;
    s.id = require(seg, "id", line_number).get<std::string>();
    s.centerline.pts = points_from_json(require(seg, "pts", line_number), line_number,
                                        "map segment " + s.id + " pts");
    scene.map.segments.push_back(std::move(s));
  }
  for (const auto& [k, v] : require(map, "succ", line_number).items())
    scene.map.successors[k] = v.get<std::vector<std::string>>();
  for (const auto& [k, v] : require(map, "pred", line_number).items())
    scene.map.predecessors[k] = v.get<std::vector<std::string>>();

  for (const auto& t : require(j, "tracks", line_number)) {
    AgentTrack tr;
    tr.agent_id = require(t, "agent_id", line_number).get<std::string>();
    tr.positions = points_from_json(require(t, "pts", line_number), line_number,
                                    "track " + tr.agent_id + " pts");
    tr.valid = require(t, "valid", line_number).get<std::vector<bool>>();
    scene.tracks.push_back(std::move(tr));
  }
  scene.target_ids = require(j, "targets", line_number).get<std::vector<std::string>>();
  for (const auto& [k, v] : require(j, "gt_lane_hint", line_number).items())
    scene.gt_lane_hint[k] = v.get<std::string>();

  try {
    validate_scene(scene);
  } catch (const std::exception& e) {
    throw SceneParseError("line " + std::to_string(line_number) + ": " + e.what());
  }
  return scene;
}

void write_scenes(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& s : scenes) out << scene_to_json_line(s) << '\n';
}

void for_each_scene(const std::string& path, const std::function<void(Scene&&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    fn(scene_from_json_line(line, line_number));
  }
}

std::vector<Scene> read_scenes(const std::string& path) {
  std::vector<Scene> out;
  for_each_scene(path, [&](Scene&& s) { out.push_back(std::move(s)); });
  return out;
}

std::vector<std::vector<int>> split_dataset(int count, const std::vector<double>& fractions,
                                            std::uint64_t seed) {
  const double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: fractions must sum to 1");
  for (double f : fractions)
    if (f < 0.0) throw std::invalid_argument("split_dataset: negative fraction");

  // Sizes by largest remainder so the split is exhaustive for any count.
  const int k = static_cast<int>(fractions.size());
  std::vector<int> sizes(k);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = fractions[i] * count;
    sizes[i] = static_cast<int>(std::floor(exact));
    assigned += sizes[i];
    remainders.push_back({-(exact - sizes[i]), i});
  }
  std::sort(remainders.begin(), remainders.end());
  for (int r = 0; r < count - assigned; ++r) sizes[remainders[r % k].second]++;

  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = count - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);

  std::vector<std::vector<int>> out(k);
  int pos = 0;
  for (int i = 0; i < k; ++i) {
    out[i].assign(order.begin() + pos, order.begin() + pos + sizes[i]);
    std::sort(out[i].begin(), out[i].end());
    pos += sizes[i];
  }
  return out;
}

}  // namespace hlsf
