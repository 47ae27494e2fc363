#include "hlsf/model.hpp"

#include <stdexcept>

#include "hlsf/parallel.hpp"

namespace hlsf {

Recipe recipe_from_string(const std::string& name) {
  if (name == "M1") return Recipe::M1;
  if (name == "M2") return Recipe::M2;
  if (name == "M3") return Recipe::M3;
  if (name == "M4") return Recipe::M4;
  if (name == "M5") return Recipe::M5;
  if (name == "Baseline") return Recipe::Baseline;
  if (name == "Baseline+BOM") return Recipe::BaselineBOM;
  throw std::invalid_argument("unknown recipe: " + name);
}

std::string recipe_to_string(Recipe r) {
  switch (r) {
    case Recipe::M1: return "M1";
    case Recipe::M2: return "M2";
    case Recipe::M3: return "M3";
    case Recipe::M4: return "M4";
    case Recipe::M5: return "M5";
    case Recipe::Baseline: return "Baseline";
    case Recipe::BaselineBOM: return "Baseline+BOM";
  }
  throw std::logic_error("bad recipe enum");
}

ModelConfig apply_recipe(ModelConfig base, Recipe recipe) {
  base.single_context = false;
  base.bom_samples = 1;
  switch (recipe) {
    case Recipe::M1: base.flags = {false, false, false, false}; break;
    case Recipe::M2: base.flags = {true, false, false, false}; break;
    case Recipe::M3: base.flags = {true, true, false, false}; break;
    case Recipe::M4: base.flags = {true, true, true, false}; break;
    case Recipe::M5: base.flags = {true, true, true, true}; break;
    case Recipe::Baseline:
      base.flags = {true, false, false, false};
      base.single_context = true;
      break;
    case Recipe::BaselineBOM:
      base.flags = {true, false, false, false};
      base.single_context = true;
      base.bom_samples = 5;
      break;
  }
  base.validate();
  return base;
}

void ModelConfig::validate() const {
  if (M < 1 || D < 1 || F < 2 || H < 1 || T < 1)
    throw std::invalid_argument("config: M, D, F, H, T must be positive");
  if (tau <= 0.0) throw std::invalid_argument("config: tau must be > 0");
  if (k_rounds < 1) throw std::invalid_argument("config: k_rounds must be >= 1");
  const int all[] = {dims.history_embed, dims.history_hidden, dims.lane_embed, dims.lane_hidden,
                     dims.message,       dims.node_hidden,    dims.mode_embed, dims.decoder_embed,
                     dims.decoder_hidden, dims.att_hidden,    dims.head_hidden, dims.disc_embed,
                     dims.disc_hidden};
  for (int v : all)
    if (v < 1) throw std::invalid_argument("config: all dims must be positive");
  // Message passing seeds node states with the history encodings.
  if (dims.node_hidden != dims.history_hidden)
    throw std::invalid_argument("config: node_hidden must equal history_hidden");
  if (single_context && (flags.vli || flags.v2i || flags.gan))
    throw std::invalid_argument("config: Baseline recipes exclude VLI/V2I/GAN");
  if (bom_samples > 1 && !single_context)
    throw std::invalid_argument("config: best-of-many training is a Baseline recipe");
}

Example build_example(const Scene& scene, const std::string& target_id, const ModelConfig& cfg) {
  const SceneView view = to_target_frame(scene, target_id);
  Rng lane_rng = Rng(0).fork(scene.scene_id);
  BuiltCandidates built =
      build_lane_candidates(view.local_map, view.target_future, cfg.candidates(), lane_rng);

  Example ex;
  ex.scene_id = scene.scene_id;
  ex.target_id = target_id;
  const auto hint = scene.gt_lane_hint.find(target_id);
  ex.group = hint == scene.gt_lane_hint.end() ? std::string() : hint->second;

  const auto& hist_local = view.histories[static_cast<std::size_t>(view.target_index)];
  ex.target_history = derive_kinematics(hist_local, scene.psi).rows;

  // Future kinematics continue from the current position so the first
  // future step has a well-defined backward difference.
  Eigen::MatrixX2d joined(scene.T + 1, 2);
  joined.row(0) = hist_local.row(scene.H);
  joined.bottomRows(scene.T) = view.target_future;
  ex.target_future4 = derive_kinematics(joined, scene.psi).rows.bottomRows(scene.T);
  ex.future = view.target_future;

  for (std::size_t a = 0; a < view.histories.size(); ++a) {
    if (static_cast<int>(a) == view.target_index) continue;
    ex.other_history.push_back(derive_kinematics(view.histories[a], scene.psi).rows);
    ex.other_current.push_back(view.current_positions[a]);
  }

  ex.lanes = std::move(built.set);
  ex.chains = std::move(built.chains);
  ex.gt_index = ex.lanes.gt_index;

  // Neighbor sets per reference lane, computed over current positions.
  std::vector<Vec2> positions{Vec2(0.0, 0.0)};  // target first
  for (const auto& pcur : ex.other_current) positions.push_back(pcur);
  for (int m = 0; m < ex.lanes.count(); ++m) {
    std::vector<int> sel = select_neighbors(positions, 0, ex.lanes.lanes[m], cfg.tau);
    std::vector<int> others;
    for (int idx : sel)
      if (idx != 0) others.push_back(idx - 1);
    ex.lane_neighbors.push_back(std::move(others));
  }
  return ex;
}

std::vector<Example> build_examples(const std::vector<Scene>& scenes, const ModelConfig& cfg) {
  std::vector<std::vector<Example>> per_scene(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), [&](int i) {
    for (const auto& target : scenes[static_cast<std::size_t>(i)].target_ids) {
      try {
        per_scene[static_cast<std::size_t>(i)].push_back(
            build_example(scenes[static_cast<std::size_t>(i)], target, cfg));
      } catch (const EmptyCandidateError&) {
        // No lane in reach: the scene is skipped.
      }
    }
  });
  std::vector<Example> out;
  for (auto& group : per_scene)
    for (auto& ex : group) out.push_back(std::move(ex));
  return out;
}

}  // namespace hlsf
