#include "hlsf/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hlsf {

namespace {

struct Projection {
  double distance = std::numeric_limits<double>::infinity();
  int segment_index = -1;  // index of the segment's leading point
  double param = 0.0;      // position within [pts[i], pts[i+1]]
  Vec2 point{0.0, 0.0};
};

Projection project_to_polyline(const Vec2& p, const Polyline& poly) {
  Projection best;
  for (int i = 0; i + 1 < poly.size(); ++i) {
    const Vec2 a = poly.point(i), b = poly.point(i + 1);
    const Vec2 ab = b - a;
    const double t = std::clamp(ab.dot(p - a) / ab.squaredNorm(), 0.0, 1.0);
    const Vec2 q = a + t * ab;
    const double d = (q - p).norm();
    if (d < best.distance) {
      best.distance = d;
      best.segment_index = i;
      best.param = t;
      best.point = q;
    }
  }
  return best;
}

struct RawCandidate {
  std::vector<Vec2> pts;
  std::vector<std::string> chain;
  double cut_distance = 0.0;
};

void append_point(std::vector<Vec2>& pts, const Vec2& p) {
  if (pts.empty() || (pts.back() - p).norm() > 1e-9) pts.push_back(p);
}

double path_arc(const std::vector<Vec2>& pts) {
  double arc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) arc += (pts[i] - pts[i - 1]).norm();
  return arc;
}

void extend_paths(const VectorMap& map, const CandidateConfig& cfg, std::vector<Vec2> pts,
                  std::vector<std::string> chain, std::vector<RawCandidate>& out,
                  double cut_distance) {
  constexpr int kMaxChain = 16;
  constexpr std::size_t kMaxCandidates = 64;
  if (out.size() >= kMaxCandidates) return;

  const double arc = path_arc(pts);
  const auto succ_it = map.successors.find(chain.back());
  const bool can_extend = arc < cfg.reach && succ_it != map.successors.end() &&
                          !succ_it->second.empty() && static_cast<int>(chain.size()) < kMaxChain;
  if (!can_extend) {
    out.push_back(RawCandidate{std::move(pts), std::move(chain), cut_distance});
    return;
  }
  for (const auto& next_id : succ_it->second) {
    const MapSegment* next = map.find(next_id);
    if (!next) continue;
    std::vector<Vec2> branch_pts = pts;
    std::vector<std::string> branch_chain = chain;
    for (int i = 0; i < next->centerline.size(); ++i)
      append_point(branch_pts, next->centerline.point(i));
    branch_chain.push_back(next_id);
    extend_paths(map, cfg, std::move(branch_pts), std::move(branch_chain), out, cut_distance);
  }
}

bool is_suffix(const std::vector<std::string>& shorter, const std::vector<std::string>& longer) {
  if (shorter.size() > longer.size()) return false;
  return std::equal(shorter.rbegin(), shorter.rend(), longer.rbegin());
}

}  // namespace

SceneView to_target_frame(const Scene& scene, const std::string& target_id) {
  const AgentTrack* target = scene.find_track(target_id);
  if (!target) throw std::invalid_argument("to_target_frame: unknown target " + target_id);
  const int h = scene.H;
  if (target->positions.rows() < h + 1 || h + 1 < 2)
    throw std::invalid_argument("to_target_frame: target needs at least 2 history points");

  TargetFrame frame;
  frame.origin = target->positions.row(h).transpose();

  // Last moving step of the history defines the heading.
  bool have_heading = false;
  for (int t = h; t >= 1 && !have_heading; --t) {
    const Vec2 d = (target->positions.row(t) - target->positions.row(t - 1)).transpose();
    if (d.norm() > 1e-9) {
      frame.heading = std::atan2(d.y(), d.x());
      have_heading = true;
    }
  }
  if (!have_heading) {
    // Stationary target: align with the nearest lane tangent if there is one.
    double best = std::numeric_limits<double>::infinity();
    for (const auto& seg : scene.map.segments) {
      const Projection proj = project_to_polyline(frame.origin, seg.centerline);
      if (proj.distance < best) {
        best = proj.distance;
        const Vec2 tangent = seg.centerline.point(proj.segment_index + 1) -
                             seg.centerline.point(proj.segment_index);
        frame.heading = std::atan2(tangent.y(), tangent.x());
      }
    }
  }

  SceneView view;
  view.frame = frame;
  for (int a = 0; a < static_cast<int>(scene.tracks.size()); ++a) {
    const AgentTrack& tr = scene.tracks[a];
    if (tr.agent_id == target_id) view.target_index = a;
    view.agent_ids.push_back(tr.agent_id);
    view.histories.push_back(frame.apply(Eigen::MatrixX2d(tr.positions.topRows(h + 1))));
    view.current_positions.push_back(frame.apply(Vec2(tr.positions.row(h).transpose())));
  }
  view.target_future = frame.apply(Eigen::MatrixX2d(target->positions.bottomRows(scene.T)));
  view.local_map = scene.map;
  for (auto& seg : view.local_map.segments) seg.centerline.pts = frame.apply(seg.centerline.pts);
  return view;
}

BuiltCandidates build_lane_candidates(const VectorMap& local_map, const Eigen::MatrixX2d& future,
                                      const CandidateConfig& cfg, Rng& rng) {
  const Vec2 origin(0.0, 0.0);
  std::vector<RawCandidate> raw;

  for (const auto& seg : local_map.segments) {
    const Projection proj = project_to_polyline(origin, seg.centerline);
    if (proj.distance > cfg.search_radius) continue;
    // Skip segments running against the vehicle's heading (+x here).
    const Vec2 tangent = seg.centerline.point(proj.segment_index + 1) -
                         seg.centerline.point(proj.segment_index);
    if (tangent.x() <= 0.0) continue;

    std::vector<Vec2> pts;
    append_point(pts, proj.point);
    for (int i = proj.segment_index + 1; i < seg.centerline.size(); ++i)
      append_point(pts, seg.centerline.point(i));
    extend_paths(local_map, cfg, std::move(pts), {seg.id}, raw, proj.distance);
  }
  if (raw.empty()) throw EmptyCandidateError("no lane candidate within search radius");

  // A path that is a suffix of another describes the same forward route;
  // keep the copy whose start is closest to the vehicle.
  std::vector<bool> dead(raw.size(), false);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t j = 0; j < raw.size(); ++j) {
      if (i == j || dead[i] || dead[j]) continue;
      if (is_suffix(raw[i].chain, raw[j].chain) || is_suffix(raw[j].chain, raw[i].chain)) {
        const std::size_t drop =
            (raw[i].cut_distance != raw[j].cut_distance)
                ? (raw[i].cut_distance > raw[j].cut_distance ? i : j)
                : (raw[i].chain.size() > raw[j].chain.size() ? i : j);
        dead[drop] = true;
      }
    }
  }
  std::vector<RawCandidate> kept;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (!dead[i]) kept.push_back(std::move(raw[i]));

  std::sort(kept.begin(), kept.end(), [](const RawCandidate& a, const RawCandidate& b) {
    if (a.cut_distance != b.cut_distance) return a.cut_distance < b.cut_distance;
    return a.chain < b.chain;
  });

  // Resample every kept path to the fixed grid and derive lane features.
  std::vector<ProcessedLane> lanes;
  std::vector<std::vector<std::string>> chains;
  for (auto& rc : kept) {
    if (rc.pts.size() < 2) {
      // Terminal cut with nothing ahead: continue along +x so the grid exists.
      rc.pts.push_back(rc.pts.back() + Vec2(cfg.spacing, 0.0));
    }
    Eigen::MatrixX2d m(static_cast<int>(rc.pts.size()), 2);
    for (std::size_t i = 0; i < rc.pts.size(); ++i) m.row(static_cast<int>(i)) = rc.pts[i].transpose();
    const Polyline sampled = resample_polyline(Polyline{std::move(m)}, cfg.spacing, cfg.reach);
    lanes.push_back(derive_lane_geometry(sampled));
    chains.push_back(std::move(rc.chain));
  }

  // Ground-truth lane by mean distance of the future to each candidate.
  LaneCandidateSet all;
  all.lanes = lanes;
  all.valid.assign(lanes.size(), true);
  const int gt = label_ground_truth_lane(future, all);

  // Too many: keep the ground truth plus M-1 uniformly drawn others.
  std::vector<int> order(lanes.size());
  for (std::size_t i = 0; i < lanes.size(); ++i) order[i] = static_cast<int>(i);
  if (static_cast<int>(lanes.size()) > cfg.M) {
    std::vector<int> others;
    for (int i : order)
      if (i != gt) others.push_back(i);
    for (int k = 0; k < cfg.M - 1; ++k) {
      const auto pick = k + static_cast<int>(rng.uniform_int(others.size() - k));
      std::swap(others[k], others[pick]);
    }
    others.resize(cfg.M - 1);
    others.push_back(gt);
    std::sort(others.begin(), others.end());
    order = std::move(others);
  }

  BuiltCandidates out;
  for (int i : order) {
    if (i == gt) out.set.gt_index = out.set.count();
    out.set.lanes.push_back(std::move(lanes[i]));
    out.set.valid.push_back(true);
    out.chains.push_back(std::move(chains[i]));
  }
  out.set.lanes[out.set.gt_index].gt = true;

  const int f = out.set.lanes.front().size();
  while (out.set.count() < cfg.M) {
    ProcessedLane fake;
    fake.rows.setZero(f, 5);
    fake.is_fake = true;
    out.set.lanes.push_back(std::move(fake));
    out.set.valid.push_back(false);
    out.chains.emplace_back();
  }
  return out;
}

}  // namespace hlsf
