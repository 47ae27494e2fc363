#include "hlsf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hlsf/parallel.hpp"

namespace hlsf {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMapStep = 2.0;  // m between map polyline points

/// Circular-arc or straight piece with exact arc-length evaluation.
struct Piece {
  Vec2 start{0.0, 0.0};
  double heading = 0.0;
  double curvature = 0.0;  // 1/m, 0 for straight
  double length = 0.0;

  Vec2 at(double s) const {
    if (std::abs(curvature) < 1e-12)
      return start + s * Vec2(std::cos(heading), std::sin(heading));
    const double r = 1.0 / curvature;
    const Vec2 center = start + r * Vec2(-std::sin(heading), std::cos(heading));
    const double a0 = heading - kPi / 2.0 * (curvature > 0 ? 1.0 : -1.0);
    const double a = a0 + s * curvature;
    return center + std::abs(r) * Vec2(std::cos(a), std::sin(a));
  }
  double heading_at(double s) const { return heading + s * curvature; }
};

struct AnalyticPath {
  std::vector<Piece> pieces;

  double length() const {
    double total = 0.0;
    for (const auto& p : pieces) total += p.length;
    return total;
  }
  Vec2 at(double s) const {
    s = std::clamp(s, 0.0, length());
    for (const auto& p : pieces) {
      if (s <= p.length + 1e-12) return p.at(s);
      s -= p.length;
    }
    return pieces.back().at(pieces.back().length);
  }
  double heading_at(double s) const {
    s = std::clamp(s, 0.0, length());
    for (const auto& p : pieces) {
      if (s <= p.length + 1e-12) return p.heading_at(s);
      s -= p.length;
    }
    return pieces.back().heading_at(pieces.back().length);
  }
  Vec2 normal_at(double s) const {
    const double h = heading_at(s);
    return {-std::sin(h), std::cos(h)};
  }
  Eigen::MatrixX2d sample(double step) const {
    const double total = length();
    const int n = std::max(2, static_cast<int>(std::floor(total / step)) + 1);
    Eigen::MatrixX2d pts(n, 2);
    for (int i = 0; i < n; ++i) {
      const double s = std::min(total, i * step);
      pts.row(i) = at(s).transpose();
    }
    // Keep the exact endpoint so successor segments join cleanly.
    pts.row(n - 1) = at(total).transpose();
    return pts;
  }

  static AnalyticPath line(Vec2 start, double heading, double len) {
    return AnalyticPath{{Piece{start, heading, 0.0, len}}};
  }
  AnalyticPath then_arc(double curvature, double len) const {
    AnalyticPath out = *this;
    const double s_end = length();
    out.pieces.push_back(Piece{at(s_end), heading_at(s_end), curvature, len});
    return out;
  }
  static AnalyticPath concat(const AnalyticPath& a, const AnalyticPath& b) {
    AnalyticPath out = a;
    out.pieces.insert(out.pieces.end(), b.pieces.begin(), b.pieces.end());
    return out;
  }
};

/// Scene under construction, before the global rigid randomization.
struct Builder {
  Scene scene;
  Rng rng;
  const SynthSpec* spec = nullptr;

  void add_segment(const std::string& id, const AnalyticPath& path) {
    scene.map.segments.push_back(MapSegment{id, make_polyline(path.sample(kMapStep))});
  }
  void connect(const std::string& from, const std::string& to) {
    scene.map.successors[from].push_back(to);
    scene.map.predecessors[to].push_back(from);
  }

  /// Track that follows `path` with constant acceleration, current position
  /// at arc s0, plus per-step Gaussian noise.
  AgentTrack track_along(const std::string& id, const AnalyticPath& path, double s0, double v0,
                         double accel, Rng& noise_rng) const {
    const int n = scene.total_steps();
    const double dt = 1.0 / scene.psi;
    AgentTrack tr;
    tr.agent_id = id;
    tr.positions.resize(n, 2);
    tr.valid.assign(n, true);
    for (int k = 0; k < n; ++k) {
      const double t = (k - scene.H) * dt;
      const double v_t = std::max(0.0, v0 + accel * t);
      double s = s0 + v0 * t + 0.5 * accel * t * t;
      if (v0 + accel * t < 0.0) s = s0 - 0.5 * v0 * v0 / accel;  // stopped, hold position
      // Standing vehicles sit exactly on the centerline; jitter on them would
      // fabricate motion and scramble derived headings.
      const double jitter = v_t > 0.1 ? 1.0 : 0.0;
      s += spec->noise_lon * noise_rng.normal() * jitter;
      const Vec2 p =
          path.at(s) + spec->noise_lat * noise_rng.normal() * jitter * path.normal_at(s);
      tr.positions.row(k) = p.transpose();
    }
    return tr;
  }

  void finish(const std::string& target_id, const std::string& hint) {
    scene.target_ids = {target_id};
    scene.gt_lane_hint[target_id] = hint;

    // Global rigid randomization: nothing downstream may depend on the
    // world frame, so every scene gets its own.
    const double phi = rng.uniform(-kPi, kPi);
    const Vec2 shift(rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0));
    const double c = std::cos(phi), s = std::sin(phi);
    auto xform = [&](Eigen::MatrixX2d& pts) {
      for (int i = 0; i < pts.rows(); ++i) {
        const Vec2 p = pts.row(i).transpose();
        pts.row(i) = Vec2(c * p.x() - s * p.y() + shift.x(),
                          s * p.x() + c * p.y() + shift.y()).transpose();
      }
    };
    for (auto& seg : scene.map.segments) xform(seg.centerline.pts);
    for (auto& tr : scene.tracks) xform(tr.positions);
  }
};

double pick_speed(Rng& rng) { return rng.uniform(5.0, 9.0); }
double pick_accel(Rng& rng) { return rng.uniform(-0.3, 0.3); }

void build_straight(Builder& b) {
  const AnalyticPath lane = AnalyticPath::line({0.0, 0.0}, 0.0, 220.0);
  b.add_segment("lane", lane);
  Rng noise = b.rng.fork("noise");
  const double v0 = pick_speed(b.rng);
  const double s0 = b.rng.uniform(50.0, 70.0);
  b.scene.tracks.push_back(b.track_along("target", lane, s0, v0, pick_accel(b.rng), noise));
  const int n_neigh = b.spec->min_neighbors +
                      static_cast<int>(b.rng.uniform_int(b.spec->max_neighbors - b.spec->min_neighbors + 1));
  for (int i = 0; i < n_neigh; ++i) {
    const double gap = b.rng.uniform(12.0, 35.0) * (i % 2 == 0 ? 1.0 : -1.0);
    b.scene.tracks.push_back(b.track_along("agent" + std::to_string(i), lane, s0 + gap,
                                           pick_speed(b.rng), pick_accel(b.rng), noise));
  }
  b.finish("target", "lane");
}

void build_curve(Builder& b) {
  const double radius = b.rng.uniform(35.0, 90.0);
  const double sign = b.rng.uniform() < 0.5 ? 1.0 : -1.0;
  AnalyticPath lane{{Piece{{0.0, 0.0}, 0.0, sign / radius, 220.0}}};
  b.add_segment("lane", lane);
  Rng noise = b.rng.fork("noise");
  const double v0 = pick_speed(b.rng);
  const double s0 = b.rng.uniform(50.0, 70.0);
  b.scene.tracks.push_back(b.track_along("target", lane, s0, v0, pick_accel(b.rng), noise));
  const double gap = b.rng.uniform(12.0, 30.0);
  b.scene.tracks.push_back(b.track_along("agent0", lane, s0 + gap, pick_speed(b.rng), 0.0, noise));
  b.finish("target", "lane");
}

void build_fork3(Builder& b) {
  const SynthSpec& spec = *b.spec;
  const double root_len = 60.0;
  const AnalyticPath root = AnalyticPath::line({-root_len, 0.0}, 0.0, root_len);
  b.add_segment("root", root);

  // Branch 0 straight ahead; 1 and 2 peel off through a short arc, so the
  // centerlines separate quickly past the fork point.
  std::vector<AnalyticPath> branches;
  branches.push_back(AnalyticPath::line({0.0, 0.0}, 0.0, 110.0));
  for (int k = 1; k <= 2; ++k) {
    const double theta = b.rng.uniform(25.0, 40.0) * kPi / 180.0 * (k == 1 ? 1.0 : -1.0);
    const double turn_len = 10.0;
    AnalyticPath br{{Piece{{0.0, 0.0}, 0.0, theta / turn_len, turn_len}}};
    const double h_end = br.heading_at(turn_len);
    br.pieces.push_back(Piece{br.at(turn_len), h_end, 0.0, 100.0});
    branches.push_back(br);
  }
  for (int k = 0; k < 3; ++k) {
    b.add_segment("branch" + std::to_string(k), branches[k]);
    b.connect("root", "branch" + std::to_string(k));
  }

  const double u = b.rng.uniform();
  const int branch = u < spec.fork_p0 ? 0 : (u < spec.fork_p0 + spec.fork_p1 ? 1 : 2);
  const AnalyticPath target_path = AnalyticPath::concat(root, branches[branch]);

  const bool ambiguous = b.rng.uniform() < spec.frac_ambiguous;
  const double s0 = ambiguous ? root_len - b.rng.uniform(2.0, 6.0)
                              : root_len + b.rng.uniform(4.0, 10.0);
  const double v0 = pick_speed(b.rng);
  Rng noise = b.rng.fork("noise");
  b.scene.tracks.push_back(b.track_along("target", target_path, s0, v0, pick_accel(b.rng), noise));

  const int n_neigh = spec.min_neighbors +
                      static_cast<int>(b.rng.uniform_int(spec.max_neighbors - spec.min_neighbors + 1));
  for (int i = 0; i < n_neigh; ++i) {
    // Lead vehicle on a random branch, follower on the root behind.
    if (i % 2 == 0) {
      const int nb = static_cast<int>(b.rng.uniform_int(3));
      const AnalyticPath p = AnalyticPath::concat(root, branches[nb]);
      b.scene.tracks.push_back(b.track_along("agent" + std::to_string(i), p,
                                             s0 + b.rng.uniform(14.0, 30.0), pick_speed(b.rng),
                                             pick_accel(b.rng), noise));
    } else {
      b.scene.tracks.push_back(b.track_along("agent" + std::to_string(i), target_path,
                                             s0 - b.rng.uniform(12.0, 25.0), pick_speed(b.rng),
                                             pick_accel(b.rng), noise));
    }
  }
  b.finish("target", "branch" + std::to_string(branch));
}

void build_merge(Builder& b) {
  const double approach = 60.0;
  const Vec2 join(0.0, 0.0);
  const AnalyticPath in_a = AnalyticPath::line({-approach, 0.0}, 0.0, approach);
  const double off = 12.0;
  const double hb = std::atan2(off, approach);
  const double len_b = std::hypot(approach, off);
  const AnalyticPath in_b = AnalyticPath::line({-approach, -off}, hb, len_b);
  const AnalyticPath out = AnalyticPath::line(join, 0.0, 130.0);
  b.add_segment("in_a", in_a);
  b.add_segment("in_b", in_b);
  b.add_segment("out", out);
  b.connect("in_a", "out");
  b.connect("in_b", "out");

  Rng noise = b.rng.fork("noise");
  const double v0 = b.rng.uniform(5.0, 8.0);
  const double s0 = approach - b.rng.uniform(10.0, 20.0);
  const AnalyticPath target_path = AnalyticPath::concat(in_a, out);
  b.scene.tracks.push_back(b.track_along("target", target_path, s0, v0, pick_accel(b.rng), noise));
  // Merging vehicle on the other approach.
  const AnalyticPath other_path = AnalyticPath::concat(in_b, out);
  b.scene.tracks.push_back(b.track_along("agent0", other_path,
                                         len_b - b.rng.uniform(10.0, 25.0), pick_speed(b.rng),
                                         pick_accel(b.rng), noise));
  b.finish("target", "in_a");
}

void build_lane_change(Builder& b) {
  const double lane_gap = 3.5;
  const int from = static_cast<int>(b.rng.uniform_int(2));
  const int to = 1 - from;
  for (int i = 0; i < 2; ++i)
    b.add_segment("lane_" + std::to_string(i),
                  AnalyticPath::line({0.0, i * lane_gap}, 0.0, 220.0));

  const double v0 = pick_speed(b.rng);
  const double change_len = b.rng.uniform(25.0, 35.0);
  const double s_start = b.rng.uniform(50.0, 65.0);
  const double s0 = s_start + change_len * b.rng.uniform(0.05, 0.25);

  // Smoothstep blend between the two parallel centerlines.
  const double y_from = from * lane_gap, y_to = to * lane_gap;
  auto pos_at = [&](double s) {
    double u = std::clamp((s - s_start) / change_len, 0.0, 1.0);
    u = u * u * (3.0 - 2.0 * u);
    return Vec2(s, y_from + u * (y_to - y_from));
  };

  const int n = b.scene.total_steps();
  const double dt = 1.0 / b.scene.psi;
  Rng noise = b.rng.fork("noise");
  AgentTrack tr;
  tr.agent_id = "target";
  tr.positions.resize(n, 2);
  tr.valid.assign(n, true);
  for (int k = 0; k < n; ++k) {
    const double t = (k - b.scene.H) * dt;
    const double s = s0 + v0 * t + b.spec->noise_lon * noise.normal();
    const Vec2 p = pos_at(s) + Vec2(0.0, b.spec->noise_lat * noise.normal());
    tr.positions.row(k) = p.transpose();
  }
  b.scene.tracks.push_back(std::move(tr));

  const AnalyticPath other = AnalyticPath::line({0.0, to * lane_gap}, 0.0, 220.0);
  b.scene.tracks.push_back(b.track_along("agent0", other, s0 - b.rng.uniform(15.0, 30.0),
                                         pick_speed(b.rng), 0.0, noise));
  b.finish("target", "lane_" + std::to_string(to));
}

void build_parallel_multilane(Builder& b) {
  const int n_lanes = 12;
  const double gap = 1.4;  // tight: all 12 lanes sit inside the search radius
  const int own = 5 + static_cast<int>(b.rng.uniform_int(2));
  for (int i = 0; i < n_lanes; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "lane_%02d", i);
    b.add_segment(id, AnalyticPath::line({0.0, i * gap}, 0.0, 220.0));
  }
  const AnalyticPath own_path = AnalyticPath::line({0.0, own * gap}, 0.0, 220.0);
  Rng noise = b.rng.fork("noise");
  const double s0 = b.rng.uniform(50.0, 70.0);
  b.scene.tracks.push_back(
      b.track_along("target", own_path, s0, pick_speed(b.rng), pick_accel(b.rng), noise));
  char hint[16];
  std::snprintf(hint, sizeof(hint), "lane_%02d", own);
  b.finish("target", hint);
}

void build_stopped_queue(Builder& b) {
  const AnalyticPath lane = AnalyticPath::line({0.0, 0.0}, 0.0, 220.0);
  b.add_segment("lane", lane);
  Rng noise = b.rng.fork("noise");

  const double s0 = b.rng.uniform(50.0, 70.0);
  const bool already_stopped = b.rng.uniform() < 0.25;
  const double v0 = already_stopped ? 0.0 : b.rng.uniform(4.0, 7.0);
  const double decel = b.rng.uniform(1.5, 2.5);
  const double stop_s = already_stopped ? s0 : s0 + v0 * v0 / (2.0 * decel);

  const int n_queue = 2 + static_cast<int>(b.rng.uniform_int(2));
  double q = stop_s + b.rng.uniform(4.0, 6.0);
  for (int i = 0; i < n_queue; ++i) {
    b.scene.tracks.push_back(
        b.track_along("agent" + std::to_string(i), lane, q, 0.0, 0.0, noise));
    q += b.rng.uniform(7.0, 9.0);
  }
  b.scene.tracks.push_back(
      b.track_along("target", lane, s0, v0, already_stopped ? 0.0 : -decel, noise));
  b.finish("target", "lane");
}

}  // namespace

const std::vector<std::string>& synth_templates() {
  static const std::vector<std::string> names = {
      "straight", "curve", "fork3", "merge", "lane_change", "parallel_multilane", "stopped_queue"};
  return names;
}

void apply_profile(SynthSpec& spec, const std::string& profile) {
  if (profile == "nuscenes") {
    spec.psi = 2.0;
    spec.H = 4;
    spec.T = 12;
  } else if (profile == "argoverse") {
    spec.psi = 2.0;
    spec.H = 4;
    spec.T = 6;
  } else {
    throw std::invalid_argument("unknown profile: " + profile);
  }
}

Scene generate_scene(const SynthSpec& spec, int index) {
  if (spec.templates.empty()) throw std::invalid_argument("generate_scene: no templates");
  const std::string& tmpl = spec.templates[index % spec.templates.size()];
  const auto& known = synth_templates();
  if (std::find(known.begin(), known.end(), tmpl) == known.end())
    throw std::invalid_argument("unknown template: " + tmpl);

  Builder b;
  b.spec = &spec;
  b.rng = Rng(spec.seed).fork(static_cast<std::uint64_t>(index));
  b.scene.scene_id = tmpl + "-" + std::to_string(index);
  b.scene.psi = spec.psi;
  b.scene.H = spec.H;
  b.scene.T = spec.T;

  if (tmpl == "straight") build_straight(b);
  else if (tmpl == "curve") build_curve(b);
  else if (tmpl == "fork3") build_fork3(b);
  else if (tmpl == "merge") build_merge(b);
  else if (tmpl == "lane_change") build_lane_change(b);
  else if (tmpl == "parallel_multilane") build_parallel_multilane(b);
  else build_stopped_queue(b);

  validate_scene(b.scene);
  return b.scene;
}

std::vector<Scene> generate_dataset(const SynthSpec& spec) {
  if (spec.count <= 0) throw std::invalid_argument("generate_dataset: count must be > 0");
  std::vector<Scene> out(static_cast<std::size_t>(spec.count));
  parallel_for(spec.count, [&](int i) { out[static_cast<std::size_t>(i)] = generate_scene(spec, i); });
  return out;
}

}  // namespace hlsf
