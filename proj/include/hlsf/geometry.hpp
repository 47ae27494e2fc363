#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hlsf {

using Vec2 = Eigen::Vector2d;

/// Ordered 2D point sequence, at least two points, finite coordinates,
/// consecutive points more than 1e-9 m apart. Rows are points.
struct Polyline {
  Eigen::MatrixX2d pts;

  int size() const { return static_cast<int>(pts.rows()); }
  Vec2 point(int i) const { return pts.row(i).transpose(); }

  /// Total arc length over the segments.
  double arc_length() const;
};

/// Validating maker. Throws std::invalid_argument on NaN/Inf coordinates,
/// fewer than two points, or coincident consecutive points.
Polyline make_polyline(Eigen::MatrixX2d pts);

/// Preprocessed vehicle sequence. Each row is (x, y, speed, heading),
/// meters / m/s / radians in (-pi, pi]. sampling_rate is in Hz.
struct ProcessedHistory {
  Eigen::MatrixXd rows;  // n x 4
  double sampling_rate = 0.0;

  int steps() const { return static_cast<int>(rows.rows()); }
};

/// Preprocessed lane. Each row is (x, y, tangent_x, tangent_y, direction).
/// Fake lanes are all-zero padding used to keep the candidate count fixed.
struct ProcessedLane {
  Eigen::MatrixXd rows;  // F x 5
  bool is_fake = false;
  bool gt = false;

  int size() const { return static_cast<int>(rows.rows()); }
  Vec2 point(int i) const { return rows.row(i).head<2>().transpose(); }
};

/// Fixed-size set of candidate lanes for one target. Exactly one non-fake
/// lane carries gt = true; gt_index points at it.
struct LaneCandidateSet {
  std::vector<ProcessedLane> lanes;
  int gt_index = -1;
  std::vector<bool> valid;  // per lane: true for real lanes, false for fakes

  int count() const { return static_cast<int>(lanes.size()); }
};

/// Speed/heading kinematics from a raw track.
///
/// speed_t = psi * |p_t - p_{t-1}|, heading_t the full-quadrant angle of
/// the backward difference. Zero-length steps carry the previous heading
/// forward (0 when there has been no motion yet). Row 0 copies row 1's
/// derived values because the backward difference is undefined there.
ProcessedHistory derive_kinematics(const Eigen::MatrixX2d& raw_track, double psi);

/// Tangent/direction features for an equally spaced centerline.
/// tangent_f = l_f - l_{f-1}; direction_f its full-quadrant angle; index 0
/// copies index 1. Throws if the spacing is not uniform within 1e-6
/// relative or the polyline has fewer than two points.
ProcessedLane derive_lane_geometry(const Polyline& centerline);

/// Resamples onto the arc-length grid s = spacing * {1..N}, N =
/// round(length / spacing), measured from the first input point. Points
/// beyond the input arc length continue along the final segment's
/// direction, so the output always spans `length` meters from the start.
Polyline resample_polyline(const Polyline& p, double spacing, double length);

/// Discrete nearest point on a lane: argmin over the F points, lowest
/// index on ties. Throws on fake lanes.
struct NearestPoint {
  int index = -1;
  Vec2 point{0.0, 0.0};
  double distance = 0.0;
};
NearestPoint nearest_centerline_point(const Vec2& p, const ProcessedLane& lane);

/// Index of the candidate whose centerline is closest to the future track,
/// by mean per-timestep distance to the nearest centerline point. Fake
/// candidates are skipped; ties break to the lowest index. Throws when the
/// future is empty or every candidate is fake.
int label_ground_truth_lane(const Eigen::MatrixX2d& future, const LaneCandidateSet& candidates);

/// Neighbors for one reference lane: the target plus every other agent
/// whose current position lies within tau meters of the lane. For fake
/// reference lanes only the target is returned. Indices come back sorted.
std::vector<int> select_neighbors(const std::vector<Vec2>& current_positions, int target_index,
                                  const ProcessedLane& reference_lane, double tau);

/// Rigid transform into a pose-centered frame: `apply` maps world points
/// to a frame where the pose sits at the origin heading along +x.
struct TargetFrame {
  Vec2 origin{0.0, 0.0};
  double heading = 0.0;

  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(heading), s = std::sin(heading);
    const Vec2 d = p - origin;
    return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
  }
  Vec2 invert(const Vec2& q) const {
    const double c = std::cos(heading), s = std::sin(heading);
    return {origin.x() + c * q.x() - s * q.y(), origin.y() + s * q.x() + c * q.y()};
  }
  Eigen::MatrixX2d apply(const Eigen::MatrixX2d& pts) const;
  Eigen::MatrixX2d invert(const Eigen::MatrixX2d& pts) const;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace hlsf
