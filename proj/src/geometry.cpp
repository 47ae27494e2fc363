#include "hlsf/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hlsf {

namespace {
constexpr double kCoincidentEps = 1e-9;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double Polyline::arc_length() const {
  double total = 0.0;
  for (int i = 1; i < size(); ++i) total += (pts.row(i) - pts.row(i - 1)).norm();
  return total;
}

Polyline make_polyline(Eigen::MatrixX2d pts) {
  if (pts.rows() < 2) throw std::invalid_argument("polyline needs at least 2 points");
  if (!pts.allFinite()) throw std::invalid_argument("polyline has non-finite coordinates");
  for (int i = 1; i < pts.rows(); ++i) {
    if ((pts.row(i) - pts.row(i - 1)).norm() <= kCoincidentEps)
      throw std::invalid_argument("polyline has coincident consecutive points");
  }
  return Polyline{std::move(pts)};
}

ProcessedHistory derive_kinematics(const Eigen::MatrixX2d& raw_track, double psi) {
  const int n = static_cast<int>(raw_track.rows());
  if (n < 2) throw std::invalid_argument("derive_kinematics: need at least 2 points");
  if (psi <= 0.0) throw std::invalid_argument("derive_kinematics: sampling rate must be > 0");
  if (!raw_track.allFinite()) throw std::invalid_argument("derive_kinematics: non-finite track");

  ProcessedHistory out;
  out.sampling_rate = psi;
  out.rows.resize(n, 4);
  out.rows.leftCols<2>() = raw_track;

  double prev_heading = 0.0;
  for (int t = 1; t < n; ++t) {
    const Vec2 d = (raw_track.row(t) - raw_track.row(t - 1)).transpose();
    const double step = d.norm();
    double heading = prev_heading;
    if (step > kCoincidentEps) heading = wrap_angle(std::atan2(d.y(), d.x()));
    out.rows(t, 2) = psi * step;
    out.rows(t, 3) = heading;
    prev_heading = heading;
  }
  out.rows(0, 2) = out.rows(1, 2);
  out.rows(0, 3) = out.rows(1, 3);
  return out;
}

ProcessedLane derive_lane_geometry(const Polyline& centerline) {
  const int f = centerline.size();
  if (f < 2) throw std::invalid_argument("derive_lane_geometry: need at least 2 points");

  // Guard against unresampled input. Chord lengths of an arc-equally
  // resampled curve vary a little where the source polyline bends, so this
  // check is deliberately coarse; exact uniformity lives in arc length.
  const double first = (centerline.pts.row(1) - centerline.pts.row(0)).norm();
  for (int i = 1; i < f; ++i) {
    const double d = (centerline.pts.row(i) - centerline.pts.row(i - 1)).norm();
    if (std::abs(d - first) > 1e-2 * std::max(first, d))
      throw std::invalid_argument("derive_lane_geometry: spacing not uniform");
  }

  ProcessedLane lane;
  lane.rows.setZero(f, 5);
  lane.rows.leftCols<2>() = centerline.pts;
  for (int i = 1; i < f; ++i) {
    const Vec2 tangent = (centerline.pts.row(i) - centerline.pts.row(i - 1)).transpose();
    lane.rows(i, 2) = tangent.x();
    lane.rows(i, 3) = tangent.y();
    lane.rows(i, 4) = wrap_angle(std::atan2(tangent.y(), tangent.x()));
  }
  lane.rows.row(0).tail<3>() = lane.rows.row(1).tail<3>();
  return lane;
}

Polyline resample_polyline(const Polyline& p, double spacing, double length) {
  if (spacing <= 0.0) throw std::invalid_argument("resample_polyline: spacing must be > 0");
  const double arc = p.arc_length();
  if (arc < spacing) throw std::invalid_argument("resample_polyline: input shorter than spacing");

  const int n_out = static_cast<int>(std::llround(length / spacing));
  if (n_out < 1) throw std::invalid_argument("resample_polyline: length shorter than spacing");

  Eigen::MatrixX2d out(n_out, 2);
  int seg = 0;                  // current input segment index
  double seg_start_arc = 0.0;   // arc length at segment start
  double seg_len = (p.pts.row(1) - p.pts.row(0)).norm();
  const int last_seg = p.size() - 2;

  for (int k = 0; k < n_out; ++k) {
    const double s = spacing * (k + 1);
    while (seg < last_seg && s > seg_start_arc + seg_len) {
      seg_start_arc += seg_len;
      ++seg;
      seg_len = (p.pts.row(seg + 1) - p.pts.row(seg)).norm();
    }
    // Within the segment interpolate; past the end of the input the final
    // segment's direction is extended linearly.
    const double u = (s - seg_start_arc) / seg_len;
    out.row(k) = p.pts.row(seg) + u * (p.pts.row(seg + 1) - p.pts.row(seg));
  }
  return Polyline{std::move(out)};
}

NearestPoint nearest_centerline_point(const Vec2& p, const ProcessedLane& lane) {
  if (lane.is_fake) throw std::invalid_argument("nearest_centerline_point: fake lane");
  NearestPoint best;
  double best_sq = std::numeric_limits<double>::infinity();
  for (int i = 0; i < lane.size(); ++i) {
    const double sq = (lane.point(i) - p).squaredNorm();
    if (sq < best_sq) {
      best_sq = sq;
      best.index = i;
    }
  }
  best.point = lane.point(best.index);
  best.distance = std::sqrt(best_sq);
  return best;
}

int label_ground_truth_lane(const Eigen::MatrixX2d& future, const LaneCandidateSet& candidates) {
  if (future.rows() == 0) throw std::invalid_argument("label_ground_truth_lane: empty future");
  int best = -1;
  double best_mean = std::numeric_limits<double>::infinity();
  for (int m = 0; m < candidates.count(); ++m) {
    const ProcessedLane& lane = candidates.lanes[m];
    if (lane.is_fake) continue;
    double sum = 0.0;
    for (int t = 0; t < future.rows(); ++t)
      sum += nearest_centerline_point(future.row(t).transpose(), lane).distance;
    const double mean = sum / static_cast<double>(future.rows());
    if (mean < best_mean) {
      best_mean = mean;
      best = m;
    }
  }
  if (best < 0) throw std::invalid_argument("label_ground_truth_lane: all candidates fake");
  return best;
}

std::vector<int> select_neighbors(const std::vector<Vec2>& current_positions, int target_index,
                                  const ProcessedLane& reference_lane, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("select_neighbors: tau must be > 0");
  std::vector<int> out{target_index};
  if (reference_lane.is_fake) return out;
  for (int j = 0; j < static_cast<int>(current_positions.size()); ++j) {
    if (j == target_index) continue;
    if (nearest_centerline_point(current_positions[j], reference_lane).distance <= tau)
      out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::MatrixX2d TargetFrame::apply(const Eigen::MatrixX2d& pts) const {
  Eigen::MatrixX2d out(pts.rows(), 2);
  for (int i = 0; i < pts.rows(); ++i) out.row(i) = apply(Vec2(pts.row(i).transpose())).transpose();
  return out;
}

Eigen::MatrixX2d TargetFrame::invert(const Eigen::MatrixX2d& pts) const {
  Eigen::MatrixX2d out(pts.rows(), 2);
  for (int i = 0; i < pts.rows(); ++i) out.row(i) = invert(Vec2(pts.row(i).transpose())).transpose();
  return out;
}

}  // namespace hlsf
