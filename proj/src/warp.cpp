#include "ditto/warp.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ditto/error.hpp"
#include "ditto/kernels.hpp"

namespace ditto {

void WarpConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::InvalidArgument, "warp: sigma must be > 0");
  if (margin < 0) throw Error(ErrorKind::InvalidArgument, "warp: margin must be >= 0");
  if (!(max_obj_dist >= 0.0)) throw Error(ErrorKind::InvalidArgument, "warp: max_obj_dist must be >= 0");
}

Mask redetect_bbox(const CorrespondenceSet& c, ImageSize size, int margin) {
  if (c.empty()) throw Error(ErrorKind::EmptyCorrespondences, "redetect_bbox: no correspondences");
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (const auto& m : c.matches) {
    const double x = std::floor(m.u2 + 0.5);
    const double y = std::floor(m.v2 + 0.5);
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  Mask mask(size);
  const int ix0 = static_cast<int>(std::max(0.0, x0 - margin));
  const int iy0 = static_cast<int>(std::max(0.0, y0 - margin));
  const int ix1 = static_cast<int>(std::min<double>(size.width - 1, x1 + margin));
  const int iy1 = static_cast<int>(std::min<double>(size.height - 1, y1 + margin));
  for (int y = iy0; y <= iy1; ++y) {
    for (int x = ix0; x <= ix1; ++x) mask.set(x, y);
  }
  return mask;
}

DemoToLive estimate_demo_to_live(const DepthImage& demo_depth, const Mask& demo_mask, const CameraIntrinsics& k,
                                 const LiveObservation& live, const CorrespondenceSet& correspondences,
                                 const RansacParams& params, int margin) {
  const CorrespondenceSet filtered = filter_by_mask(correspondences, demo_mask, demo_depth.size);
  if (filtered.empty()) {
    throw Error(ErrorKind::NoConsensus, "no correspondences could be established on the demonstration object");
  }
  std::vector<std::size_t> kept;
  const PointPairSet pairs = lift_correspondences(filtered, demo_depth, live.depth, k, &kept);
  if (pairs.size() < params.sample_size) {
    throw Error(ErrorKind::NoConsensus,
                fmt::format("only {} correspondences with valid depth on the demonstration object", pairs.size()));
  }
  const RegistrationResult r = fit_rigid_ransac(pairs, params);

  CorrespondenceSet inliers{filtered.source_frame, filtered.target_frame, {}};
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (r.inlier_mask[i]) inliers.matches.push_back(filtered.matches[kept[i]]);
  }
  DemoToLive out;
  out.pose = r.pose;
  out.redetection = redetect_bbox(inliers, live.depth.size, margin);
  out.filtered_matches = filtered.size();
  out.lifted_pairs = pairs.size();
  out.inliers = inliers.size();
  return out;
}

double mixing_weight(double t, std::size_t T, double sigma) {
  if (T < 2 || !(sigma > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "mixing_weight: need T >= 2 and sigma > 0");
  }
  const double width = sigma * static_cast<double>(T - 1);
  return std::exp(-(t * t) / (2.0 * width * width));
}

WarpedTrajectory warp_trajectory(std::span<const Pose> demo_steps, const Pose& t_obj,
                                 const std::optional<Pose>& t_goal, const WarpConfig& cfg) {
  cfg.validate();
  if (demo_steps.empty()) throw Error(ErrorKind::InvalidArgument, "warp_trajectory: empty demonstration");
  if (cfg.use_secondary && !t_goal) {
    throw Error(ErrorKind::MissingGoalPose, "warp_trajectory: secondary mixing requested without a goal pose");
  }
  if (!cfg.use_secondary && t_goal) {
    throw Error(ErrorKind::InvalidArgument, "warp_trajectory: goal pose given but secondary mixing is disabled");
  }
  WarpedTrajectory out;
  const std::size_t n = demo_steps.size();
  out.relative.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Pose object_branch = compose(demo_steps[k], t_obj);
    if (!t_goal) {
      out.relative.push_back(object_branch);
      continue;
    }
    const Pose goal_branch = compose(demo_steps[k], *t_goal);
    const double alpha = k == 0 ? 1.0 : mixing_weight(static_cast<double>(k), n, cfg.sigma);
    out.alpha.push_back(alpha);
    out.relative.push_back(slerp_pose(object_branch, goal_branch, alpha));
  }
  return out;
}

std::vector<Pose> accumulate_trajectory(const Pose& initial_object_pose, std::span<const Pose> warped) {
  if (warped.empty()) throw Error(ErrorKind::InvalidArgument, "accumulate_trajectory: no steps");
  std::vector<Pose> out;
  out.reserve(warped.size() + 1);
  out.push_back(initial_object_pose);
  for (const auto& step : warped) out.push_back(compose(step, out.back()));
  return out;
}

GraspSelection select_grasp(std::span<const GraspCandidate> grasps, const PointCloud& object_cloud_live,
                            const Point3& hand_anchor_live, double max_obj_dist) {
  if (grasps.empty()) throw Error(ErrorKind::EmptyInput, "select_grasp: no grasp candidates");
  std::vector<Point3> positions;
  positions.reserve(grasps.size());
  for (const auto& g : grasps) positions.push_back(g.pose.translation());
  std::vector<double> to_object(grasps.size(), std::numeric_limits<double>::infinity());
  if (!object_cloud_live.empty()) kernels::nearest_squared_distances(positions, object_cloud_live, to_object);

  const double limit_sq = max_obj_dist * max_obj_dist;
  std::optional<GraspSelection> best;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    if (!(to_object[i] <= limit_sq)) continue;
    const double d = (positions[i] - hand_anchor_live).norm();
    const bool better = !best || d < best->hand_distance ||
                        (d == best->hand_distance && grasps[i].score > best->grasp.score);
    if (better) best = GraspSelection{i, grasps[i], d};
  }
  if (!best) {
    throw Error(ErrorKind::NoGraspOnObject,
                fmt::format("none of {} grasps lies within {} m of the re-detected object", grasps.size(), max_obj_dist));
  }
  return *best;
}

Point3 transform_hand_anchor(const Point3& anchor, const Pose& object_canonical_pose, const Pose& t_obj) {
  return t_obj.apply(object_canonical_pose.apply(anchor));
}

PointCloud live_object_cloud(const LiveObservation& live, const Mask& redetection) {
  if (live.object_mask) {
    const Mask m = intersect(redetection, *live.object_mask);
    return lift_mask(live.depth, &m, live.intrinsics);
  }
  return lift_mask(live.depth, &redetection, live.intrinsics);
}

}  // namespace ditto
