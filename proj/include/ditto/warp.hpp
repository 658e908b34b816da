#pragma once

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

#include "ditto/bundle.hpp"
#include "ditto/correspond.hpp"
#include "ditto/geom.hpp"
#include "ditto/registration.hpp"

namespace ditto {

/// Only the literal right-composition T_{t->t+1} * T_{demo->live} is supported.
enum class WarpConvention { RightCompose };

struct WarpConfig {
  double sigma = 0.5;  // mixing steepness
  WarpConvention convention = WarpConvention::RightCompose;
  bool use_secondary = false;
  int margin = 5;             // re-detection box dilation, pixels
  double max_obj_dist = 0.01;  // grasp-to-object distance filter, meters

  void validate() const;
};

/// Axis-aligned box over the target pixels of `c`, dilated by `margin` and
/// clipped to the image. Throws EmptyCorrespondences.
Mask redetect_bbox(const CorrespondenceSet& c, ImageSize size, int margin = 5);

struct LiveObservation {
  DepthImage depth;
  CameraIntrinsics intrinsics;
  std::optional<Mask> object_mask;
  std::optional<Mask> secondary_mask;
  std::vector<GraspCandidate> grasps;
};

struct DemoToLive {
  Pose pose;          // maps demo-frame object points onto the live scene
  Mask redetection;   // box around the inlier correspondences in the live image
  std::size_t filtered_matches = 0;
  std::size_t lifted_pairs = 0;
  std::size_t inliers = 0;
};

/// Mask-filter correspondences from the first demo frame to the live frame,
/// lift with both depth images, fit RANSAC. Throws NoConsensus when no usable
/// correspondences survive.
DemoToLive estimate_demo_to_live(const DepthImage& demo_depth, const Mask& demo_mask, const CameraIntrinsics& k,
                                 const LiveObservation& live, const CorrespondenceSet& correspondences,
                                 const RansacParams& params, int margin = 5);

/// exp(-t^2 / (2 (sigma (T-1))^2)): peak 1 at t = 0.
double mixing_weight(double t, std::size_t T, double sigma);

struct WarpedTrajectory {
  std::vector<Pose> relative;
  std::vector<double> alpha;  // empty without a goal branch
};

/// Object branch T_k * t_obj; with a goal pose, slerp-mixed against
/// T_k * t_goal with weight alpha(k) on the object branch.
/// Throws MissingGoalPose when cfg.use_secondary has no t_goal.
WarpedTrajectory warp_trajectory(std::span<const Pose> demo_steps, const Pose& t_obj,
                                 const std::optional<Pose>& t_goal, const WarpConfig& cfg);

/// pose[0] = initial; pose[k+1] = warped[k] * pose[k].
std::vector<Pose> accumulate_trajectory(const Pose& initial_object_pose, std::span<const Pose> warped);

struct GraspSelection {
  std::size_t index = 0;
  GraspCandidate grasp;
  double hand_distance = 0.0;
};

/// Drops grasps farther than max_obj_dist from the live object cloud, then
/// picks the one closest to the hand; ties prefer higher score, then lower
/// index. Throws NoGraspOnObject, EmptyInput.
GraspSelection select_grasp(std::span<const GraspCandidate> grasps, const PointCloud& object_cloud_live,
                            const Point3& hand_anchor_live, double max_obj_dist);

/// Canonical-frame hand anchor -> live camera frame.
Point3 transform_hand_anchor(const Point3& anchor, const Pose& object_canonical_pose, const Pose& t_obj);

/// Live object points: valid depth inside the re-detection box, intersected
/// with the live object mask when one is provided.
PointCloud live_object_cloud(const LiveObservation& live, const Mask& redetection);

}  // namespace ditto
