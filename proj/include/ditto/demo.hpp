#pragma once

#include <json.hpp>

#include <optional>
#include <vector>

#include "ditto/bundle.hpp"
#include "ditto/correspond.hpp"
#include "ditto/geom.hpp"
#include "ditto/registration.hpp"

namespace ditto {

/// The frames of a bundle used for extraction (indices into bundle.frames).
struct DemoSequence {
  const EpisodeBundle* bundle = nullptr;
  std::vector<std::size_t> frames;
  std::size_t grasp_frame = 0;  // bundle frame index, always one of `frames`

  std::size_t length() const { return frames.size(); }
};

/// Drops discarded frames, subsamples to `max_frames` with linear spacing and
/// snaps the grasp frame to the nearest kept frame.
DemoSequence make_demo_sequence(const EpisodeBundle& bundle, std::size_t max_frames = 11);

struct StepStats {
  std::size_t source_frame = 0;
  std::size_t target_frame = 0;
  std::size_t pairs = 0;    // lifted 3D pairs fed to RANSAC
  std::size_t inliers = 0;
  double inlier_rate = 0.0;  // inliers / pairs
  double rms = 0.0;
};

struct DemoTrajectory {
  std::vector<Pose> relative_poses;  // camera frame, T_{t -> t+1}
  std::optional<Point3> hand_anchor;  // canonical object frame
  Pose object_canonical_pose;         // at the grasp frame
  std::vector<StepStats> steps;
  std::vector<std::size_t> frames;
  std::size_t grasp_frame = 0;
};

/// Pairwise mask-filtered, lifted, RANSAC-fitted relative poses for every
/// consecutive pair of the sequence. Steps run concurrently; failures surface
/// as StepFailed for the lowest failing step.
DemoTrajectory extract_trajectory(const DemoSequence& seq, const CorrespondenceSource& source,
                                  const RansacParams& params);

/// Identity rotation at the centroid of the mask-lifted cloud.
Pose canonical_object_pose(const DepthImage& depth, const Mask& mask, const CameraIntrinsics& k);

/// Hand-mask centroid lifted with the grasp-frame depth, expressed in the
/// canonical object frame.
Point3 extract_hand_anchor(const DemoSequence& seq, const Mask& hand_mask, const DemoTrajectory& traj);

/// Index of the candidate cloud with the smallest closest-point distance to
/// `object_cloud`; lowest index on ties.
std::size_t select_secondary_mask(const PointCloud& object_cloud, const std::vector<PointCloud>& candidates);

nlohmann::json demo_trajectory_to_json(const DemoTrajectory& traj);
DemoTrajectory demo_trajectory_from_json(const nlohmann::json& j);

}  // namespace ditto
