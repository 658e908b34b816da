#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "ditto/bundle.hpp"
#include "ditto/correspond.hpp"
#include "ditto/geom.hpp"
#include "ditto/synth.hpp"

namespace ditto {

/// Desk-scale synthetic episode: a manipulated object scripted along a smooth
/// SE(3) path, an optional static secondary object, and a hand patch at the
/// grasp frame. Bundles that share `layout_seed` share the scene layout and
/// base trajectory; the episode seed draws planted offsets and noise.
struct SyntheticEpisodeConfig {
  std::size_t frames = 11;
  ShapeSpec object{ShapeKind::Box, 0.10, 0.00035};
  double step_translation = 0.05;  // meters, object centre displacement per step
  double step_rotation = 0.15;     // radians per step, about the object centre
  bool secondary = true;
  ShapeSpec secondary_shape{ShapeKind::Box, 0.12, 0.0004};
  bool mix_secondary = true;  // ground truth follows the secondary-mixed warp
  double sigma = 0.5;
  double offset_scale = 0.0;  // planted demo->live translation offsets, per axis
  std::uint64_t layout_seed = 0;
  std::size_t grasp_frame_index = 0;
  bool hand = true;
  std::size_t grasp_candidates = 8;
  SyntheticNoiseParams noise{0.2, 0.2, 0.001, 0};
  CameraIntrinsics intrinsics{1200.0, 1200.0, 640.0, 480.0, 1280, 960};

  /// Throws ConfigInvalid.
  void validate() const;
};

nlohmann::json config_to_json(const SyntheticEpisodeConfig& cfg);
/// Missing keys keep their defaults; unknown keys are ConfigInvalid.
SyntheticEpisodeConfig config_from_json(const nlohmann::json& j);

inline constexpr int kObjectId = 0;
inline constexpr int kSecondaryId = 1;
inline constexpr int kHandId = 2;

struct SyntheticScene {
  SyntheticEpisodeConfig config;
  std::uint64_t seed = 0;
  PointCloud object_cloud;
  PointCloud secondary_cloud;
  PointCloud hand_cloud;
  std::vector<Pose> base_steps;      // layout-only trajectory (no offsets)
  std::vector<Pose> relative_poses;  // actual per-step motion of this episode
  std::vector<Pose> object_poses;    // object -> camera, per frame
  Pose object_offset;
  Pose secondary_offset;
  std::optional<Pose> secondary_pose;
  std::optional<Pose> hand_pose;

  std::vector<SceneObject> objects_at(std::size_t frame) const;
  RenderedFrame render(std::size_t frame) const;
};

/// Deterministic in (cfg, seed).
SyntheticScene build_scene(const SyntheticEpisodeConfig& cfg, std::uint64_t seed);

/// Parsed synthetic sidecar (ground_truth.json).
struct GroundTruth {
  SyntheticEpisodeConfig config;
  std::uint64_t seed = 0;
  std::vector<Pose> relative_poses;
  std::vector<Pose> object_poses;
  Pose total_motion;
  std::optional<Pose> secondary_pose;
  Pose object_offset;
  Pose secondary_offset;
  std::optional<Point3> hand_point_camera;
  std::optional<Point3> hand_anchor;
  Pose canonical_pose;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> planted_outliers;
  std::optional<std::size_t> expected_grasp;
};

GroundTruth ground_truth_from_json(const nlohmann::json& j);

/// Renders every frame, writes masks/depth/correspondences/grasps and the
/// ground-truth sidecar. Throws ConfigInvalid.
EpisodeBundle generate_synthetic_episode(const SyntheticEpisodeConfig& cfg, std::uint64_t seed);

/// Re-derives correspondences for any frame pair of a synthetic episode;
/// consecutive pairs reproduce the stored files exactly.
class SyntheticOracle : public CorrespondenceSource {
 public:
  explicit SyntheticOracle(SyntheticScene scene) : scene_(std::move(scene)) {}
  bool has(std::size_t src, std::size_t dst) const override;
  CorrespondenceSet get(std::size_t src, std::size_t dst) const override;
  std::string name() const override { return "synthetic-oracle"; }
  const SyntheticScene& scene() const { return scene_; }

 private:
  SyntheticScene scene_;
};

/// Oracle correspondences between a frame of one synthetic episode and a
/// frame of another built on the same layout (demo -> live).
CorrespondenceSet oracle_cross_correspondences(const SyntheticScene& demo, std::size_t demo_frame,
                                               const SyntheticScene& live, std::size_t live_frame);

/// Scene of a bundle with a synthetic sidecar; nullopt otherwise.
std::optional<SyntheticScene> scene_of(const EpisodeBundle& bundle);

std::uint64_t pair_seed(std::uint64_t episode_seed, std::size_t src, std::size_t dst);

}  // namespace ditto
