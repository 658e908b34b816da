#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ditto/correspond.hpp"
#include "ditto/geom.hpp"
#include "ditto/image.hpp"

namespace ditto {

struct GraspCandidate {
  Pose pose;  // camera frame
  double score = 0.0;
};

struct FrameRecord {
  DepthImage depth;
  Mask object_mask;
  std::optional<Mask> secondary_mask;
  std::optional<Mask> hand_mask;
  bool discarded = false;
};

/// One recorded (or synthesized) episode held in memory.
///
/// On disk:
///   manifest.json       intrinsics, frames[], grasp_frame_index, file paths
///   frames/depth_NNN.bin, frames/mask_NNN.pgm, ...
///   frames/corr_NNN_MMM.json  correspondences from frame NNN to MMM
///   grasps.json         optional grasp candidates
///   ground_truth.json   optional synthetic sidecar (kept as raw JSON here)
struct EpisodeBundle {
  CameraIntrinsics intrinsics;
  std::vector<FrameRecord> frames;
  std::size_t grasp_frame_index = 0;
  std::map<std::pair<std::size_t, std::size_t>, CorrespondenceSet> correspondences;
  std::vector<GraspCandidate> grasps;
  std::optional<nlohmann::json> ground_truth;

  ImageSize image_size() const { return {intrinsics.width, intrinsics.height}; }
  /// Throws Malformed on inconsistent dimensions or indices.
  void validate() const;
};

void store_bundle(const EpisodeBundle& bundle, const std::filesystem::path& dir);
/// Missing manifest or bad content -> Malformed; unreadable files -> Io.
EpisodeBundle load_bundle(const std::filesystem::path& dir);

nlohmann::json grasps_to_json(const std::vector<GraspCandidate>& grasps);
std::vector<GraspCandidate> grasps_from_json(const nlohmann::json& j);

/// Correspondences stored in a bundle (the file-based RAFT/LoFTR boundary).
class BundleCorrespondences : public CorrespondenceSource {
 public:
  explicit BundleCorrespondences(const EpisodeBundle& bundle) : bundle_(&bundle) {}
  bool has(std::size_t src, std::size_t dst) const override;
  CorrespondenceSet get(std::size_t src, std::size_t dst) const override;
  std::string name() const override { return "file"; }

 private:
  const EpisodeBundle* bundle_;
};

/// Frame indices actually used for extraction: discarded frames removed,
/// then linearly subsampled to at most `max_frames` (first and last kept).
std::vector<std::size_t> select_frames(const EpisodeBundle& bundle, std::size_t max_frames);

}  // namespace ditto
