#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ditto/geom.hpp"
#include "ditto/image.hpp"
#include "ditto/registration.hpp"

namespace ditto {

struct Match {
  double u1 = 0.0, v1 = 0.0;  // source pixel
  double u2 = 0.0, v2 = 0.0;  // target pixel
  double confidence = 1.0;    // [0, 1]
  bool operator==(const Match&) const = default;
};

struct CorrespondenceSet {
  std::string source_frame;
  std::string target_frame;
  std::vector<Match> matches;

  std::size_t size() const { return matches.size(); }
  bool empty() const { return matches.empty(); }
  bool operator==(const CorrespondenceSet&) const = default;
};

/// Correspondence provider between two frames of a sequence (RAFT/LoFTR
/// files, or the synthetic oracle). Implementations must be safe to call
/// concurrently for distinct pairs.
class CorrespondenceSource {
 public:
  virtual ~CorrespondenceSource() = default;
  virtual bool has(std::size_t src_frame, std::size_t dst_frame) const = 0;
  virtual CorrespondenceSet get(std::size_t src_frame, std::size_t dst_frame) const = 0;
  virtual std::string name() const = 0;
};

/// Keeps matches whose round-half-up source pixel lies inside `mask`, in order.
/// With `source_size` the mask must have exactly those dimensions.
CorrespondenceSet filter_by_mask(const CorrespondenceSet& c, const Mask& mask,
                                 std::optional<ImageSize> source_size = std::nullopt);

/// Nearest-pixel depth lookup at both endpoints; matches with missing depth on
/// either side are dropped. Confidences become pair weights.
/// `kept`, when given, receives the match index of every output pair.
PointPairSet lift_correspondences(const CorrespondenceSet& c, const DepthImage& depth_src,
                                  const DepthImage& depth_dst, const CameraIntrinsics& k,
                                  std::vector<std::size_t>* kept = nullptr);

/// Points of `depth` under `mask` (all valid pixels when mask is null).
PointCloud lift_mask(const DepthImage& depth, const Mask* mask, const CameraIntrinsics& k);

/// Rounds to 6 fractional digits, the on-disk precision of pixel coordinates.
double quantize_coordinate(double x);

std::string serialize_correspondences(const CorrespondenceSet& c);
/// Throws Malformed with line/column (syntax) or match index (content).
CorrespondenceSet parse_correspondences(const std::string& text, const std::string& origin = "<memory>");

CorrespondenceSet load_correspondences(const std::filesystem::path& path);
void store_correspondences(const std::filesystem::path& path, const CorrespondenceSet& c);

}  // namespace ditto
