#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ditto/correspond.hpp"
#include "ditto/geom.hpp"
#include "ditto/image.hpp"

namespace ditto {

enum class ShapeKind { Box, Cylinder, Blob, Disk };

const char* to_string(ShapeKind kind);
ShapeKind shape_from_string(const std::string& name);

/// Analytic surface, centred on the object-frame origin. `size` is the
/// longest extent in meters; `spacing` the surface sampling pitch.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Box;
  double size = 0.1;
  double spacing = 0.0015;
};

/// Regular surface sampling of the shape (deterministic, no RNG).
PointCloud sample_surface(const ShapeSpec& shape);

struct SceneObject {
  int id = 0;
  const PointCloud* cloud = nullptr;  // object frame
  Pose pose;                          // object -> camera
};

/// Point-splat z-buffer render. Every pixel stores the depth of exactly one
/// surface point (its owner): among the front-surface points of the nearest
/// object, the one projecting closest to the pixel centre. Lifting a match at
/// the owner's projection returns the point itself.
struct RenderedFrame {
  DepthImage depth;
  std::vector<std::int32_t> owner_object;  // -1 = empty
  std::vector<std::int32_t> owner_point;

  Mask mask(int object_id) const;
  bool owns(int object_id, std::int32_t point, const PixelIndex& p) const {
    const std::size_t i = static_cast<std::size_t>(p.y) * depth.size.width + p.x;
    return owner_object[i] == object_id && owner_point[i] == point;
  }
};

RenderedFrame render_scene(std::span<const SceneObject> objects, const CameraIntrinsics& k);

/// Adds N(0, sigma) to every nonzero depth pixel.
void add_depth_noise(DepthImage& depth, double sigma, std::uint64_t seed);

struct SyntheticNoiseParams {
  double pixel_sigma = 0.0;
  double outlier_fraction = 0.0;
  double depth_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticMatches {
  CorrespondenceSet set;
  std::vector<bool> planted_outlier;  // parallel to set.matches
};

/// Matches every point of the listed objects visible in both renders:
/// exact projections, Gaussian noise on the target pixel, then exactly
/// floor(outlier_fraction * N) targets replaced by uniform in-image pixels.
/// Coordinates are quantized to the on-disk precision.
SyntheticMatches match_rendered(std::span<const SceneObject> scene_a, const RenderedFrame& render_a,
                                std::span<const SceneObject> scene_b, const RenderedFrame& render_b,
                                std::span<const int> object_ids, const CameraIntrinsics& k,
                                const SyntheticNoiseParams& noise);

struct SyntheticPair {
  CorrespondenceSet correspondences;
  DepthImage depth_src;
  DepthImage depth_dst;
  Mask mask_src;
  Mask mask_dst;
  std::vector<bool> planted_outlier;
};

/// Single object: `cloud` (camera frame) before and after `motion`.
/// Throws EmptyCloud, BehindCamera.
SyntheticPair synthesize_correspondences(const PointCloud& cloud, const Pose& motion,
                                         const CameraIntrinsics& k, const SyntheticNoiseParams& noise);

}  // namespace ditto
