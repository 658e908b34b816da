#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ditto/geom.hpp"

namespace ditto {

/// Matched 3D points; `weights` is empty for uniform weighting.
struct PointPairSet {
  std::vector<Point3> src;
  std::vector<Point3> dst;
  std::vector<double> weights;

  std::size_t size() const { return src.size(); }
  void add(const Point3& s, const Point3& d) {
    src.push_back(s);
    dst.push_back(d);
  }
  void add(const Point3& s, const Point3& d, double w) {
    add(s, d);
    weights.push_back(w);
  }
  /// Throws InvalidArgument on count mismatch, negative weights, or fewer
  /// than three strictly positive weights.
  void validate() const;
};

struct RansacParams {
  std::size_t max_iterations = 1000;
  double inlier_threshold = 0.01;
  std::size_t sample_size = 3;
  /// Unset: max(6, ceil(0.2 n)) clamped to [sample_size, n].
  std::optional<std::size_t> min_inliers;
  std::uint64_t seed = 0;
  /// Stop once the best hypothesis explains this fraction of the pairs.
  double early_exit_ratio = 0.99;

  void validate() const;
  std::size_t resolved_min_inliers(std::size_t pair_count) const;
};

struct RegistrationResult {
  Pose pose;  // maps src onto dst
  std::vector<bool> inlier_mask;
  double rms_inlier_error = 0.0;
  std::size_t iterations = 0;

  std::size_t inlier_count() const;
};

/// Weighted least-squares rigid fit (centroids + SVD of the cross-covariance,
/// reflection-corrected). Throws DegenerateConfiguration for < 3 pairs or
/// collinear / coincident source points.
Pose fit_rigid_svd(const PointPairSet& pairs);

/// Seeded RANSAC over minimal samples, refit on the best consensus set.
/// Identical output for identical (pairs, params), regardless of thread count.
RegistrationResult fit_rigid_ransac(const PointPairSet& pairs, const RansacParams& params);

/// Single-threaded reference of fit_rigid_ransac; same contract and output.
RegistrationResult fit_rigid_ransac_serial(const PointPairSet& pairs, const RansacParams& params);

/// Weighted sum of squared residuals |R src + t - dst|^2.
double rigid_objective(const PointPairSet& pairs, const Pose& pose);

}  // namespace ditto
