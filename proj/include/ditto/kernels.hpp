#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation and a
// serial reference in `ditto::kernels::serial` with identical results; the
// tests compare them and bench/ times them against each other.

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "ditto/geom.hpp"

namespace ditto::kernels {

struct RigidHypothesis {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  bool valid = false;
};

/// counts[h] = #{i : |R_h src_i + t_h - dst_i| < threshold}, or -1 for invalid h.
void count_inliers(std::span<const RigidHypothesis> hypotheses, std::span<const Point3> src,
                   std::span<const Point3> dst, double threshold, std::span<std::int64_t> counts);

/// Exact nearest-neighbour squared distances through a uniform hash grid.
class NearestGrid {
 public:
  explicit NearestGrid(std::span<const Point3> cloud);

  /// Squared distance from q to its nearest cloud point (+inf for an empty cloud).
  double nearest_squared(const Point3& q) const;

  std::size_t size() const { return points_.size(); }

 private:
  using Key = std::uint64_t;
  Key key(std::int64_t x, std::int64_t y, std::int64_t z) const;
  Eigen::Array3i cell_of(const Point3& p) const;
  double brute_force(const Point3& q) const;

  std::vector<Point3> points_;
  Point3 origin_ = Point3::Zero();
  double cell_ = 1.0;
  Eigen::Array3i dims_ = Eigen::Array3i::Zero();
  bool use_grid_ = false;
  std::unordered_map<Key, std::vector<std::uint32_t>> cells_;
};

/// out[i] = squared distance from queries[i] to the nearest cloud point.
void nearest_squared_distances(std::span<const Point3> queries, std::span<const Point3> cloud,
                               std::span<double> out);

/// min over (a, b) pairs of the squared distance.
double min_squared_distance(std::span<const Point3> a, std::span<const Point3> b);

namespace serial {

void count_inliers(std::span<const RigidHypothesis> hypotheses, std::span<const Point3> src,
                   std::span<const Point3> dst, double threshold, std::span<std::int64_t> counts);

void nearest_squared_distances(std::span<const Point3> queries, std::span<const Point3> cloud,
                               std::span<double> out);

double min_squared_distance(std::span<const Point3> a, std::span<const Point3> b);

}  // namespace serial

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace ditto::kernels
