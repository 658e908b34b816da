#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "ditto/kernels.hpp"

namespace ditto::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kBruteForceBelow = 32;
constexpr int kMaxDim = (1 << 20) - 1;

}  // namespace

NearestGrid::NearestGrid(std::span<const Point3> cloud) : points_(cloud.begin(), cloud.end()) {
  if (points_.size() < kBruteForceBelow) return;
  Point3 lo = points_.front();
  Point3 hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Point3 extent = hi - lo;
  const double longest = extent.maxCoeff();
  if (!(longest > 0.0) || !std::isfinite(longest)) return;

  const double per_axis = std::ceil(std::cbrt(static_cast<double>(points_.size()) / 2.0));
  cell_ = longest / std::max(per_axis, 1.0);
  origin_ = lo;
  for (int a = 0; a < 3; ++a) {
    const double d = std::floor(extent[a] / cell_) + 1.0;
    if (d > kMaxDim) return;
    dims_[a] = static_cast<int>(d);
  }
  use_grid_ = true;
  cells_.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Eigen::Array3i c = cell_of(points_[i]).max(0).min(dims_ - 1);
    cells_[key(c.x(), c.y(), c.z())].push_back(static_cast<std::uint32_t>(i));
  }
}

NearestGrid::Key NearestGrid::key(std::int64_t x, std::int64_t y, std::int64_t z) const {
  return (static_cast<Key>(x) << 42) | (static_cast<Key>(y) << 21) | static_cast<Key>(z);
}

Eigen::Array3i NearestGrid::cell_of(const Point3& p) const {
  Eigen::Array3i c;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - origin_[a]) / cell_);
    c[a] = static_cast<int>(std::clamp(f, -2.0 * kMaxDim, 2.0 * kMaxDim));
  }
  return c;
}

double NearestGrid::brute_force(const Point3& q) const {
  double best = kInf;
  for (const auto& p : points_) best = std::min(best, squared_distance(q, p));
  return best;
}

double NearestGrid::nearest_squared(const Point3& q) const {
  if (!use_grid_) return brute_force(q);

  const Eigen::Array3i cq = cell_of(q);
  int r_min = 0;
  int r_max = 0;
  for (int a = 0; a < 3; ++a) {
    r_min = std::max({r_min, -cq[a], cq[a] - (dims_[a] - 1)});
    r_max = std::max({r_max, std::abs(cq[a]), std::abs(cq[a] - (dims_[a] - 1))});
  }
  // Far-away queries would walk many empty shells.
  if (r_min > 64) return brute_force(q);

  double best = kInf;
  for (int r = r_min; r <= r_max; ++r) {
    const int x0 = std::max(cq.x() - r, 0), x1 = std::min(cq.x() + r, dims_.x() - 1);
    const int y0 = std::max(cq.y() - r, 0), y1 = std::min(cq.y() + r, dims_.y() - 1);
    const int z0 = std::max(cq.z() - r, 0), z1 = std::min(cq.z() + r, dims_.z() - 1);
    for (int x = x0; x <= x1; ++x) {
      for (int y = y0; y <= y1; ++y) {
        for (int z = z0; z <= z1; ++z) {
          const int cheb = std::max({std::abs(x - cq.x()), std::abs(y - cq.y()), std::abs(z - cq.z())});
          if (cheb != r) continue;
          const auto it = cells_.find(key(x, y, z));
          if (it == cells_.end()) continue;
          for (std::uint32_t i : it->second) best = std::min(best, squared_distance(q, points_[i]));
        }
      }
    }
    // Cells beyond Chebyshev ring r are at least r cells away; keep a slack
    // against floor() misassigning points that sit on a cell boundary.
    const double bound = (static_cast<double>(r) - 1e-6) * cell_;
    if (r >= 1 && best <= bound * bound) break;
  }
  return best;
}

void nearest_squared_distances(std::span<const Point3> queries, std::span<const Point3> cloud,
                               std::span<double> out) {
  const NearestGrid grid(cloud);
  const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) out[i] = grid.nearest_squared(queries[i]);
}

double min_squared_distance(std::span<const Point3> a, std::span<const Point3> b) {
  // Grid over the larger cloud, queries from the smaller one.
  if (a.size() > b.size()) std::swap(a, b);
  const NearestGrid grid(b);
  const auto n = static_cast<std::int64_t>(a.size());
  double best = kInf;
#pragma omp parallel for schedule(dynamic, 64) reduction(min : best)
  for (std::int64_t i = 0; i < n; ++i) best = std::min(best, grid.nearest_squared(a[i]));
  return best;
}

namespace serial {

void nearest_squared_distances(std::span<const Point3> queries, std::span<const Point3> cloud,
                               std::span<double> out) {
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double best = kInf;
    for (const auto& p : cloud) best = std::min(best, squared_distance(queries[i], p));
    out[i] = best;
  }
}

double min_squared_distance(std::span<const Point3> a, std::span<const Point3> b) {
  double best = kInf;
  for (const auto& p : a) {
    for (const auto& q : b) best = std::min(best, squared_distance(p, q));
  }
  return best;
}

}  // namespace serial
}  // namespace ditto::kernels
