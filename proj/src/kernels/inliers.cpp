#include <cstdint>

#include "ditto/error.hpp"
#include "ditto/kernels.hpp"

namespace ditto::kernels {

namespace {

std::int64_t count_one(const RigidHypothesis& h, std::span<const Point3> src,
                       std::span<const Point3> dst, double threshold_sq) {
  if (!h.valid) return -1;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Point3 r = h.rotation * src[i] + h.translation - dst[i];
    if (r.squaredNorm() < threshold_sq) ++n;
  }
  return n;
}

void check_sizes(std::span<const RigidHypothesis> hypotheses, std::span<const Point3> src,
                 std::span<const Point3> dst, std::span<std::int64_t> counts) {
  if (src.size() != dst.size() || hypotheses.size() != counts.size()) {
    throw Error(ErrorKind::DimensionMismatch, "count_inliers: size mismatch");
  }
}

}  // namespace

void count_inliers(std::span<const RigidHypothesis> hypotheses, std::span<const Point3> src,
                   std::span<const Point3> dst, double threshold, std::span<std::int64_t> counts) {
  check_sizes(hypotheses, src, dst, counts);
  const double threshold_sq = threshold * threshold;
  const auto n = static_cast<std::int64_t>(hypotheses.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t h = 0; h < n; ++h) {
    counts[h] = count_one(hypotheses[h], src, dst, threshold_sq);
  }
}

namespace serial {

void count_inliers(std::span<const RigidHypothesis> hypotheses, std::span<const Point3> src,
                   std::span<const Point3> dst, double threshold, std::span<std::int64_t> counts) {
  check_sizes(hypotheses, src, dst, counts);
  const double threshold_sq = threshold * threshold;
  for (std::size_t h = 0; h < hypotheses.size(); ++h) {
    counts[h] = count_one(hypotheses[h], src, dst, threshold_sq);
  }
}

}  // namespace serial
}  // namespace ditto::kernels
