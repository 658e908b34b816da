#include "ditto/registration.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "ditto/error.hpp"
#include "ditto/kernels.hpp"
#include "ditto/rng.hpp"

namespace ditto {

void PointPairSet::validate() const {
  if (src.size() != dst.size()) {
    throw Error(ErrorKind::InvalidArgument, "PointPairSet: src/dst count mismatch");
  }
  if (weights.empty()) return;
  if (weights.size() != src.size()) {
    throw Error(ErrorKind::InvalidArgument, "PointPairSet: weight count mismatch");
  }
  std::size_t positive = 0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorKind::InvalidArgument, "PointPairSet: weights must be finite and >= 0");
    }
    if (w > 0.0) ++positive;
  }
  if (positive < 3) {
    throw Error(ErrorKind::DegenerateConfiguration,
                "PointPairSet: fewer than 3 strictly positive weights");
  }
}

void RansacParams::validate() const {
  if (sample_size < 3 || !(inlier_threshold > 0.0) || max_iterations < 1) {
    throw Error(ErrorKind::InvalidArgument,
                "RansacParams: need sample_size >= 3, inlier_threshold > 0, max_iterations >= 1");
  }
}

std::size_t RansacParams::resolved_min_inliers(std::size_t n) const {
  if (min_inliers) return *min_inliers;
  const auto fifth = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n)));
  return std::clamp(std::max<std::size_t>(6, fifth), sample_size, std::max(n, sample_size));
}

std::size_t RegistrationResult::inlier_count() const {
  return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

double rigid_objective(const PointPairSet& pairs, const Pose& pose) {
  const Eigen::Matrix3d r = pose.rotation_matrix();
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = pairs.weights.empty() ? 1.0 : pairs.weights[i];
    sum += w * (r * pairs.src[i] + pose.translation() - pairs.dst[i]).squaredNorm();
  }
  return sum;
}

namespace {

struct RigidFit {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d translation;
};

// Weighted Kabsch/Arun fit. `index` selects a subset (empty = all pairs).
// Returns nullopt for degenerate input instead of throwing; RANSAC uses it
// in the hot loop.
std::optional<RigidFit> try_fit(const PointPairSet& pairs, std::span<const std::size_t> index) {
  const std::size_t n = index.empty() ? pairs.size() : index.size();
  if (n < 3) return std::nullopt;
  auto at = [&](std::size_t k) { return index.empty() ? k : index[k]; };
  auto weight = [&](std::size_t i) { return pairs.weights.empty() ? 1.0 : pairs.weights[i]; };

  double wsum = 0.0;
  Eigen::Vector3d cs = Eigen::Vector3d::Zero();
  Eigen::Vector3d cd = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = at(k);
    const double w = weight(i);
    wsum += w;
    cs += w * pairs.src[i];
    cd += w * pairs.dst[i];
  }
  if (!(wsum > 0.0)) return std::nullopt;
  cs /= wsum;
  cd /= wsum;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = at(k);
    const double w = weight(i);
    const Eigen::Vector3d s = pairs.src[i] - cs;
    cross += w * s * (pairs.dst[i] - cd).transpose();
    scatter += w * s * s.transpose();
  }

  // Collinear or coincident sources leave a free rotation about the line.
  const Eigen::Vector3d spread = Eigen::JacobiSVD<Eigen::Matrix3d>(scatter).singularValues();
  if (!(spread[0] > 0.0) || spread[1] < 1e-12 * spread[0]) return std::nullopt;

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidFit fit;
  fit.rotation = v * d * u.transpose();
  fit.translation = cd - fit.rotation * cs;
  return fit;
}

Pose to_pose(const RigidFit& f) { return {f.rotation, f.translation}; }

void check_input(const PointPairSet& pairs, const RansacParams& params) {
  params.validate();
  pairs.validate();
  if (pairs.size() < params.sample_size) {
    throw Error(ErrorKind::InvalidArgument,
                "fit_rigid_ransac: " + std::to_string(pairs.size()) + " pairs < sample_size " +
                    std::to_string(params.sample_size));
  }
}

// Distinct indices for iteration `it`; each iteration owns a counter-derived
// stream so hypotheses can be drawn in any order or in parallel.
void draw_sample(std::uint64_t seed, std::size_t it, std::size_t n, std::size_t k,
                 std::vector<std::size_t>& out) {
  Rng rng(mix_seed(seed, it));
  out.clear();
  while (out.size() < k) {
    const auto c = static_cast<std::size_t>(rng.index(n));
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
}

kernels::RigidHypothesis hypothesize(const PointPairSet& pairs, std::uint64_t seed, std::size_t it,
                                     std::size_t sample_size) {
  std::vector<std::size_t> sample;
  draw_sample(seed, it, pairs.size(), sample_size, sample);
  kernels::RigidHypothesis h;
  if (auto fit = try_fit(pairs, sample)) {
    h.rotation = fit->rotation;
    h.translation = fit->translation;
    h.valid = true;
  }
  return h;
}

struct Consensus {
  std::int64_t best_count = -1;
  std::size_t best_iteration = 0;
  std::size_t iterations = 0;
  kernels::RigidHypothesis best;
};

RegistrationResult finish(const PointPairSet& pairs, const RansacParams& params,
                          const Consensus& consensus) {
  const std::size_t n = pairs.size();
  const std::size_t need = params.resolved_min_inliers(n);
  if (consensus.best_count < 0 || static_cast<std::size_t>(consensus.best_count) < need) {
    throw Error(ErrorKind::NoConsensus,
                "RANSAC: best consensus " + std::to_string(std::max<std::int64_t>(consensus.best_count, 0)) +
                    " < required " + std::to_string(need) + " of " + std::to_string(n) + " pairs");
  }

  const double thr_sq = params.inlier_threshold * params.inlier_threshold;
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 r = consensus.best.rotation * pairs.src[i] + consensus.best.translation - pairs.dst[i];
    if (r.squaredNorm() < thr_sq) support.push_back(i);
  }
  const auto refit = try_fit(pairs, support);
  if (!refit) {
    throw Error(ErrorKind::DegenerateConfiguration, "RANSAC refit: consensus set is degenerate");
  }

  RegistrationResult result;
  result.pose = to_pose(*refit);
  result.iterations = consensus.iterations;
  result.inlier_mask.assign(n, false);
  const Eigen::Matrix3d rot = result.pose.rotation_matrix();
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (rot * pairs.src[i] + result.pose.translation() - pairs.dst[i]).squaredNorm();
    if (e < thr_sq) {
      result.inlier_mask[i] = true;
      sq += e;
      ++count;
    }
  }
  if (count < need) {
    throw Error(ErrorKind::NoConsensus, "RANSAC: refit pose keeps only " + std::to_string(count) +
                                            " inliers, need " + std::to_string(need));
  }
  result.rms_inlier_error = std::sqrt(sq / static_cast<double>(count));
  return result;
}

bool reached_early_exit(const Consensus& c, const RansacParams& params, std::size_t n) {
  return c.best_count >= 0 &&
         static_cast<double>(c.best_count) >= params.early_exit_ratio * static_cast<double>(n);
}

constexpr std::size_t kBlock = 64;

}  // namespace

Pose fit_rigid_svd(const PointPairSet& pairs) {
  pairs.validate();
  if (pairs.size() < 3) {
    throw Error(ErrorKind::DegenerateConfiguration, "fit_rigid_svd: need at least 3 pairs");
  }
  const auto fit = try_fit(pairs, {});
  if (!fit) {
    throw Error(ErrorKind::DegenerateConfiguration,
                "fit_rigid_svd: source points are collinear or coincident");
  }
  return to_pose(*fit);
}

RegistrationResult fit_rigid_ransac_serial(const PointPairSet& pairs, const RansacParams& params) {
  check_input(pairs, params);
  const std::size_t n = pairs.size();
  Consensus c;
  for (std::size_t it = 0; it < params.max_iterations; ++it) {
    const auto h = hypothesize(pairs, params.seed, it, params.sample_size);
    std::int64_t count = 0;
    kernels::serial::count_inliers(std::span(&h, 1), pairs.src, pairs.dst, params.inlier_threshold,
                                   std::span(&count, 1));
    c.iterations = it + 1;
    if (count > c.best_count) {
      c.best_count = count;
      c.best_iteration = it;
      c.best = h;
    }
    if (reached_early_exit(c, params, n)) break;
  }
  return finish(pairs, params, c);
}

RegistrationResult fit_rigid_ransac(const PointPairSet& pairs, const RansacParams& params) {
  check_input(pairs, params);
  const std::size_t n = pairs.size();
  Consensus c;
  std::vector<kernels::RigidHypothesis> hyps;
  std::vector<std::int64_t> counts;
  for (std::size_t start = 0; start < params.max_iterations; start += kBlock) {
    const std::size_t len = std::min(kBlock, params.max_iterations - start);
    hyps.assign(len, {});
    counts.assign(len, -1);
    const auto slen = static_cast<std::int64_t>(len);
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < slen; ++j) {
      hyps[j] = hypothesize(pairs, params.seed, start + static_cast<std::size_t>(j), params.sample_size);
    }
    kernels::count_inliers(hyps, pairs.src, pairs.dst, params.inlier_threshold, counts);
    // Ordered reduction reproduces the sequential scan, including early exit.
    bool stop = false;
    for (std::size_t j = 0; j < len; ++j) {
      c.iterations = start + j + 1;
      if (counts[j] > c.best_count) {
        c.best_count = counts[j];
        c.best_iteration = start + j;
        c.best = hyps[j];
      }
      if (reached_early_exit(c, params, n)) {
        stop = true;
        break;
      }
    }
    if (stop) break;
  }
  return finish(pairs, params, c);
}

}  // namespace ditto
