#include "ditto/demo.hpp"

#include <fmt/format.h>

#include <cmath>
#include <exception>
#include <limits>

#include "ditto/error.hpp"
#include "ditto/json_io.hpp"
#include "ditto/kernels.hpp"
#include "ditto/rng.hpp"

namespace ditto {

using nlohmann::json;

DemoSequence make_demo_sequence(const EpisodeBundle& bundle, std::size_t max_frames) {
  DemoSequence seq;
  seq.bundle = &bundle;
  seq.frames = select_frames(bundle, max_frames);
  if (seq.frames.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "demonstration needs at least 2 usable frames");
  }
  std::size_t best = seq.frames.front();
  for (std::size_t f : seq.frames) {
    const auto d = [&](std::size_t x) { return x > bundle.grasp_frame_index ? x - bundle.grasp_frame_index
                                                                               : bundle.grasp_frame_index - x; };
    if (d(f) < d(best)) best = f;
  }
  seq.grasp_frame = best;
  return seq;
}

Pose canonical_object_pose(const DepthImage& depth, const Mask& mask, const CameraIntrinsics& k) {
  const PointCloud cloud = lift_mask(depth, &mask, k);
  if (cloud.empty()) throw Error(ErrorKind::EmptyMask, "object mask has no pixels with valid depth");
  return Pose::from_translation(centroid(cloud));
}

DemoTrajectory extract_trajectory(const DemoSequence& seq, const CorrespondenceSource& source,
                                  const RansacParams& params) {
  if (!seq.bundle || seq.frames.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "extract_trajectory: sequence needs at least 2 frames");
  }
  params.validate();
  const EpisodeBundle& b = *seq.bundle;
  const std::size_t steps = seq.frames.size() - 1;

  DemoTrajectory traj;
  traj.frames = seq.frames;
  traj.grasp_frame = seq.grasp_frame;
  traj.relative_poses.resize(steps);
  traj.steps.resize(steps);
  std::vector<std::exception_ptr> failures(steps);

  const auto n = static_cast<std::int64_t>(steps);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t s = 0; s < n; ++s) {
    const std::size_t a = seq.frames[s];
    const std::size_t c = seq.frames[s + 1];
    try {
      try {
        if (!source.has(a, c)) {
          throw Error(ErrorKind::Malformed,
                      fmt::format("no correspondences from frame {} to frame {}{}", a, c,
                                  c > a + 1 ? " (gap across discarded frames has no bridge file)" : ""));
        }
        const CorrespondenceSet filtered = filter_by_mask(source.get(a, c), b.frames[a].object_mask, b.image_size());
        const PointPairSet pairs = lift_correspondences(filtered, b.frames[a].depth, b.frames[c].depth, b.intrinsics);
        if (pairs.size() < params.sample_size) {
          throw Error(ErrorKind::NoConsensus,
                      fmt::format("only {} lifted correspondences on the object mask", pairs.size()));
        }
        RansacParams step_params = params;
        step_params.seed = mix_seed(params.seed, static_cast<std::uint64_t>(s));
        const RegistrationResult r = fit_rigid_ransac(pairs, step_params);
        traj.relative_poses[s] = r.pose;
        StepStats& st = traj.steps[s];
        st.source_frame = a;
        st.target_frame = c;
        st.pairs = pairs.size();
        st.inliers = r.inlier_count();
        st.inlier_rate = static_cast<double>(st.inliers) / static_cast<double>(st.pairs);
        st.rms = r.rms_inlier_error;
      } catch (const Error& e) {
        throw Error::step_failed(static_cast<std::size_t>(s), e);
      }
    } catch (...) {
      failures[s] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  const FrameRecord& grasp = b.frames[seq.grasp_frame];
  traj.object_canonical_pose = canonical_object_pose(grasp.depth, grasp.object_mask, b.intrinsics);
  return traj;
}

Point3 extract_hand_anchor(const DemoSequence& seq, const Mask& hand_mask, const DemoTrajectory& traj) {
  const EpisodeBundle& b = *seq.bundle;
  const DepthImage& depth = b.frames[seq.grasp_frame].depth;
  if (hand_mask.size != depth.size) throw Error(ErrorKind::DimensionMismatch, "hand mask does not match the frame");
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < hand_mask.size.height; ++y) {
    for (int x = 0; x < hand_mask.size.width; ++x) {
      if (!hand_mask.at(x, y)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::EmptyMask, "hand mask is empty at the grasp frame");
  const auto center = nearest_pixel(sx / static_cast<double>(n), sy / static_cast<double>(n), depth.size);
  int px = center->x, py = center->y;
  if (!is_valid_depth(depth.at(px, py))) {
    // Nearest in-mask pixel with usable depth; first in row-major order on ties.
    long best = std::numeric_limits<long>::max();
    bool found = false;
    for (int y = 0; y < hand_mask.size.height; ++y) {
      for (int x = 0; x < hand_mask.size.width; ++x) {
        if (!hand_mask.at(x, y) || !is_valid_depth(depth.at(x, y))) continue;
        const long d = static_cast<long>(x - center->x) * (x - center->x) + static_cast<long>(y - center->y) * (y - center->y);
        if (d < best) {
          best = d;
          px = x;
          py = y;
          found = true;
        }
      }
    }
    if (!found) throw Error(ErrorKind::InvalidDepth, "no valid depth inside the hand mask");
  }
  const Point3 hand_camera = backproject(px, py, depth.at(px, py), b.intrinsics);
  return inverse(traj.object_canonical_pose).apply(hand_camera);
}

std::size_t select_secondary_mask(const PointCloud& object_cloud, const std::vector<PointCloud>& candidates) {
  if (object_cloud.empty() || candidates.empty()) {
    throw Error(ErrorKind::EmptyInput, "select_secondary_mask: empty object cloud or candidate list");
  }
  const kernels::NearestGrid grid(object_cloud);
  std::size_t best_index = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const PointCloud& cand = candidates[c];
    if (cand.empty()) throw Error(ErrorKind::EmptyInput, fmt::format("candidate {} is empty", c));
    double d = std::numeric_limits<double>::infinity();
    const auto m = static_cast<std::int64_t>(cand.size());
#pragma omp parallel for schedule(dynamic, 64) reduction(min : d)
    for (std::int64_t i = 0; i < m; ++i) d = std::min(d, grid.nearest_squared(cand[i]));
    if (d < best) {
      best = d;
      best_index = c;
    }
  }
  return best_index;
}

json demo_trajectory_to_json(const DemoTrajectory& traj) {
  json rel = json::array();
  for (const auto& p : traj.relative_poses) rel.push_back(pose_to_json(p));
  json steps = json::array();
  for (const auto& s : traj.steps) {
    steps.push_back({{"source", s.source_frame}, {"target", s.target_frame}, {"pairs", s.pairs},
                     {"inliers", s.inliers}, {"inlier_rate", s.inlier_rate}, {"rms", s.rms}});
  }
  json out;
  out["relative"] = rel;
  out["hand_anchor"] = traj.hand_anchor ? point_to_json(*traj.hand_anchor) : json(nullptr);
  out["canonical_pose"] = pose_to_json(traj.object_canonical_pose);
  out["frames"] = traj.frames;
  out["grasp_frame"] = traj.grasp_frame;
  out["steps"] = steps;
  return out;
}

DemoTrajectory demo_trajectory_from_json(const json& j) {
  const std::string where = "demo trajectory";
  DemoTrajectory t;
  const json& rel = require(j, "relative", where);
  if (!rel.is_array() || rel.empty()) throw Error(ErrorKind::Malformed, where + ": \"relative\" must be a non-empty array");
  for (std::size_t i = 0; i < rel.size(); ++i) t.relative_poses.push_back(pose_from_json(rel[i], fmt::format("relative[{}]", i)));
  const json& anchor = require(j, "hand_anchor", where);
  if (!anchor.is_null()) t.hand_anchor = point_from_json(anchor, "hand_anchor");
  t.object_canonical_pose = pose_from_json(require(j, "canonical_pose", where), "canonical_pose");
  try {
    t.frames = require(j, "frames", where).get<std::vector<std::size_t>>();
    t.grasp_frame = require(j, "grasp_frame", where).get<std::size_t>();
    if (j.contains("steps")) {
      for (const auto& s : j["steps"]) {
        t.steps.push_back({s.at("source").get<std::size_t>(), s.at("target").get<std::size_t>(),
                           s.at("pairs").get<std::size_t>(), s.at("inliers").get<std::size_t>(),
                           s.at("inlier_rate").get<double>(), s.at("rms").get<double>()});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Malformed, where + ": " + e.what());
  }
  if (t.frames.size() != t.relative_poses.size() + 1) {
    throw Error(ErrorKind::Malformed, where + ": frames must have one more entry than relative poses");
  }
  return t;
}

}  // namespace ditto
