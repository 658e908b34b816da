#include "ditto/scene.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>
#include <set>

#include "ditto/demo.hpp"
#include "ditto/error.hpp"
#include "ditto/json_io.hpp"
#include "ditto/rng.hpp"
#include "ditto/warp.hpp"

namespace ditto {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kLayoutStream = 0xA11;
constexpr std::uint64_t kOffsetStream = 0x0FF5;
constexpr std::uint64_t kGraspStream = 0x6A5;
constexpr std::uint64_t kCrossStream = 0x7777;

std::string frame_name(std::size_t i) { return fmt::format("frame_{:03d}", i); }

void invalid(const std::string& what) { throw Error(ErrorKind::ConfigInvalid, "synthetic config: " + what); }

}  // namespace

std::uint64_t pair_seed(std::uint64_t episode_seed, std::size_t src, std::size_t dst) {
  return mix_seed(mix_seed(episode_seed, 100 + src), dst);
}

void SyntheticEpisodeConfig::validate() const {
  if (frames < 2) invalid("frames must be >= 2");
  if (!(step_translation >= 0.0) || !(step_rotation >= 0.0)) invalid("motion scales must be >= 0");
  if (!(object.size > 0.0) || !(object.spacing > 0.0)) invalid("object size and spacing must be > 0");
  if (secondary && (!(secondary_shape.size > 0.0) || !(secondary_shape.spacing > 0.0))) {
    invalid("secondary size and spacing must be > 0");
  }
  if (!(sigma > 0.0)) invalid("sigma must be > 0");
  if (!(offset_scale >= 0.0)) invalid("offset_scale must be >= 0");
  if (grasp_frame_index >= frames) invalid("grasp_frame_index must be < frames");
  try {
    noise.validate();
    intrinsics.validate();
  } catch (const Error& e) {
    invalid(e.what());
  }
}

json config_to_json(const SyntheticEpisodeConfig& c) {
  return {
      {"frames", c.frames},
      {"shape", to_string(c.object.kind)},
      {"size", c.object.size},
      {"spacing", c.object.spacing},
      {"step_translation", c.step_translation},
      {"step_rotation", c.step_rotation},
      {"secondary", c.secondary},
      {"secondary_shape", to_string(c.secondary_shape.kind)},
      {"secondary_size", c.secondary_shape.size},
      {"secondary_spacing", c.secondary_shape.spacing},
      {"mix_secondary", c.mix_secondary},
      {"sigma", c.sigma},
      {"offset_scale", c.offset_scale},
      {"layout_seed", c.layout_seed},
      {"grasp_frame_index", c.grasp_frame_index},
      {"hand", c.hand},
      {"grasp_candidates", c.grasp_candidates},
      {"noise",
       {{"pixel_sigma", c.noise.pixel_sigma},
        {"outlier_fraction", c.noise.outlier_fraction},
        {"depth_sigma", c.noise.depth_sigma}}},
      {"intrinsics", intrinsics_to_json(c.intrinsics)},
  };
}

SyntheticEpisodeConfig config_from_json(const json& j) {
  if (!j.is_object()) invalid("expected a JSON object");
  static const std::set<std::string> known = {
      "frames",       "shape",        "size",           "spacing",          "step_translation",
      "step_rotation", "secondary",   "secondary_shape", "secondary_size",   "secondary_spacing",
      "mix_secondary", "sigma",       "offset_scale",   "layout_seed",      "grasp_frame_index",
      "hand",         "grasp_candidates", "noise",      "intrinsics"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) invalid("unknown key \"" + key + "\"");
  }
  SyntheticEpisodeConfig c;
  try {
    c.frames = j.value("frames", c.frames);
    if (j.contains("shape")) c.object.kind = shape_from_string(j["shape"].get<std::string>());
    c.object.size = j.value("size", c.object.size);
    c.object.spacing = j.value("spacing", c.object.spacing);
    c.step_translation = j.value("step_translation", c.step_translation);
    c.step_rotation = j.value("step_rotation", c.step_rotation);
    c.secondary = j.value("secondary", c.secondary);
    if (j.contains("secondary_shape")) c.secondary_shape.kind = shape_from_string(j["secondary_shape"].get<std::string>());
    c.secondary_shape.size = j.value("secondary_size", c.secondary_shape.size);
    c.secondary_shape.spacing = j.value("secondary_spacing", c.secondary_shape.spacing);
    c.mix_secondary = j.value("mix_secondary", c.mix_secondary);
    c.sigma = j.value("sigma", c.sigma);
    c.offset_scale = j.value("offset_scale", c.offset_scale);
    c.layout_seed = j.value("layout_seed", c.layout_seed);
    c.grasp_frame_index = j.value("grasp_frame_index", c.grasp_frame_index);
    c.hand = j.value("hand", c.hand);
    c.grasp_candidates = j.value("grasp_candidates", c.grasp_candidates);
    if (j.contains("noise")) {
      const json& n = j["noise"];
      for (const auto& [key, value] : n.items()) {
        if (key != "pixel_sigma" && key != "outlier_fraction" && key != "depth_sigma") {
          invalid("unknown noise key \"" + key + "\"");
        }
      }
      c.noise.pixel_sigma = n.value("pixel_sigma", c.noise.pixel_sigma);
      c.noise.outlier_fraction = n.value("outlier_fraction", c.noise.outlier_fraction);
      c.noise.depth_sigma = n.value("depth_sigma", c.noise.depth_sigma);
    }
    if (j.contains("intrinsics")) c.intrinsics = intrinsics_from_json(j["intrinsics"]);
  } catch (const json::exception& e) {
    invalid(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    invalid(e.what());
  }
  c.validate();
  return c;
}

std::vector<SceneObject> SyntheticScene::objects_at(std::size_t frame) const {
  std::vector<SceneObject> out;
  out.push_back({kObjectId, &object_cloud, object_poses.at(frame)});
  if (secondary_pose) out.push_back({kSecondaryId, &secondary_cloud, *secondary_pose});
  if (hand_pose && frame == config.grasp_frame_index) out.push_back({kHandId, &hand_cloud, *hand_pose});
  return out;
}

RenderedFrame SyntheticScene::render(std::size_t frame) const {
  const auto objects = objects_at(frame);
  return render_scene(objects, config.intrinsics);
}

SyntheticScene build_scene(const SyntheticEpisodeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SyntheticScene s;
  s.config = cfg;
  s.seed = seed;
  s.object_cloud = sample_surface(cfg.object);
  if (cfg.secondary) s.secondary_cloud = sample_surface(cfg.secondary_shape);

  Rng layout(mix_seed(cfg.layout_seed, kLayoutStream));
  const Point3 loop_centre(-0.07 + layout.uniform(-0.015, 0.015), layout.uniform(-0.015, 0.015),
                           0.55 + layout.uniform(-0.02, 0.02));
  const Eigen::Matrix3d r0 = (Eigen::AngleAxisd(0.5 + layout.uniform(-0.1, 0.1), Point3::UnitX()) *
                              Eigen::AngleAxisd(0.6 + layout.uniform(-0.1, 0.1), Point3::UnitY()) *
                              Eigen::AngleAxisd(layout.uniform(-0.3, 0.3), Point3::UnitZ()))
                                 .toRotationMatrix();
  const Point3 sc = loop_centre + Point3(0.2 + layout.uniform(-0.01, 0.01), 0.06 + layout.uniform(-0.01, 0.01), 0.1);
  const Pose secondary_base(
      (Eigen::AngleAxisd(0.45, Point3::UnitX()) * Eigen::AngleAxisd(-0.35, Point3::UnitY())).toRotationMatrix(), sc);
  const double phase = layout.uniform(0.0, kTwoPi);
  const double twist = layout.uniform(0.0, kTwoPi);

  // Centre displacements trace a loop; start where the loop's mean position
  // lands on loop_centre.
  const std::size_t n = cfg.frames - 1;
  std::vector<Point3> disps;
  Point3 walk = Point3::Zero(), mean = Point3::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const double phi = phase + kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    disps.push_back(cfg.step_translation *
                    Point3(std::cos(phi), 0.6 * std::sin(phi), 0.35 * std::sin(2.0 * phi)).normalized());
    mean += walk;
    walk += disps.back();
  }
  mean = (mean + walk) / static_cast<double>(n + 1);
  const Point3 c0 = loop_centre - mean;
  const Pose start(r0, c0);

  // Object-centred steps: rotate about the current centre, then displace it.
  Point3 centre = c0;
  for (std::size_t k = 0; k < n; ++k) {
    const double psi = twist + 0.5 * static_cast<double>(k);
    const Point3 axis = Point3(std::sin(psi), std::cos(psi), 0.6).normalized();
    const Eigen::Matrix3d r = Eigen::AngleAxisd(cfg.step_rotation, axis).toRotationMatrix();
    s.base_steps.emplace_back(r, centre + disps[k] - r * centre);
    centre += disps[k];
  }

  if (cfg.offset_scale > 0.0) {
    Rng off(mix_seed(seed, kOffsetStream));
    const double a = cfg.offset_scale;
    const Point3 o1(off.uniform(-a, a), off.uniform(-a, a), 0.5 * off.uniform(-a, a));
    const Point3 o2(off.uniform(-a, a), off.uniform(-a, a), 0.5 * off.uniform(-a, a));
    s.object_offset = Pose::from_translation(o1);
    s.secondary_offset = Pose::from_translation(o2);
  }

  // Ground truth follows the same warp convention the pipeline applies.
  WarpConfig warp;
  warp.sigma = cfg.sigma;
  warp.use_secondary = cfg.secondary && cfg.mix_secondary;
  const std::optional<Pose> goal = warp.use_secondary ? std::optional<Pose>(s.secondary_offset) : std::nullopt;
  s.relative_poses = warp_trajectory(s.base_steps, s.object_offset, goal, warp).relative;

  s.object_poses.push_back(compose(s.object_offset, start));
  for (const auto& step : s.relative_poses) s.object_poses.push_back(compose(step, s.object_poses.back()));
  if (cfg.secondary) s.secondary_pose = compose(s.secondary_offset, secondary_base);

  if (cfg.hand) {
    s.hand_cloud = sample_surface(ShapeSpec{ShapeKind::Disk, 0.03, cfg.object.spacing});
    const Point3 c = s.object_poses[cfg.grasp_frame_index].translation();
    s.hand_pose = Pose::from_translation(c + Point3(-0.6 * cfg.object.size - 0.012, 0.01, -0.04));
  }

  for (std::size_t f = 0; f < cfg.frames; ++f) {
    for (const auto& obj : s.objects_at(f)) {
      for (const auto& p : *obj.cloud) {
        if (!(obj.pose.apply(p).z() > 0.05)) {
          throw Error(ErrorKind::ConfigInvalid,
                      fmt::format("synthetic config: frame {} puts object {} behind the camera", f, obj.id));
        }
      }
    }
  }
  return s;
}

namespace {

SyntheticMatches scene_matches(const SyntheticScene& a, std::size_t fa, const RenderedFrame& ra,
                               const SyntheticScene& b, std::size_t fb, const RenderedFrame& rb,
                               std::uint64_t seed) {
  const auto oa = a.objects_at(fa);
  const auto ob = b.objects_at(fb);
  const int ids[] = {kObjectId, kSecondaryId};
  SyntheticNoiseParams noise = a.config.noise;
  noise.seed = seed;
  SyntheticMatches m = match_rendered(oa, ra, ob, rb, ids, a.config.intrinsics, noise);
  m.set.source_frame = frame_name(fa);
  m.set.target_frame = frame_name(fb);
  return m;
}

std::vector<Point3> pixels_of(const RenderedFrame& r, int id, const CameraIntrinsics& k) {
  std::vector<Point3> pts;
  for (int y = 0; y < r.depth.size.height; ++y) {
    for (int x = 0; x < r.depth.size.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * r.depth.size.width + x;
      if (r.owner_object[i] == id) pts.push_back(backproject(x, y, r.depth.data[i], k));
    }
  }
  return pts;
}

}  // namespace

EpisodeBundle generate_synthetic_episode(const SyntheticEpisodeConfig& cfg, std::uint64_t seed) {
  const SyntheticScene scene = build_scene(cfg, seed);
  const CameraIntrinsics& k = cfg.intrinsics;
  EpisodeBundle b;
  b.intrinsics = k;
  b.grasp_frame_index = cfg.grasp_frame_index;

  std::vector<RenderedFrame> renders;
  renders.reserve(cfg.frames);
  for (std::size_t f = 0; f < cfg.frames; ++f) renders.push_back(scene.render(f));

  for (std::size_t f = 0; f < cfg.frames; ++f) {
    FrameRecord rec;
    rec.depth = renders[f].depth;
    add_depth_noise(rec.depth, cfg.noise.depth_sigma, mix_seed(seed, 1000 + f));
    rec.object_mask = renders[f].mask(kObjectId);
    if (cfg.secondary) rec.secondary_mask = renders[f].mask(kSecondaryId);
    if (cfg.hand && f == cfg.grasp_frame_index) rec.hand_mask = renders[f].mask(kHandId);
    b.frames.push_back(std::move(rec));
  }

  json outliers = json::array();
  for (std::size_t f = 0; f + 1 < cfg.frames; ++f) {
    SyntheticMatches m = scene_matches(scene, f, renders[f], scene, f + 1, renders[f + 1], pair_seed(seed, f, f + 1));
    std::vector<std::size_t> planted;
    for (std::size_t i = 0; i < m.planted_outlier.size(); ++i) {
      if (m.planted_outlier[i]) planted.push_back(i);
    }
    outliers.push_back({{"source", f}, {"target", f + 1}, {"matches", m.set.size()}, {"indices", planted}});
    b.correspondences[{f, f + 1}] = std::move(m.set);
  }

  // Canonical object frame and hand anchor from the noiseless grasp frame.
  const std::size_t g = cfg.grasp_frame_index;
  const PointCloud grasp_cloud = pixels_of(renders[g], kObjectId, k);
  if (grasp_cloud.empty()) invalid("object not visible at the grasp frame");
  const Pose canonical = Pose::from_translation(centroid(grasp_cloud));
  std::optional<Point3> hand_point;
  if (scene.hand_pose) hand_point = scene.hand_pose->translation();

  // Grasp candidates on the first frame: on-object surface points first,
  // then distractors on the secondary object and in free space.
  Rng grasp_rng(mix_seed(seed, kGraspStream));
  auto random_rotation = [&] {
    const Point3 axis(grasp_rng.uniform(-1, 1), grasp_rng.uniform(-1, 1), grasp_rng.uniform(-1, 1) + 1e-3);
    return Pose::from_axis_angle(axis, grasp_rng.uniform(0.0, std::numbers::pi)).rotation();
  };
  auto pick = [&](std::vector<Point3> pts, std::size_t count) {
    std::vector<Point3> out;
    for (std::size_t j = 0; j < count && j < pts.size(); ++j) {
      const std::size_t r = j + static_cast<std::size_t>(grasp_rng.index(pts.size() - j));
      std::swap(pts[j], pts[r]);
      out.push_back(pts[j]);
    }
    return out;
  };
  const auto on_object = pick(pixels_of(renders[0], kObjectId, k), cfg.grasp_candidates);
  for (const auto& p : on_object) b.grasps.push_back({Pose(random_rotation(), p), grasp_rng.uniform()});
  if (cfg.secondary) {
    for (const auto& p : pick(pixels_of(renders[0], kSecondaryId, k), 3)) {
      b.grasps.push_back({Pose(random_rotation(), p), grasp_rng.uniform()});
    }
  }
  const Point3 c0 = scene.object_poses[0].translation();
  for (const Point3& off : {Point3(0.0, 0.0, -0.08), Point3(0.0, -0.09, 0.0)}) {
    b.grasps.push_back({Pose(random_rotation(), c0 + off), grasp_rng.uniform()});
  }

  std::optional<std::size_t> expected;
  if (hand_point && !on_object.empty()) {
    const Pose carry = compose(scene.object_poses[0], inverse(scene.object_poses[g]));
    const Point3 hand0 = carry.apply(*hand_point);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < on_object.size(); ++i) {
      const double d = (on_object[i] - hand0).norm();
      if (d < best) {
        best = d;
        expected = i;
      }
    }
  }

  json rel = json::array();
  for (const auto& p : scene.relative_poses) rel.push_back(pose_to_json(p));
  json abs = json::array();
  for (const auto& p : scene.object_poses) abs.push_back(pose_to_json(p));
  json gt;
  gt["generator"] = "ditto-synth";
  gt["seed"] = seed;
  gt["config"] = config_to_json(cfg);
  gt["relative_poses"] = rel;
  gt["object_poses"] = abs;
  gt["total_motion"] = pose_to_json(compose(scene.object_poses.back(), inverse(scene.object_poses.front())));
  gt["secondary_pose"] = scene.secondary_pose ? pose_to_json(*scene.secondary_pose) : json(nullptr);
  gt["object_offset"] = pose_to_json(scene.object_offset);
  gt["secondary_offset"] = pose_to_json(scene.secondary_offset);
  gt["hand_point_camera"] = hand_point ? point_to_json(*hand_point) : json(nullptr);
  gt["hand_anchor"] = hand_point ? point_to_json(inverse(canonical).apply(*hand_point)) : json(nullptr);
  gt["canonical_pose"] = pose_to_json(canonical);
  gt["planted_outliers"] = outliers;
  gt["expected_grasp"] = expected ? json(*expected) : json(nullptr);
  gt["mixing"] = {{"enabled", cfg.secondary && cfg.mix_secondary}, {"sigma", cfg.sigma}};
  b.ground_truth = gt;
  return b;
}

GroundTruth ground_truth_from_json(const json& j) {
  const std::string where = "ground truth";
  GroundTruth gt;
  gt.config = config_from_json(require(j, "config", where));
  try {
    gt.seed = require(j, "seed", where).get<std::uint64_t>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Malformed, where + ": seed must be an unsigned integer");
  }
  for (const auto& p : require(j, "relative_poses", where)) gt.relative_poses.push_back(pose_from_json(p, "relative_poses"));
  for (const auto& p : require(j, "object_poses", where)) gt.object_poses.push_back(pose_from_json(p, "object_poses"));
  gt.total_motion = pose_from_json(require(j, "total_motion", where), "total_motion");
  if (!require(j, "secondary_pose", where).is_null()) gt.secondary_pose = pose_from_json(j["secondary_pose"], "secondary_pose");
  gt.object_offset = pose_from_json(require(j, "object_offset", where), "object_offset");
  gt.secondary_offset = pose_from_json(require(j, "secondary_offset", where), "secondary_offset");
  if (!require(j, "hand_point_camera", where).is_null()) gt.hand_point_camera = point_from_json(j["hand_point_camera"]);
  if (!require(j, "hand_anchor", where).is_null()) gt.hand_anchor = point_from_json(j["hand_anchor"]);
  gt.canonical_pose = pose_from_json(require(j, "canonical_pose", where), "canonical_pose");
  try {
    for (const auto& o : require(j, "planted_outliers", where)) {
      gt.planted_outliers[{o.at("source").get<std::size_t>(), o.at("target").get<std::size_t>()}] =
          o.at("indices").get<std::vector<std::size_t>>();
    }
    if (j.contains("expected_grasp") && !j["expected_grasp"].is_null()) gt.expected_grasp = j["expected_grasp"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Malformed, where + ": " + e.what());
  }
  return gt;
}

bool SyntheticOracle::has(std::size_t src, std::size_t dst) const {
  return src < scene_.config.frames && dst < scene_.config.frames && src != dst;
}

CorrespondenceSet SyntheticOracle::get(std::size_t src, std::size_t dst) const {
  if (!has(src, dst)) throw Error(ErrorKind::InvalidArgument, "synthetic oracle: frame index out of range");
  const RenderedFrame ra = scene_.render(src);
  const RenderedFrame rb = scene_.render(dst);
  return scene_matches(scene_, src, ra, scene_, dst, rb, pair_seed(scene_.seed, src, dst)).set;
}

CorrespondenceSet oracle_cross_correspondences(const SyntheticScene& demo, std::size_t demo_frame,
                                               const SyntheticScene& live, std::size_t live_frame) {
  if (demo.object_cloud.size() != live.object_cloud.size() ||
      demo.secondary_cloud.size() != live.secondary_cloud.size()) {
    throw Error(ErrorKind::InvalidArgument, "synthetic oracle: demo and live scenes use different objects");
  }
  const RenderedFrame ra = demo.render(demo_frame);
  const RenderedFrame rb = live.render(live_frame);
  const std::uint64_t seed = mix_seed(mix_seed(mix_seed(demo.seed, kCrossStream), live.seed), demo_frame * 1000 + live_frame);
  SyntheticMatches m = scene_matches(demo, demo_frame, ra, live, live_frame, rb, seed);
  m.set.target_frame = "live_" + m.set.target_frame;
  return std::move(m.set);
}

std::optional<SyntheticScene> scene_of(const EpisodeBundle& bundle) {
  if (!bundle.ground_truth) return std::nullopt;
  const GroundTruth gt = ground_truth_from_json(*bundle.ground_truth);
  return build_scene(gt.config, gt.seed);
}

}  // namespace ditto
