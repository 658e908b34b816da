#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ditto/demo.hpp"
#include "ditto/error.hpp"
#include "ditto/scene.hpp"
#include "ditto/synth.hpp"
#include "ditto/warp.hpp"
#include "oracles.hpp"

using namespace ditto;

namespace {

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(ErrorKind::Io, "");
}

std::vector<Pose> random_steps(Rng& rng, std::size_t n) {
  std::vector<Pose> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_pose(rng, 0.3, 0.1));
  return out;
}

Pose translation(double x, double y, double z) { return Pose::from_translation({x, y, z}); }

bool near(const Pose& a, const Pose& b, double tol) {
  const PoseError e = pose_error(a, b);
  return e.rotation < tol && e.translation < tol;
}

WarpConfig with_secondary(double sigma = 0.5) {
  WarpConfig cfg;
  cfg.sigma = sigma;
  cfg.use_secondary = true;
  return cfg;
}

}  // namespace

TEST_CASE("redetect_bbox examples") {
  const ImageSize size{100, 100};
  const Mask one = redetect_bbox({"a", "b", {{0, 0, 10, 20, 1}}}, size);
  CHECK(one.count() == 121);
  CHECK(one.at(5, 15));
  CHECK(one.at(15, 25));
  CHECK_FALSE(one.at(16, 25));
  CHECK_FALSE(one.at(4, 15));

  const Mask full = redetect_bbox({"a", "b", {{0, 0, 0, 0, 1}, {0, 0, 99, 99, 1}}}, size);
  CHECK(full.count() == 100u * 100u);

  const Mask box = redetect_bbox({"a", "b", {{0, 0, 40, 40, 1}, {0, 0, 60, 60, 1}, {0, 0, 50, 45, 1}}}, size);
  CHECK(box.count() == 31u * 31u);
  CHECK(box.at(35, 35));
  CHECK(box.at(65, 65));
  CHECK_FALSE(box.at(34, 50));
  CHECK_FALSE(box.at(50, 66));

  CHECK(redetect_bbox({"a", "b", {{0, 0, 50, 50, 1}}}, size, 0).count() == 1);
  CHECK(error_of([&] { redetect_bbox({"a", "b", {}}, size); }).kind() == ErrorKind::EmptyCorrespondences);
}

TEST_CASE("redetect_bbox is the dilated bounding rectangle of rounded targets") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const ImageSize size{80, 60};
    CorrespondenceSet c{"a", "b", {}};
    const std::size_t n = 1 + rng.index(20);
    for (std::size_t i = 0; i < n; ++i) {
      c.matches.push_back({0, 0, rng.uniform(-0.49, 79.49), rng.uniform(-0.49, 59.49), 1});
    }
    const int margin = static_cast<int>(rng.index(8));
    const Mask m = redetect_bbox(c, size, margin);
    int x0 = 1000, x1 = -1, y0 = 1000, y1 = -1;
    for (const auto& match : c.matches) {
      const int x = static_cast<int>(std::floor(match.u2 + 0.5)), y = static_cast<int>(std::floor(match.v2 + 0.5));
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        const bool inside = x >= x0 - margin && x <= x1 + margin && y >= y0 - margin && y <= y1 + margin;
        if (m.at(x, y) != inside) {
          FAIL("bbox mismatch at " << x << "," << y);
        }
      }
    }
  }
}

TEST_CASE("mixing_weight examples") {
  for (std::size_t T : {2u, 3u, 11u, 50u}) {
    for (double sigma : {0.01, 0.5, 3.0}) CHECK(mixing_weight(0, T, sigma) == 1.0);
  }
  CHECK(std::abs(mixing_weight(5, 11, 0.5) - std::exp(-0.5)) < 1e-12);
  for (int t = 0; t < 10; ++t) CHECK(mixing_weight(t + 1, 11, 0.5) < mixing_weight(t, 11, 0.5));
  for (int t = 0; t <= 10; ++t) {
    const double a = mixing_weight(t, 11, 0.5);
    CHECK(a > 0.0);
    CHECK(a <= 1.0);
  }
  CHECK(error_of([] { mixing_weight(1, 1, 0.5); }).kind() == ErrorKind::InvalidArgument);
  CHECK(error_of([] { mixing_weight(1, 5, 0.0); }).kind() == ErrorKind::InvalidArgument);
}

TEST_CASE("warp_trajectory examples") {
  Rng rng(2);
  const std::vector<Pose> steps = random_steps(rng, 10);
  const WarpedTrajectory plain = warp_trajectory(steps, Pose::identity(), std::nullopt, WarpConfig{});
  REQUIRE(plain.relative.size() == steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) CHECK(plain.relative[k] == steps[k]);
  CHECK(plain.alpha.empty());

  const Pose p = oracle::random_pose(rng);
  const WarpedTrajectory same = warp_trajectory(steps, p, p, with_secondary());
  for (std::size_t k = 0; k < steps.size(); ++k) CHECK(same.relative[k] == compose(steps[k], p));

  // T = 3 hand-computed mixing example.
  const std::vector<Pose> ident(3, Pose::identity());
  const WarpedTrajectory mixed = warp_trajectory(ident, Pose::identity(), translation(1, 0, 0), with_secondary());
  const double expected[3] = {0.0, 1.0 - std::exp(-0.5), 1.0 - std::exp(-2.0)};
  CHECK(std::abs(expected[1] - 0.3935) < 1e-4);
  CHECK(std::abs(expected[2] - 0.8647) < 1e-4);
  for (int k = 0; k < 3; ++k) {
    CHECK((mixed.relative[k].translation() - Point3(expected[k], 0, 0)).norm() < 1e-9);
    CHECK(pose_error(mixed.relative[k], Pose::identity()).rotation < 1e-9);
  }
  CHECK(mixed.alpha == std::vector<double>{1.0, std::exp(-0.5), std::exp(-2.0)});
}

TEST_CASE("warp_trajectory preconditions") {
  const std::vector<Pose> steps(3, Pose::identity());
  CHECK(error_of([&] { warp_trajectory(steps, Pose::identity(), std::nullopt, with_secondary()); }).kind() ==
        ErrorKind::MissingGoalPose);
  CHECK(error_of([&] { warp_trajectory(steps, Pose::identity(), Pose::identity(), WarpConfig{}); }).kind() ==
        ErrorKind::InvalidArgument);
  CHECK(error_of([&] { warp_trajectory({}, Pose::identity(), std::nullopt, WarpConfig{}); }).kind() ==
        ErrorKind::InvalidArgument);
  WarpConfig bad;
  bad.sigma = -1;
  CHECK(error_of([&] { warp_trajectory(steps, Pose::identity(), std::nullopt, bad); }).kind() ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("identity warp reproduces the demonstration bit for bit") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Pose> steps = random_steps(rng, 2 + rng.index(12));
    const auto a = warp_trajectory(steps, Pose::identity(), std::nullopt, WarpConfig{}).relative;
    const auto b = warp_trajectory(steps, Pose::identity(), Pose::identity(), with_secondary()).relative;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      CHECK(a[k] == steps[k]);
      CHECK(b[k] == steps[k]);
    }
  }
}

TEST_CASE("warp_trajectory step 0 is the object branch exactly") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Pose> steps = random_steps(rng, 2 + rng.index(12));
    const Pose obj = oracle::random_pose(rng), goal = oracle::random_pose(rng);
    const auto w = warp_trajectory(steps, obj, goal, with_secondary(rng.uniform(0.05, 2.0)));
    CHECK(w.relative[0] == compose(steps[0], obj));
  }
}

TEST_CASE("warp_trajectory equivariance") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Pose> steps = random_steps(rng, 2 + rng.index(12));
    // Object branch: t_obj -> Q t_obj right-composes every step by t_obj^-1 Q t_obj.
    const Pose obj = oracle::random_pose(rng), q = oracle::random_pose(rng);
    const auto base = warp_trajectory(steps, obj, std::nullopt, WarpConfig{}).relative;
    const auto moved = warp_trajectory(steps, compose(q, obj), std::nullopt, WarpConfig{}).relative;
    const Pose c = compose(inverse(obj), compose(q, obj));
    for (std::size_t k = 0; k < steps.size(); ++k) CHECK(near(moved[k], compose(base[k], c), 1e-9));

    // Mixed branches with commuting (translation) offsets: right-composed by Q.
    const Pose to = translation(rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1));
    const Pose tg = translation(rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1));
    const Pose qt = translation(rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1));
    const auto mb = warp_trajectory(steps, to, tg, with_secondary()).relative;
    const auto mm = warp_trajectory(steps, compose(qt, to), compose(qt, tg), with_secondary()).relative;
    for (std::size_t k = 0; k < steps.size(); ++k) CHECK(near(mm[k], compose(mb[k], qt), 1e-9));
  }
}

TEST_CASE("sigma towards zero moves every later step onto the goal branch") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Pose> steps = random_steps(rng, 2 + rng.index(12));
    const Pose obj = oracle::random_pose(rng), goal = oracle::random_pose(rng);
    const auto w = warp_trajectory(steps, obj, goal, with_secondary(1e-3));
    for (std::size_t k = 1; k < steps.size(); ++k) CHECK(near(w.relative[k], compose(steps[k], goal), 1e-6));
  }
}

TEST_CASE("accumulate_trajectory") {
  const Pose start = Pose::from_axis_angle(Point3(0, 0, 1), 0.3, Point3(0.1, 0.2, 0.3));
  const auto still = accumulate_trajectory(start, std::vector<Pose>(4, Pose::identity()));
  REQUIRE(still.size() == 5);
  for (const auto& p : still) CHECK(p == start);

  const auto up = accumulate_trajectory(Pose::identity(), std::vector<Pose>(2, translation(0, 0, 0.1)));
  REQUIRE(up.size() == 3);
  CHECK(up[0].translation() == Point3(0, 0, 0));
  CHECK((up[1].translation() - Point3(0, 0, 0.1)).norm() < 1e-15);
  CHECK((up[2].translation() - Point3(0, 0, 0.2)).norm() < 1e-15);

  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<Pose> steps = random_steps(rng, 1 + rng.index(15));
    const auto abs = accumulate_trajectory(oracle::random_pose(rng), steps);
    for (std::size_t k = 0; k < steps.size(); ++k) CHECK(near(compose(abs[k + 1], inverse(abs[k])), steps[k], 1e-9));
  }
  CHECK(error_of([] { accumulate_trajectory(Pose::identity(), {}); }).kind() == ErrorKind::InvalidArgument);
}

TEST_CASE("select_grasp examples") {
  const PointCloud object{Point3(0, 0, 0), Point3(0.05, 0, 0), Point3(0.1, 0, 0)};
  const Point3 hand(0.05, 0.0, 0.0);
  std::vector<GraspCandidate> one{{translation(0.05, 0, 0), 0.1}};
  CHECK(select_grasp(one, object, hand, 0.01).index == 0);
  CHECK(select_grasp(one, object, hand, 0.01).hand_distance == 0.0);

  std::vector<GraspCandidate> two{{translation(0.08, 0, 0), 0.9}, {translation(0.06, 0, 0), 0.1}};
  const GraspSelection s = select_grasp(two, object, hand, 0.03);
  CHECK(s.index == 1);
  CHECK(std::abs(s.hand_distance - 0.01) < 1e-15);

  std::vector<GraspCandidate> far{{translation(0, 1, 0), 1.0}, {translation(0, 0, 1), 1.0}};
  CHECK(error_of([&] { select_grasp(far, object, hand, 0.02); }).kind() == ErrorKind::NoGraspOnObject);
  CHECK(error_of([&] { select_grasp(far, {}, hand, 0.02); }).kind() == ErrorKind::NoGraspOnObject);
  CHECK(error_of([&] { select_grasp({}, object, hand, 0.02); }).kind() == ErrorKind::EmptyInput);

  // The on-object filter acts before distance to the hand.
  std::vector<GraspCandidate> trap{{translation(0.05, 0.02, 0), 1.0}, {translation(0.1, 0.0, 0.005), 0.0}};
  CHECK(select_grasp(trap, object, hand, 0.01).index == 1);
}

TEST_CASE("select_grasp tie-breaks and permutation invariance") {
  const PointCloud object{Point3(0, 0, 0)};
  const Point3 hand(0, 0, 0.005);
  // Same hand distance: higher score wins, then lower index.
  std::vector<GraspCandidate> tied{{translation(0.003, 0, 0.005), 0.2}, {translation(-0.003, 0, 0.005), 0.7},
                                   {translation(0, 0.003, 0.005), 0.7}};
  CHECK(select_grasp(tied, object, hand, 0.01).index == 1);

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const PointCloud cloud = oracle::random_points(rng, 200, 0.0, 0.1);
    std::vector<GraspCandidate> grasps;
    for (int i = 0; i < 12; ++i) {
      grasps.push_back({translation(rng.uniform(-0.02, 0.12), rng.uniform(-0.02, 0.12), rng.uniform(-0.02, 0.12)),
                        rng.uniform()});
    }
    const Point3 h(rng.uniform(0, 0.1), rng.uniform(0, 0.1), rng.uniform(0, 0.1));
    std::optional<std::size_t> expected;
    double best = 1e9;
    for (std::size_t i = 0; i < grasps.size(); ++i) {
      double d2 = 1e9;
      for (const auto& p : cloud) d2 = std::min(d2, (p - grasps[i].pose.translation()).squaredNorm());
      if (d2 > 0.015 * 0.015) continue;
      const double d = (grasps[i].pose.translation() - h).norm();
      if (d < best) best = d, expected = i;
    }
    if (!expected) {
      CHECK(error_of([&] { select_grasp(grasps, cloud, h, 0.015); }).kind() == ErrorKind::NoGraspOnObject);
      continue;
    }
    CHECK(select_grasp(grasps, cloud, h, 0.015).index == *expected);
    std::vector<std::size_t> perm(grasps.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[0], perm[rng.index(perm.size())]);
    std::vector<GraspCandidate> shuffled;
    for (std::size_t i : perm) shuffled.push_back(grasps[i]);
    CHECK(perm[select_grasp(shuffled, cloud, h, 0.015).index] == *expected);
  }
}

TEST_CASE("transform_hand_anchor") {
  CHECK((transform_hand_anchor(Point3::Zero(), translation(0.2, 0, 1), Pose::identity()) - Point3(0.2, 0, 1)).norm() <
        1e-15);
  CHECK((transform_hand_anchor(Point3::Zero(), translation(0.2, 0, 1), translation(0.1, 0, 0)) - Point3(0.3, 0, 1))
            .norm() < 1e-15);

  // Round trip through extract_hand_anchor.
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    EpisodeBundle b;
    b.intrinsics = {100.0, 100.0, 50.0, 40.0, 100, 80};
    FrameRecord f;
    f.depth = DepthImage(b.image_size());
    for (auto& d : f.depth.data) d = static_cast<float>(rng.uniform(0.5, 2.0));
    f.object_mask = Mask(b.image_size(), true);
    Mask hand(b.image_size());
    const int cx = 10 + static_cast<int>(rng.index(80)), cy = 10 + static_cast<int>(rng.index(60));
    hand.set(cx, cy);
    f.hand_mask = hand;
    b.frames = {f, f};
    const DemoSequence seq = make_demo_sequence(b);
    DemoTrajectory traj;
    traj.object_canonical_pose = oracle::random_pose(rng);
    const Point3 anchor = extract_hand_anchor(seq, hand, traj);
    const Point3 camera = backproject(cx, cy, f.depth.at(cx, cy), b.intrinsics);
    CHECK((transform_hand_anchor(anchor, traj.object_canonical_pose, Pose::identity()) - camera).norm() < 1e-9);
  }
}

namespace {

struct DemoLivePair {
  EpisodeBundle bundle;  // frame 0 = demo, frame 1 = live
  Pose planted;
};

DemoLivePair render_pair(const Pose& planted, double pixel_sigma) {
  const CameraIntrinsics k = SyntheticEpisodeConfig{}.intrinsics;
  const PointCloud cloud = sample_surface({ShapeKind::Box, 0.1, 0.00035});
  const Pose demo_pose = Pose::from_axis_angle(Point3(1, 1, 0.3), 0.7, Point3(-0.03, 0.01, 0.55));
  const SceneObject demo{0, &cloud, demo_pose};
  const SceneObject live{0, &cloud, compose(planted, demo_pose)};
  const RenderedFrame rd = render_scene(std::span(&demo, 1), k);
  const RenderedFrame rl = render_scene(std::span(&live, 1), k);
  const int ids[] = {0};
  DemoLivePair out;
  out.planted = planted;
  out.bundle.intrinsics = k;
  out.bundle.correspondences[{0, 1}] =
      match_rendered(std::span(&demo, 1), rd, std::span(&live, 1), rl, ids, k, {pixel_sigma, 0.0, 0.0, 21}).set;
  out.bundle.frames.push_back({rd.depth, rd.mask(0), std::nullopt, std::nullopt, false});
  out.bundle.frames.push_back({rl.depth, rl.mask(0), std::nullopt, std::nullopt, false});
  return out;
}

DemoToLive estimate(const DemoLivePair& p, const Mask* demo_mask = nullptr, bool live_mask = true) {
  const auto& b = p.bundle;
  LiveObservation live{b.frames[1].depth, b.intrinsics, std::nullopt, std::nullopt, {}};
  if (live_mask) live.object_mask = b.frames[1].object_mask;
  return estimate_demo_to_live(b.frames[0].depth, demo_mask ? *demo_mask : b.frames[0].object_mask, b.intrinsics,
                               live, b.correspondences.at({0, 1}), RansacParams{});
}

}  // namespace

TEST_CASE("estimate_demo_to_live examples") {
  const DemoLivePair same = render_pair(Pose::identity(), 0.0);
  const DemoToLive id = estimate(same);
  CHECK(near(id.pose, Pose::identity(), 1e-6));
  CHECK(id.inliers == id.lifted_pairs);

  const Pose planted = Pose::from_axis_angle(Point3(0.2, 1, 0.1), 0.2, Point3(0.03, -0.02, 0.01));
  const DemoToLive moved = estimate(render_pair(planted, 0.2));
  CHECK(near(moved.pose, planted, 1e-3));
  // The re-detection box covers the moved object.
  const DemoLivePair exact = render_pair(planted, 0.0);
  const Mask& live_mask = exact.bundle.frames[1].object_mask;
  CHECK(intersect(moved.redetection, live_mask).count() >= static_cast<std::size_t>(0.99 * live_mask.count()));

  const Mask nothing(same.bundle.image_size());
  CHECK(error_of([&] { estimate(same, &nothing); }).kind() == ErrorKind::NoConsensus);
}

TEST_CASE("live_object_cloud") {
  const DemoLivePair p = render_pair(Pose::identity(), 0.0);
  const auto& f = p.bundle.frames[1];
  LiveObservation live{f.depth, p.bundle.intrinsics, std::nullopt, std::nullopt, {}};
  const Mask box = redetect_bbox(p.bundle.correspondences.at({0, 1}), p.bundle.image_size());
  const std::size_t bare = live_object_cloud(live, box).size();
  CHECK(bare == f.object_mask.count());
  live.object_mask = Mask(p.bundle.image_size(), false);
  CHECK(live_object_cloud(live, box).empty());
}
