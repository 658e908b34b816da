#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "ditto/error.hpp"
#include "ditto/scene.hpp"
#include "ditto/synth.hpp"
#include "oracles.hpp"

using namespace ditto;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

CorrespondenceSet random_set(Rng& rng, std::size_t n, ImageSize size) {
  CorrespondenceSet c{"a", "b", {}};
  for (std::size_t i = 0; i < n; ++i) {
    c.matches.push_back({quantize_coordinate(rng.uniform(-1.0, size.width)),
                         quantize_coordinate(rng.uniform(-1.0, size.height)),
                         quantize_coordinate(rng.uniform(0.0, size.width)),
                         quantize_coordinate(rng.uniform(0.0, size.height)), quantize_coordinate(rng.uniform())});
  }
  return c;
}

Mask random_mask(Rng& rng, ImageSize size, double p) {
  Mask m(size);
  for (auto& v : m.data) v = rng.uniform() < p ? 1 : 0;
  return m;
}

// Box cloud in the camera frame, centred 0.6 m in front of the camera.
PointCloud box_in_view(double size = 0.1, double spacing = 0.001) {
  PointCloud cloud = sample_surface({ShapeKind::Box, size, spacing});
  const Pose place = Pose::from_axis_angle(Point3(1, 1, 0), 0.4, Point3(0.0, 0.0, 0.6));
  for (auto& p : cloud) p = place.apply(p);
  return cloud;
}

const CameraIntrinsics kCam{600.0, 600.0, 320.0, 240.0, 640, 480};

}  // namespace

TEST_CASE("filter_by_mask examples") {
  const ImageSize size{12, 12};
  Rng rng(1);
  const CorrespondenceSet c = random_set(rng, 50, size);
  CHECK(filter_by_mask(c, Mask(size, true)).matches.size() ==
        static_cast<std::size_t>(std::count_if(c.matches.begin(), c.matches.end(), [&](const Match& m) {
          return m.u1 >= -0.5 && m.v1 >= -0.5 && m.u1 < size.width - 0.5 && m.v1 < size.height - 0.5;
        })));
  CHECK(filter_by_mask(c, Mask(size, false)).empty());

  CorrespondenceSet three{"s", "t", {{1, 1, 0, 0, 1}, {5, 5, 0, 0, 1}, {9, 9, 0, 0, 1}}};
  Mask corner(size);
  for (int y = 0; y <= 6; ++y) {
    for (int x = 0; x <= 6; ++x) corner.set(x, y);
  }
  const CorrespondenceSet kept = filter_by_mask(three, corner);
  REQUIRE(kept.size() == 2);
  CHECK(kept.matches[0] == three.matches[0]);
  CHECK(kept.matches[1] == three.matches[1]);
  CHECK(kept.source_frame == "s");

  CHECK(kind_of([&] { filter_by_mask(three, corner, ImageSize{13, 12}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("filter_by_mask uses round-half-up membership") {
  const ImageSize size{4, 4};
  Mask m(size);
  m.set(2, 2);
  CorrespondenceSet c{"s", "t", {{1.5, 2.0, 0, 0, 1}, {2.4999, 2.0, 0, 0, 1}, {2.5, 2.0, 0, 0, 1}, {1.4999, 2.0, 0, 0, 1}}};
  const auto kept = filter_by_mask(c, m);
  REQUIRE(kept.size() == 2);
  CHECK(kept.matches[0].u1 == 1.5);
  CHECK(kept.matches[1].u1 == 2.4999);
}

TEST_CASE("filter_by_mask agrees with a pixel-interval scan") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageSize size{16, 9};
    const CorrespondenceSet c = random_set(rng, 100, size);
    const Mask m = random_mask(rng, size, 0.4);
    // The oracle tests the target pixel, so swap endpoints to reuse it.
    CorrespondenceSet swapped = c;
    for (auto& match : swapped.matches) {
      std::swap(match.u1, match.u2);
      std::swap(match.v1, match.v2);
    }
    CHECK(filter_by_mask(c, m).size() == oracle::mask_hits_by_scan(swapped, m));
  }
}

TEST_CASE("filter_by_mask is idempotent and composes by intersection") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const ImageSize size{20, 15};
    const CorrespondenceSet c = random_set(rng, 200, size);
    const Mask m1 = random_mask(rng, size, 0.5);
    const Mask m2 = random_mask(rng, size, 0.6);
    const CorrespondenceSet once = filter_by_mask(c, m1);
    CHECK(filter_by_mask(once, m1) == once);
    CHECK(filter_by_mask(once, m2) == filter_by_mask(c, intersect(m1, m2)));
    CHECK(filter_by_mask(filter_by_mask(c, m2), m1) == filter_by_mask(c, intersect(m1, m2)));
  }
}

TEST_CASE("lift_correspondences examples") {
  const CameraIntrinsics k{100.0, 100.0, 4.0, 3.0, 8, 6};
  DepthImage a(ImageSize{8, 6}), b(ImageSize{8, 6});
  for (auto& d : a.data) d = 1.0f;
  for (auto& d : b.data) d = 1.0f;
  CorrespondenceSet c{"s", "t", {{4.0, 3.0, 4.0, 3.0, 0.75}}};
  PointPairSet pairs = lift_correspondences(c, a, b, k);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs.src[0] == Point3(0, 0, 1));
  CHECK(pairs.dst[0] == Point3(0, 0, 1));
  CHECK(pairs.weights[0] == 0.75);

  c.matches.push_back({1.0, 1.0, 6.0, 2.0, 1.0});
  c.matches.push_back({2.0, 2.0, 7.0, 5.0, 1.0});
  b.at(7, 5) = 0.0f;
  std::vector<std::size_t> kept;
  pairs = lift_correspondences(c, a, b, k, &kept);
  CHECK(pairs.size() == 2);
  CHECK(kept == std::vector<std::size_t>{0, 1});
  CHECK(pairs.dst[1].isApprox(Point3(0.02, -0.01, 1.0)));

  // Out-of-range, non-finite and out-of-image depths are all missing.
  b.at(6, 2) = 10.5f;
  CHECK(lift_correspondences(c, a, b, k).size() == 1);
  b.at(6, 2) = std::nanf("");
  CHECK(lift_correspondences(c, a, b, k).size() == 1);
  b.at(6, 2) = 10.0f;
  CHECK(lift_correspondences(c, a, b, k).size() == 2);
  CorrespondenceSet outside{"s", "t", {{-0.6, 0.0, 1.0, 1.0, 1.0}, {7.5, 0.0, 1.0, 1.0, 1.0}}};
  CHECK(lift_correspondences(outside, a, b, k).size() == 0);

  CHECK(kind_of([&] { lift_correspondences(c, DepthImage(ImageSize{7, 6}), b, k); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("lift_correspondences count never grows and equals input iff every depth is valid") {
  Rng rng(4);
  const CameraIntrinsics k{50.0, 50.0, 8.0, 6.0, 16, 12};
  for (int trial = 0; trial < 40; ++trial) {
    DepthImage a(ImageSize{16, 12}), b(ImageSize{16, 12});
    const double holes = trial % 2 == 0 ? 0.0 : 0.1;
    for (auto& d : a.data) d = rng.uniform() < holes ? 0.0f : static_cast<float>(rng.uniform(0.2, 3.0));
    for (auto& d : b.data) d = rng.uniform() < holes ? 0.0f : static_cast<float>(rng.uniform(0.2, 3.0));
    CorrespondenceSet c{"s", "t", {}};
    for (int i = 0; i < 100; ++i) {
      c.matches.push_back({rng.uniform(-0.5, 15.49), rng.uniform(-0.5, 11.49), rng.uniform(-0.5, 15.49),
                           rng.uniform(-0.5, 11.49), 1.0});
    }
    std::size_t valid = 0;
    for (const auto& m : c.matches) {
      const int x1 = static_cast<int>(std::floor(m.u1 + 0.5)), y1 = static_cast<int>(std::floor(m.v1 + 0.5));
      const int x2 = static_cast<int>(std::floor(m.u2 + 0.5)), y2 = static_cast<int>(std::floor(m.v2 + 0.5));
      valid += a.at(x1, y1) > 0.0f && b.at(x2, y2) > 0.0f;
    }
    const std::size_t n = lift_correspondences(c, a, b, k).size();
    CHECK(n <= c.size());
    CHECK(n == valid);
    CHECK((n == c.size()) == (valid == c.size()));
  }
}

TEST_CASE("lift_mask") {
  const CameraIntrinsics k{100.0, 100.0, 1.0, 1.0, 3, 3};
  DepthImage d(ImageSize{3, 3});
  d.at(0, 0) = 1.0f;
  d.at(1, 1) = 2.0f;
  d.at(2, 2) = -1.0f;
  CHECK(lift_mask(d, nullptr, k).size() == 2);
  Mask m(ImageSize{3, 3});
  m.set(1, 1);
  m.set(2, 2);
  const PointCloud cloud = lift_mask(d, &m, k);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud[0] == Point3(0, 0, 2));
  const Mask wide(ImageSize{4, 3}, true);
  CHECK(kind_of([&] { lift_mask(d, &wide, k); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("serialization round trip") {
  Rng rng(5);
  const auto dir = std::filesystem::temp_directory_path() / "ditto_test_correspond";
  std::filesystem::create_directories(dir);
  for (int trial = 0; trial < 20; ++trial) {
    CorrespondenceSet c = random_set(rng, static_cast<std::size_t>(rng.index(300)), ImageSize{640, 480});
    c.source_frame = "frame_" + std::to_string(trial);
    CHECK(parse_correspondences(serialize_correspondences(c)) == c);
    const auto path = dir / ("c" + std::to_string(trial) + ".json");
    store_correspondences(path, c);
    CHECK(load_correspondences(path) == c);
  }
  const CorrespondenceSet empty = parse_correspondences(R"({"source_frame":"a","target_frame":"b","matches":[]})");
  CHECK(empty.empty());
  CHECK(empty.source_frame == "a");
  CHECK(kind_of([&] { load_correspondences(dir / "missing.json"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("quantize_coordinate") {
  CHECK(quantize_coordinate(1.23456789) == 1.234568);
  CHECK(quantize_coordinate(-0.0000004) == 0.0);
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double q = quantize_coordinate(rng.uniform(-100, 1000));
    CHECK(quantize_coordinate(q) == q);
  }
}

TEST_CASE("malformed correspondence files") {
  const auto malformed = [](const std::string& text) {
    try {
      parse_correspondences(text, "f.json");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Malformed);
      return std::string(e.what());
    }
    FAIL("expected Malformed");
    return std::string();
  };
  CHECK(malformed(R"({"matches":[{"u1":1,"v1":1,"u2":1,"v2":1,"conf":1.5}]})").find("match 0") != std::string::npos);
  CHECK(malformed(R"({"matches":[{"u1":1,"v1":1,"u2":1,"v2":1,"conf":-0.1}]})").find("confidence") !=
        std::string::npos);
  CHECK(malformed("{\n  \"matches\": [\n    {\"u1\": 1,,}\n  ]\n}").find("line 3") != std::string::npos);
  CHECK(malformed(R"({"matches":[{"u1":1,"v1":1,"u2":1,"conf":1}]})").find("\"v2\"") != std::string::npos);
  CHECK(malformed(R"({"matches":[{"u1":"1","v1":1,"u2":1,"v2":1,"conf":1}]})").find("\"u1\"") != std::string::npos);
  malformed(R"({"matches":{}})");
  malformed(R"([1,2])");
  malformed(R"({"source_frame":3,"matches":[]})");
  malformed(R"({"matches":[{"u1":1,"v1":1,"u2":1,"v2":1,"conf":1},7]})");
}

TEST_CASE("synthesize_correspondences: identity motion without noise") {
  const SyntheticPair p = synthesize_correspondences(box_in_view(), Pose::identity(), kCam, {});
  REQUIRE(p.correspondences.size() > 1000);
  for (const auto& m : p.correspondences.matches) {
    CHECK(m.u1 == m.u2);
    CHECK(m.v1 == m.v2);
  }
  CHECK(p.depth_src == p.depth_dst);
  CHECK(p.mask_src == p.mask_dst);
}

TEST_CASE("synthesize_correspondences: pure translation on a fronto-parallel plane") {
  const CameraIntrinsics k{100.0, 100.0, 64.0, 48.0, 128, 96};
  PointCloud plane;
  for (int i = -40; i <= 40; ++i) {
    for (int j = -30; j <= 30; ++j) plane.emplace_back(0.005 * i, 0.005 * j, 1.0);
  }
  const SyntheticPair p = synthesize_correspondences(plane, Pose::from_translation({0.1, 0, 0}), k, {});
  REQUIRE(p.correspondences.size() > 100);
  for (const auto& m : p.correspondences.matches) {
    CHECK(std::abs(m.u2 - m.u1 - 10.0) < 1e-6);
    CHECK(std::abs(m.v2 - m.v1) < 1e-6);
  }
}

TEST_CASE("synthesize_correspondences: exactly floor(fraction * N) planted outliers") {
  for (const double fraction : {0.0, 0.1, 0.3, 0.55}) {
    SyntheticNoiseParams noise{0.2, fraction, 0.001, 7};
    const SyntheticPair p = synthesize_correspondences(box_in_view(), Pose::from_translation({0.01, 0, 0}), kCam, noise);
    const auto n = p.correspondences.size();
    REQUIRE(p.planted_outlier.size() == n);
    CHECK(static_cast<std::size_t>(std::count(p.planted_outlier.begin(), p.planted_outlier.end(), true)) ==
          static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = p.correspondences.matches[i];
      CHECK((m.u2 >= -0.5 && m.u2 < kCam.width - 0.5 && m.v2 >= -0.5 && m.v2 < kCam.height - 0.5));
    }
  }
}

TEST_CASE("generator sidecar flags floor(0.3 N) planted outliers per pair at seed 7") {
  SyntheticEpisodeConfig cfg;
  cfg.frames = 4;
  cfg.noise = {0.2, 0.3, 0.001, 0};
  const EpisodeBundle b = generate_synthetic_episode(cfg, 7);
  REQUIRE(b.ground_truth);
  const auto& flagged = (*b.ground_truth)["planted_outliers"];
  REQUIRE(flagged.size() == 3);
  for (const auto& entry : flagged) {
    const auto key = std::make_pair(entry["source"].get<std::size_t>(), entry["target"].get<std::size_t>());
    const std::size_t n = b.correspondences.at(key).size();
    CHECK(entry["matches"].get<std::size_t>() == n);
    CHECK(entry["indices"].size() == static_cast<std::size_t>(std::floor(0.3 * static_cast<double>(n))));
  }
}

TEST_CASE("synthesize_correspondences determinism and errors") {
  const SyntheticNoiseParams noise{0.3, 0.2, 0.002, 99};
  const Pose motion = Pose::from_axis_angle(Point3(0, 1, 0), 0.1, Point3(0.01, 0.0, 0.02));
  const SyntheticPair a = synthesize_correspondences(box_in_view(), motion, kCam, noise);
  const SyntheticPair b = synthesize_correspondences(box_in_view(), motion, kCam, noise);
  CHECK(a.correspondences == b.correspondences);
  CHECK(a.depth_src == b.depth_src);
  CHECK(a.depth_dst == b.depth_dst);
  CHECK(a.planted_outlier == b.planted_outlier);

  CHECK(kind_of([&] { synthesize_correspondences({}, motion, kCam, noise); }) == ErrorKind::EmptyCloud);
  PointCloud behind{{0, 0, -1}};
  CHECK(kind_of([&] { synthesize_correspondences(behind, motion, kCam, noise); }) == ErrorKind::BehindCamera);
  PointCloud crosses{{0, 0, 0.05}};
  CHECK(kind_of([&] { synthesize_correspondences(crosses, Pose::from_translation({0, 0, -0.1}), kCam, noise); }) ==
        ErrorKind::BehindCamera);
  CHECK(kind_of([&] { synthesize_correspondences(box_in_view(), motion, kCam, {-1.0, 0, 0, 0}); }) ==
        ErrorKind::ConfigInvalid);
}

TEST_CASE("zero-noise synthetic pairs lift to the planted motion") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Pose motion = Pose::from_rotation_vector(Point3(rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1)),
                                                   Point3(rng.normal(0, 0.02), rng.normal(0, 0.02), rng.normal(0, 0.02)));
    const SyntheticPair p = synthesize_correspondences(box_in_view(), motion, kCam, {});
    const PointPairSet pairs = lift_correspondences(p.correspondences, p.depth_src, p.depth_dst, kCam);
    CHECK(pairs.size() == p.correspondences.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) CHECK((motion.apply(pairs.src[i]) - pairs.dst[i]).norm() < 1e-6);
    const PoseError e = pose_error(fit_rigid_svd(pairs), motion);
    CHECK(e.rotation < 1e-6);
    CHECK(e.translation < 1e-6);
  }
}

TEST_CASE("depth noise bound on lifted synthetic pairs") {
  // Each endpoint carries independent depth noise along its own viewing ray,
  // so the residual scales with sigma * sqrt(|r1|^2 + |r2|^2) where r = p / z.
  const double sigma = 0.002;
  const Pose motion = Pose::from_axis_angle(Point3(0, 1, 0), 0.1, Point3(0.01, 0.0, 0.02));
  std::size_t total = 0, within = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SyntheticPair p = synthesize_correspondences(box_in_view(), motion, kCam, {0.0, 0.0, sigma, seed});
    const PointPairSet pairs = lift_correspondences(p.correspondences, p.depth_src, p.depth_dst, kCam);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double r1 = (pairs.src[i] / pairs.src[i].z()).norm();
      const double r2 = (pairs.dst[i] / pairs.dst[i].z()).norm();
      const double bound = 3.0 * sigma * std::sqrt(r1 * r1 + r2 * r2);
      within += (motion.apply(pairs.src[i]) - pairs.dst[i]).norm() < bound;
      ++total;
    }
  }
  REQUIRE(total > 10000);
  CHECK(static_cast<double>(within) >= 0.99 * static_cast<double>(total));
}
