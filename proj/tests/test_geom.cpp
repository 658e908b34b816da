#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ditto/error.hpp"
#include "ditto/geom.hpp"
#include "ditto/json_io.hpp"
#include "ditto/rng.hpp"
#include "oracles.hpp"

using namespace ditto;
constexpr double kPi = std::numbers::pi;

namespace {

Pose rz(double deg, const Point3& t = Point3::Zero()) {
  return Pose::from_axis_angle(Point3::UnitZ(), deg * kPi / 180.0, t);
}

bool near(const Pose& a, const Pose& b, double tol) {
  const PoseError e = pose_error(a, b);
  return e.rotation <= tol && e.translation <= tol;
}

bool canonical(const Eigen::Quaterniond& q) {
  if (q.w() > 0) return true;
  if (q.w() < 0) return false;
  for (double c : {q.x(), q.y(), q.z()}) {
    if (c != 0) return c > 0;
  }
  return true;
}

}  // namespace

TEST_CASE("compose applies the right operand first") {
  Rng rng(1);
  const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng);
  const Point3 p(0.3, -0.2, 0.9);
  CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  CHECK(compose(Pose::identity(), a) == a);
  CHECK(near(compose(a, inverse(a)), Pose::identity(), 1e-9));
  CHECK(near(compose(rz(30), rz(60)), rz(90), 1e-12));
}

TEST_CASE("compose is associative on random triples") {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng), c = oracle::random_pose(rng);
    CHECK(near(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9));
  }
}

TEST_CASE("inverse") {
  CHECK(inverse(Pose::identity()) == Pose::identity());
  const Pose t = inverse(Pose::from_translation({1, 2, 3}));
  CHECK(t.translation().isApprox(Point3(-1, -2, -3)));
  CHECK(t.rotation().w() == 1.0);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Pose p = oracle::random_pose(rng);
    CHECK(near(inverse(inverse(p)), p, 1e-12));
  }
}

TEST_CASE("quaternions stay unit and canonical") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    for (const Pose& p : {a, compose(a, b), inverse(a), slerp_pose(a, b, rng.uniform())}) {
      CHECK(std::abs(p.rotation().norm() - 1.0) < 1e-9);
      CHECK(canonical(p.rotation()));
    }
  }
  // w == 0: first nonzero component positive.
  const Eigen::Quaterniond q = canonicalize(Eigen::Quaterniond(0.0, 0.0, -1.0, 0.0));
  CHECK(q.y() == 1.0);
  CHECK(canonical(q));
}

TEST_CASE("canonicalization is idempotent and preserves the rotation action") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    const Eigen::Quaterniond c = canonicalize(q);
    CHECK(canonicalize(c).coeffs() == c.coeffs());
    const Point3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK(((c * p) - (q * p)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("slerp_pose endpoints and midpoint") {
  Rng rng(6);
  const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng);
  CHECK(slerp_pose(a, b, 1.0) == a);
  CHECK(slerp_pose(a, b, 0.0) == b);
  CHECK(near(slerp_pose(Pose::identity(), rz(90), 0.5), rz(45), 1e-9));
  const Pose s = slerp_pose(Pose::identity(), Pose::from_translation({2, 0, 0}), 0.25);
  CHECK(s.translation().isApprox(Point3(1.5, 0, 0), 1e-15));
  CHECK_THROWS_AS(slerp_pose(a, b, 1.5), Error);
  CHECK_THROWS_AS(slerp_pose(a, b, -0.1), Error);
}

TEST_CASE("slerp_pose rotation angle to a is (1 - alpha) of the geodesic") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const double alpha = rng.uniform();
    const double theta = oracle::rotation_angle(a.rotation_matrix(), b.rotation_matrix());
    const Pose s = slerp_pose(a, b, alpha);
    CHECK(std::abs(oracle::rotation_angle(s.rotation_matrix(), a.rotation_matrix()) - (1 - alpha) * theta) < 1e-9);
  }
}

TEST_CASE("slerp_pose takes the short arc and survives nearly equal rotations") {
  const Pose a = rz(170), b = rz(-170);
  const Pose mid = slerp_pose(a, b, 0.5);
  CHECK(std::abs(oracle::rotation_angle(mid.rotation_matrix(), rz(180).rotation_matrix())) < 1e-9);
  const Pose c = Pose::from_axis_angle(Point3::UnitX(), 1e-12);
  const Pose m = slerp_pose(Pose::identity(), c, 0.5);
  CHECK(std::isfinite(m.rotation().w()));
  CHECK(pose_error(m, Pose::identity()).rotation < 1e-11);
}

TEST_CASE("pose_error") {
  Rng rng(8);
  const Pose p = oracle::random_pose(rng);
  CHECK(pose_error(p, p).rotation == 0.0);
  CHECK(pose_error(p, p).translation == 0.0);
  CHECK(pose_error(Pose::identity(), rz(90)).rotation == doctest::Approx(kPi / 2).epsilon(1e-14));
  CHECK(pose_error(Pose::identity(), Pose::from_translation({3, 4, 0})).translation == 5.0);
  CHECK(pose_error(Pose::identity(), rz(180)).rotation == doctest::Approx(kPi).epsilon(1e-14));
}

TEST_CASE("pose_error agrees with the arccos definition and is symmetric") {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const Eigen::Matrix3d m = a.rotation_matrix() * b.rotation_matrix().transpose();
    const double ref = std::acos(std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0));
    const PoseError e = pose_error(a, b);
    CHECK(std::abs(e.rotation - ref) < 1e-7);  // arccos itself is only ~1e-8 accurate near 0 and pi
    CHECK(std::abs(e.rotation - oracle::rotation_angle(a.rotation_matrix(), b.rotation_matrix())) < 1e-12);
    CHECK(std::abs(e.rotation - pose_error(b, a).rotation) < 1e-12);
    CHECK(e.rotation >= 0.0);
    CHECK(e.rotation <= kPi);
  }
}

TEST_CASE("backproject") {
  const CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  CHECK(backproject(50, 50, 1.0, k) == Point3(0, 0, 1));
  CHECK(backproject(150, 50, 2.0, k) == Point3(2, 0, 2));
  CHECK_THROWS_AS(backproject(10, 10, 0.0, k), Error);
  try {
    backproject(10, 10, std::nan(""), k);
    FAIL("expected InvalidDepth");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidDepth);
  }
  CHECK_THROWS_AS(backproject(10, 10, -1.0, k), Error);
  CHECK_THROWS_AS(backproject(10, 10, std::numeric_limits<double>::infinity(), k), Error);
}

TEST_CASE("projection inverts back-projection") {
  const CameraIntrinsics k{612.3, 608.9, 321.7, 238.2, 640, 480};
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(0, 640), v = rng.uniform(0, 480), d = rng.uniform(0.05, 20.0);
    const Pixel px = project(backproject(u, v, d, k), k);
    CHECK(std::abs(px.u - u) < 1e-9);
    CHECK(std::abs(px.v - v) < 1e-9);
  }
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(CameraIntrinsics({100, 100, 50, 50, 100, 100}).validate());
  CHECK_THROWS_AS(CameraIntrinsics({0, 100, 50, 50, 100, 100}).validate(), Error);
  CHECK_THROWS_AS(CameraIntrinsics({100, 100, 100, 50, 100, 100}).validate(), Error);
  CHECK_THROWS_AS(CameraIntrinsics({100, 100, -1, 50, 100, 100}).validate(), Error);
}

TEST_CASE("pose JSON round trip and validation") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Pose p = oracle::random_pose(rng);
    CHECK(pose_from_json(pose_to_json(p)) == p);
  }
  const auto j = nlohmann::json::parse(R"({"t":[1,2,3],"q":[1,0,0,0]})");
  CHECK(pose_from_json(j).translation() == Point3(1, 2, 3));
  CHECK_THROWS_AS(pose_from_json(nlohmann::json::parse(R"({"t":[1,2,3],"q":[2,0,0,0]})")), Error);
  CHECK_THROWS_AS(pose_from_json(nlohmann::json::parse(R"({"t":[1,2],"q":[1,0,0,0]})")), Error);
  CHECK_THROWS_AS(pose_from_json(nlohmann::json::parse(R"({"q":[1,0,0,0]})")), Error);
}
