#include "ditto/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ditto/error.hpp"

namespace ditto {

Eigen::Quaterniond canonicalize(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond n = q;
  // Renormalizing a unit quaternion perturbs the last bits; skip it so the
  // operation is idempotent.
  if (std::abs(q.squaredNorm() - 1.0) > 8.0 * std::numeric_limits<double>::epsilon()) n.normalize();
  bool flip = false;
  if (n.w() < 0.0) {
    flip = true;
  } else if (n.w() == 0.0) {
    for (double c : {n.x(), n.y(), n.z()}) {
      if (c != 0.0) {
        flip = c < 0.0;
        break;
      }
    }
  }
  if (flip) n.coeffs() = -n.coeffs();
  return n;
}

Pose::Pose(const Eigen::Quaterniond& rotation, const Point3& translation)
    : rotation_(canonicalize(rotation)), translation_(translation) {}

Pose::Pose(const Eigen::Matrix3d& rotation, const Point3& translation)
    : Pose(Eigen::Quaterniond(rotation), translation) {}

Pose Pose::from_axis_angle(const Point3& axis, double angle, const Point3& t) {
  return {Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), t};
}

Pose Pose::from_rotation_vector(const Point3& rotvec, const Point3& t) {
  const double angle = rotvec.norm();
  if (angle == 0.0) return from_translation(t);
  return from_axis_angle(rotvec / angle, angle, t);
}

Pose Pose::from_wxyz(double w, double x, double y, double z, const Point3& t) {
  return {Eigen::Quaterniond(w, x, y, z), t};
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

bool Pose::operator==(const Pose& other) const {
  return rotation_.coeffs() == other.rotation_.coeffs() && translation_ == other.translation_;
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

Pose inverse(const Pose& a) {
  const Eigen::Quaterniond qi = a.rotation().conjugate();
  return {qi, -(qi * a.translation())};
}

namespace {

// Slerp from q0 (t = 0) to q1 (t = 1) along the shortest arc.
Eigen::Quaterniond slerp_shortest(const Eigen::Quaterniond& q0, Eigen::Quaterniond q1, double t) {
  double dot = q0.coeffs().dot(q1.coeffs());
  if (dot < 0.0) {
    q1.coeffs() = -q1.coeffs();
    dot = -dot;
  }
  Eigen::Vector4d out;
  if (dot > 1.0 - 1e-9) {
    out = (1.0 - t) * q0.coeffs() + t * q1.coeffs();
  } else {
    const double theta = std::acos(std::min(dot, 1.0));
    const double s = std::sin(theta);
    out = (std::sin((1.0 - t) * theta) / s) * q0.coeffs() + (std::sin(t * theta) / s) * q1.coeffs();
  }
  Eigen::Quaterniond q;
  q.coeffs() = out.normalized();
  return q;
}

}  // namespace

Pose slerp_pose(const Pose& a, const Pose& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "slerp_pose: alpha must lie in [0,1]");
  }
  if (alpha == 1.0 || a == b) return a;
  if (alpha == 0.0) return b;
  const Eigen::Quaterniond q = slerp_shortest(b.rotation(), a.rotation(), alpha);
  return {q, alpha * a.translation() + (1.0 - alpha) * b.translation()};
}

PoseError pose_error(const Pose& a, const Pose& b) {
  // Angle of R_a R_b^T from the relative quaternion: equal to
  // arccos((tr - 1) / 2) but accurate near 0 and pi, and exactly 0 for a == b.
  const Eigen::Quaterniond d = a.rotation() * b.rotation().conjugate();
  const double angle = 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
  return {angle, (a.translation() - b.translation()).norm()};
}

void CameraIntrinsics::validate() const {
  const bool ok = std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0 && width > 0 &&
                  height > 0 && cx >= 0.0 && cx < width && cy >= 0.0 && cy < height;
  if (!ok) {
    throw Error(ErrorKind::InvalidArgument,
                "invalid camera intrinsics (need fx,fy > 0 and principal point inside the image)");
  }
}

Point3 backproject(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!std::isfinite(depth) || depth <= 0.0) {
    throw Error(ErrorKind::InvalidDepth, "backproject: invalid depth " + std::to_string(depth));
  }
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

Pixel project(const Point3& p, const CameraIntrinsics& k) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Point3 centroid(const PointCloud& cloud) {
  Point3 sum = Point3::Zero();
  for (const auto& p : cloud) sum += p;
  return cloud.empty() ? sum : Point3(sum / static_cast<double>(cloud.size()));
}

}  // namespace ditto
