#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <vector>

namespace ditto {

/// Camera-frame or object-frame point, meters.
using Point3 = Eigen::Vector3d;
using PointCloud = std::vector<Point3>;

/// Rigid transform: unit quaternion (stored w,x,y,z) plus translation.
/// Every constructing operation normalizes and canonicalizes the quaternion
/// (w >= 0; for w == 0 the first nonzero vector component is positive).
class Pose {
 public:
  Pose() : rotation_(Eigen::Quaterniond::Identity()), translation_(Point3::Zero()) {}
  Pose(const Eigen::Quaterniond& rotation, const Point3& translation);
  Pose(const Eigen::Matrix3d& rotation, const Point3& translation);

  static Pose identity() { return {}; }
  static Pose from_translation(const Point3& t) { return {Eigen::Quaterniond::Identity(), t}; }
  static Pose from_axis_angle(const Point3& axis, double angle, const Point3& t = Point3::Zero());
  /// Rotation about a unit axis via a rotation vector (axis * angle).
  static Pose from_rotation_vector(const Point3& rotvec, const Point3& t = Point3::Zero());
  /// Builds from [w,x,y,z] coefficients; normalizes.
  static Pose from_wxyz(double w, double x, double y, double z, const Point3& t);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }

  bool operator==(const Pose& other) const;

 private:
  Eigen::Quaterniond rotation_;
  Point3 translation_;
};

Eigen::Quaterniond canonicalize(const Eigen::Quaterniond& q);

/// result.apply(p) == a.apply(b.apply(p))
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// Shortest-arc quaternion slerp plus linear translation blend.
/// alpha == 1 returns `a`, alpha == 0 returns `b`.
Pose slerp_pose(const Pose& a, const Pose& b, double alpha);

struct PoseError {
  double rotation = 0.0;     // radians, [0, pi]
  double translation = 0.0;  // meters
};

/// Angle-axis rotation distance and Euclidean translation distance.
PoseError pose_error(const Pose& a, const Pose& b);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidArgument when the invariants fail.
  void validate() const;
  bool operator==(const CameraIntrinsics&) const = default;
};

/// Pinhole back-projection. Throws InvalidDepth for depth <= 0, NaN, inf.
Point3 backproject(double u, double v, double depth, const CameraIntrinsics& k);

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole projection; caller guarantees p.z() > 0.
Pixel project(const Point3& p, const CameraIntrinsics& k);

Point3 centroid(const PointCloud& cloud);

}  // namespace ditto
