#include "ditto/json_io.hpp"

#include <cmath>

#include "ditto/error.hpp"

namespace ditto {

using nlohmann::json;

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::Malformed, where + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

double require_number(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    throw Error(ErrorKind::Malformed, where + ": field \"" + key + "\" must be a finite number");
  }
  return v.get<double>();
}

namespace {

template <int N>
Eigen::Matrix<double, N, 1> vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N) {
    throw Error(ErrorKind::Malformed, where + ": expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[i].is_number() || !std::isfinite(j[i].get<double>())) {
      throw Error(ErrorKind::Malformed, where + ": element " + std::to_string(i) + " is not a finite number");
    }
    v[i] = j[i].get<double>();
  }
  return v;
}

}  // namespace

json pose_to_json(const Pose& p) {
  const auto& q = p.rotation();
  const auto& t = p.translation();
  return {{"t", {t.x(), t.y(), t.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose pose_from_json(const json& j, const std::string& where) {
  const Point3 t = vector_from_json<3>(require(j, "t", where), where + ".t");
  const Eigen::Vector4d q = vector_from_json<4>(require(j, "q", where), where + ".q");
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw Error(ErrorKind::Malformed, where + ".q: quaternion is not unit length");
  }
  return Pose::from_wxyz(q[0], q[1], q[2], q[3], t);
}

json point_to_json(const Point3& p) { return {p.x(), p.y(), p.z()}; }

Point3 point_from_json(const json& j, const std::string& where) { return vector_from_json<3>(j, where); }

json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  const std::string where = "intrinsics";
  CameraIntrinsics k;
  k.fx = require_number(j, "fx", where);
  k.fy = require_number(j, "fy", where);
  k.cx = require_number(j, "cx", where);
  k.cy = require_number(j, "cy", where);
  k.width = static_cast<int>(require_number(j, "width", where));
  k.height = static_cast<int>(require_number(j, "height", where));
  try {
    k.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Malformed, e.what());
  }
  return k;
}

}  // namespace ditto
