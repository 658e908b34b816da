#pragma once

#include <json.hpp>

#include <string>

#include "ditto/geom.hpp"

namespace ditto {

/// {"t":[x,y,z],"q":[w,x,y,z]}
nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j, const std::string& where = "pose");

nlohmann::json point_to_json(const Point3& p);
Point3 point_from_json(const nlohmann::json& j, const std::string& where = "point");

nlohmann::json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

/// Field access that throws Malformed naming the missing/ill-typed key.
const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& where);
double require_number(const nlohmann::json& j, const char* key, const std::string& where);

}  // namespace ditto
