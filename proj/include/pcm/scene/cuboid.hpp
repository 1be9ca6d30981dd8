// Copyright 2026 The pcm-toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "pcm/geom/types.hpp"

namespace pcm {

/// Oriented box annotation. `rotation` maps the box frame to world;
/// dims are (length along local x, width along local y, height along local z).
struct Cuboid {
  Point3 center = Point3::Zero();
  Point3 dims = Point3::Ones();
  Matrix3 rotation = Matrix3::Identity();
  std::string label;

  void validate() const {
    if (!(dims.x() > 0 && dims.y() > 0 && dims.z() > 0)) throw Error("cuboid dims must be positive");
    if (!is_finite(center)) throw Error("cuboid center is not finite");
    RigidTransform{rotation, center}.validate();
  }

  /// Inclusive of faces, evaluated in the box frame.
  bool contains(const Point3& p) const {
    const Point3 local = rotation.transpose() * (p - center);
    return std::abs(local.x()) <= 0.5 * dims.x() && std::abs(local.y()) <= 0.5 * dims.y() &&
           std::abs(local.z()) <= 0.5 * dims.z();
  }
};

inline nlohmann::json to_json(const Cuboid& c) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)});
  return {{"center", {c.center.x(), c.center.y(), c.center.z()}},
          {"dims", {c.dims.x(), c.dims.y(), c.dims.z()}},
          {"rotation", rot},
          {"label", c.label}};
}

/// Accepts rotation as a 3x3 row-major array, {"yaw","pitch","roll"} in
/// radians, or {"quaternion": [w,x,y,z]}. Missing rotation is identity.
inline Cuboid cuboid_from_json(const nlohmann::json& j) {
  try {
    Cuboid c;
    const auto ctr = j.at("center").get<std::vector<double>>();
    const auto dims = j.at("dims").get<std::vector<double>>();
    if (ctr.size() != 3 || dims.size() != 3) throw Error("cuboid center/dims need 3 values");
    c.center = Point3(ctr[0], ctr[1], ctr[2]);
    c.dims = Point3(dims[0], dims[1], dims[2]);
    c.label = j.at("label").get<std::string>();
    if (j.contains("rotation")) {
      const auto& r = j.at("rotation");
      if (r.is_array()) {
        const auto m = r.get<std::vector<std::vector<double>>>();
        if (m.size() != 3) throw Error("cuboid rotation must be 3x3");
        for (int a = 0; a < 3; ++a) {
          if (m[a].size() != 3) throw Error("cuboid rotation must be 3x3");
          for (int b = 0; b < 3; ++b) c.rotation(a, b) = m[a][b];
        }
      } else if (r.contains("quaternion")) {
        const auto q = r.at("quaternion").get<std::vector<double>>();
        if (q.size() != 4) throw Error("quaternion needs 4 values");
        c.rotation = RigidTransform::from_quaternion(q[0], q[1], q[2], q[3], Point3::Zero()).rotation;
      } else {
        c.rotation = rotation_ypr(r.value("yaw", 0.0), r.value("pitch", 0.0), r.value("roll", 0.0));
      }
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid cuboid JSON: ") + e.what());
  }
}

inline std::vector<Cuboid> cuboids_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("cuboid document must be a JSON array");
  std::vector<Cuboid> out;
  for (const auto& item : j) out.push_back(cuboid_from_json(item));
  return out;
}

}  // namespace pcm
