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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "pcm/common.hpp"

namespace pcm {

/// World-space point in meters.
using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Ordered points with optional per-point provenance ids. An empty `ids`
/// vector means "no ids"; otherwise it is parallel to `points`.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_ids() const { return !ids.empty(); }

  void push_back(const Point3& p) { points.push_back(p); }
  void push_back(const Point3& p, std::uint64_t id) {
    points.push_back(p);
    ids.push_back(id);
  }

  void validate() const {
    if (has_ids() && ids.size() != points.size())
      throw Error("point cloud ids length does not match point count");
    for (const auto& p : points)
      if (!is_finite(p)) throw Error("point cloud contains a non-finite coordinate");
    if (has_ids()) {
      std::unordered_set<std::uint64_t> seen(ids.begin(), ids.end());
      if (seen.size() != ids.size()) throw Error("point cloud ids are not unique");
    }
  }
};

namespace detail {
inline void check_rotation(const Matrix3& r) {
  constexpr double kTol = 1e-9;
  if (!r.allFinite()) throw Error("rotation contains a non-finite entry");
  if ((r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff() > kTol)
    throw Error("rotation is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > kTol) throw Error("rotation determinant is not +1");
}
}  // namespace detail

/// Proper rigid motion x -> R x + t.
struct RigidTransform {
  Matrix3 rotation = Matrix3::Identity();
  Point3 translation = Point3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_quaternion(double w, double x, double y, double z, const Point3& t) {
    Eigen::Quaterniond q(w, x, y, z);
    if (q.norm() < 1e-12) throw Error("zero-length quaternion");
    q.normalize();
    return {q.toRotationMatrix(), t};
  }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const {
    const Matrix3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
  /// (*this) after `rhs`: x -> this(rhs(x)).
  RigidTransform compose(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  void validate() const {
    detail::check_rotation(rotation);
    if (!is_finite(translation)) throw Error("translation contains a non-finite entry");
  }
};

/// x -> s R x + t with s > 0.
struct SimilarityTransform {
  double scale = 1.0;
  Matrix3 rotation = Matrix3::Identity();
  Point3 translation = Point3::Zero();

  Point3 apply(const Point3& p) const { return scale * (rotation * p) + translation; }
  SimilarityTransform inverse() const {
    const Matrix3 rt = rotation.transpose();
    return {1.0 / scale, rt, -(rt * translation) / scale};
  }
  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw Error("similarity scale must be positive");
    detail::check_rotation(rotation);
    if (!is_finite(translation)) throw Error("translation contains a non-finite entry");
  }
};

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return a.compose(b);
}

/// Rigid motion G applied after a similarity: x -> G(s R x + t).
inline SimilarityTransform operator*(const RigidTransform& g, const SimilarityTransform& s) {
  return {s.scale, g.rotation * s.rotation, g.rotation * s.translation + g.translation};
}

inline Matrix3 rotation_z(double yaw) {
  return Eigen::AngleAxisd(yaw, Point3::UnitZ()).toRotationMatrix();
}

/// Z-Y-X (yaw, pitch, roll) Euler rotation.
inline Matrix3 rotation_ypr(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Point3::UnitZ()) * Eigen::AngleAxisd(pitch, Point3::UnitY()) *
          Eigen::AngleAxisd(roll, Point3::UnitX()))
      .toRotationMatrix();
}

inline PointCloud transformed(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  out.ids = cloud.ids;
  return out;
}

}  // namespace pcm
