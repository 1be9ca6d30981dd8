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

#include <cmath>
#include <optional>
#include <string>

#include "pcm/geom/types.hpp"

namespace pcm {

/// Continuous image coordinate plus camera-frame depth. Pixel index of a
/// Pixel is (floor(u), floor(v)).
struct Pixel {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;

  int col() const { return static_cast<int>(std::floor(u)); }
  int row() const { return static_cast<int>(std::floor(v)); }
};

/// Distortion-free pinhole camera. `extrinsics` maps world to camera frame
/// (x right, y down, z forward).
struct CameraModel {
  std::string name;
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  RigidTransform extrinsics;

  void validate() const {
    if (width <= 0 || height <= 0) throw Error("camera image size must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error("camera focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw Error("camera principal point outside the image");
    extrinsics.validate();
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  /// Camera center in world coordinates.
  Point3 center() const { return extrinsics.inverse().translation; }

  /// World-frame direction of the ray through image point (u, v).
  Point3 ray_direction(double u, double v) const {
    const Point3 d_cam((u - cx) / fx, (v - cy) / fy, 1.0);
    return (extrinsics.rotation.transpose() * d_cam).normalized();
  }
};

/// Projects a world point. Empty when the point is behind the camera or
/// outside [0,width) x [0,height).
inline std::optional<Pixel> project_point(const Point3& p, const CameraModel& cam) {
  const Point3 c = cam.extrinsics.apply(p);
  if (!(c.z() > 0.0)) return std::nullopt;
  const double u = cam.fx * (c.x() / c.z()) + cam.cx;
  const double v = cam.fy * (c.y() / c.z()) + cam.cy;
  if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) return std::nullopt;
  return Pixel{u, v, c.z()};
}

/// Direction (world frame, camera-depth parameterized) of the ray through the
/// center of pixel (col, row).
inline Point3 pixel_center_ray(const CameraModel& cam, int col, int row) {
  const Point3 dc((col + 0.5 - cam.cx) / cam.fx, (row + 0.5 - cam.cy) / cam.fy, 1.0);
  return cam.extrinsics.rotation.transpose() * dc;
}

inline Point3 unproject(const Pixel& px, const CameraModel& cam) {
  const Point3 c((px.u - cam.cx) / cam.fx * px.depth, (px.v - cam.cy) / cam.fy * px.depth, px.depth);
  return cam.extrinsics.inverse().apply(c);
}

/// Camera at `eye` looking at `target`, world z up.
inline CameraModel look_at_camera(const Point3& eye, const Point3& target, int width, int height,
                                  double focal) {
  const Point3 forward = (target - eye).normalized();
  Point3 right = forward.cross(Point3::UnitZ());
  if (right.norm() < 1e-9) throw Error("look-at direction parallel to the up axis");
  right.normalize();
  const Point3 down = forward.cross(right);
  Matrix3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.extrinsics = {r, -(r * eye)};
  return cam;
}

}  // namespace pcm
