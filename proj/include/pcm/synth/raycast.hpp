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

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "pcm/geom/camera.hpp"
#include "pcm/scene/builder.hpp"

namespace pcm {

struct RayHit {
  VoxelKey key;
  double t_enter = 0.0, t_exit = 0.0;  // ray parameter, in units of the direction
};

/// Dense occupancy over the bounding box of a scene, traversed with a 3D DDA.
class VoxelRaycaster {
 public:
  explicit VoxelRaycaster(const VoxelScene& scene) : grid_(scene.grid) {
    if (scene.empty()) throw Error("empty point set");
    lo_ = hi_ = scene.voxels.begin()->first;
    for (const auto& [k, ids] : scene.voxels) {
      lo_ = {std::min(lo_.i, k.i), std::min(lo_.j, k.j), std::min(lo_.k, k.k)};
      hi_ = {std::max(hi_.i, k.i), std::max(hi_.j, k.j), std::max(hi_.k, k.k)};
    }
    n_[0] = hi_.i - lo_.i + 1;
    n_[1] = hi_.j - lo_.j + 1;
    n_[2] = hi_.k - lo_.k + 1;
    occ_.assign(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2], 0);
    for (const auto& [k, ids] : scene.voxels) occ_[index(k.i - lo_.i, k.j - lo_.j, k.k - lo_.k)] = 1;
  }

  /// First occupied cell along o + t d for t in [0, t_max].
  std::optional<RayHit> cast(const Point3& o, const Point3& d, double t_max) const {
    const double res = grid_.resolution;
    const Point3 box_lo = grid_.origin + Point3(lo_.i, lo_.j, lo_.k) * res;
    const Point3 box_hi = grid_.origin + Point3(hi_.i + 1, hi_.j + 1, hi_.k + 1) * res;
    double t0 = 0.0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      if (d[a] == 0.0) {
        if (o[a] < box_lo[a] || o[a] >= box_hi[a]) return std::nullopt;
        continue;
      }
      double ta = (box_lo[a] - o[a]) / d[a], tb = (box_hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (!(t0 <= t1)) return std::nullopt;

    const Point3 p = o + d * t0;
    int cell[3], step[3];
    double t_next[3], t_delta[3];
    for (int a = 0; a < 3; ++a) {
      cell[a] = static_cast<int>(std::floor((p[a] - grid_.origin[a]) / res)) - lo(a);
      cell[a] = std::clamp(cell[a], 0, n_[a] - 1);
      if (d[a] > 0) {
        step[a] = 1;
        t_next[a] = (grid_.origin[a] + (cell[a] + lo(a) + 1) * res - o[a]) / d[a];
        t_delta[a] = res / d[a];
      } else if (d[a] < 0) {
        step[a] = -1;
        t_next[a] = (grid_.origin[a] + (cell[a] + lo(a)) * res - o[a]) / d[a];
        t_delta[a] = -res / d[a];
      } else {
        step[a] = 0;
        t_next[a] = t_delta[a] = std::numeric_limits<double>::infinity();
      }
    }
    double t = t0;
    while (t <= t1) {
      const int axis = t_next[0] < t_next[1] ? (t_next[0] < t_next[2] ? 0 : 2) : (t_next[1] < t_next[2] ? 1 : 2);
      if (occ_[index(cell[0], cell[1], cell[2])])
        return RayHit{{cell[0] + lo_.i, cell[1] + lo_.j, cell[2] + lo_.k}, t, t_next[axis]};
      t = t_next[axis];
      cell[axis] += step[axis];
      if (cell[axis] < 0 || cell[axis] >= n_[axis]) break;
      t_next[axis] += t_delta[axis];
    }
    return std::nullopt;
  }

 private:
  int lo(int a) const { return a == 0 ? lo_.i : a == 1 ? lo_.j : lo_.k; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * n_[1] + j) * n_[0] + i;
  }

  VoxelGrid grid_;
  VoxelKey lo_, hi_;
  int n_[3] = {0, 0, 0};
  std::vector<std::uint8_t> occ_;
};

/// One return per pixel: the midpoint of the ray's interval inside the first
/// occupied cell, in the camera frame (pose = camera to world).
inline PosedScan render_depth_scan(const VoxelRaycaster& world, const CameraModel& cam, double max_depth = 200.0) {
  cam.validate();
  PosedScan scan;
  scan.pose = cam.extrinsics.inverse();
  const Point3 o = cam.center();
  for (int row = 0; row < cam.height; ++row)
    for (int col = 0; col < cam.width; ++col) {
      const auto hit = world.cast(o, pixel_center_ray(cam, col, row), max_depth);
      if (!hit) continue;
      const double t = 0.5 * (hit->t_enter + hit->t_exit);
      const Point3 dc((col + 0.5 - cam.cx) / cam.fx, (row + 0.5 - cam.cy) / cam.fy, 1.0);
      scan.cloud.push_back(dc * t);
    }
  return scan;
}

}  // namespace pcm
