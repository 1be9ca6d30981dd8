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
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "pcm/geom/types.hpp"
#include "pcm/io/binary.hpp"

namespace pcm {

/// Integer voxel coordinate; ordering is lexicographic (i, j, k).
struct VoxelKey {
  std::int32_t i = 0, j = 0, k = 0;
  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& key) const {
    std::uint64_t h = splitmix64(static_cast<std::uint32_t>(key.i));
    h = splitmix64(h ^ static_cast<std::uint32_t>(key.j));
    return splitmix64(h ^ static_cast<std::uint32_t>(key.k));
  }
};

using KeySet = std::set<VoxelKey>;

/// Voxel grid parameters: cell (i,j,k) spans
/// [origin + key*resolution, origin + (key+1)*resolution) on each axis.
struct VoxelGrid {
  double resolution = 0.20;
  Point3 origin = Point3::Zero();

  void validate() const {
    if (!(resolution > 0.0) || !std::isfinite(resolution)) throw Error("voxel resolution must be positive");
    if (!is_finite(origin)) throw Error("voxel origin is not finite");
  }

  VoxelKey key_of(const Point3& p) const {
    auto axis = [&](int a) {
      const double f = std::floor((p[a] - origin[a]) / resolution);
      if (!(f >= std::numeric_limits<std::int32_t>::min() && f <= std::numeric_limits<std::int32_t>::max()))
        throw Error("point outside the representable voxel key range");
      return static_cast<std::int32_t>(f);
    };
    return {axis(0), axis(1), axis(2)};
  }

  Point3 center_of(const VoxelKey& key) const {
    return origin + Point3(key.i + 0.5, key.j + 0.5, key.k + 0.5) * resolution;
  }

  friend bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
    return a.resolution == b.resolution && a.origin == b.origin;
  }
};

/// Occupied voxels with provenance: each key maps to the sorted ids of the
/// raw points (or synthetic insertion tags) that produced it.
struct VoxelScene {
  VoxelGrid grid;
  std::map<VoxelKey, std::vector<std::uint64_t>> voxels;

  std::size_t size() const { return voxels.size(); }
  bool empty() const { return voxels.empty(); }
  bool contains(const VoxelKey& k) const { return voxels.contains(k); }

  KeySet keys() const {
    KeySet out;
    for (const auto& [k, ids] : voxels) out.insert(out.end(), k);
    return out;
  }

  /// 64-bit digest over resolution, origin and the sorted occupied keys.
  std::uint64_t fingerprint() const {
    Fnv1a64 h;
    h.update_pod(grid.resolution);
    h.update_pod(grid.origin.x());
    h.update_pod(grid.origin.y());
    h.update_pod(grid.origin.z());
    for (const auto& [k, ids] : voxels) {
      h.update_pod(k.i);
      h.update_pod(k.j);
      h.update_pod(k.k);
    }
    return h.digest();
  }

  friend bool operator==(const VoxelScene& a, const VoxelScene& b) {
    return a.grid == b.grid && a.voxels == b.voxels;
  }
};

/// Floor-keys every point; provenance lists are sorted, so the result does
/// not depend on input order. Points without ids contribute their index.
inline VoxelScene voxelize(const PointCloud& cloud, double resolution, const Point3& origin) {
  VoxelScene scene;
  scene.grid = {resolution, origin};
  scene.grid.validate();
  for (std::size_t n = 0; n < cloud.size(); ++n) {
    const std::uint64_t id = cloud.has_ids() ? cloud.ids[n] : n;
    scene.voxels[scene.grid.key_of(cloud.points[n])].push_back(id);
  }
  for (auto& [k, ids] : scene.voxels) std::sort(ids.begin(), ids.end());
  return scene;
}

inline VoxelScene voxelize(const PointCloud& cloud, const VoxelGrid& grid) {
  return voxelize(cloud, grid.resolution, grid.origin);
}

/// Stable 64-bit tag of a voxel key.
inline std::uint64_t key_hash(const VoxelKey& k) { return VoxelKeyHash{}(k); }

/// One point per occupied voxel at its center, ordered by key.
inline PointCloud scene_points(const VoxelScene& scene) {
  PointCloud out;
  out.points.reserve(scene.size());
  out.ids.reserve(scene.size());
  for (const auto& [k, ids] : scene.voxels) out.push_back(scene.grid.center_of(k), key_hash(k));
  return out;
}

inline PointCloud key_centers(const KeySet& keys, const VoxelGrid& grid) {
  PointCloud out;
  out.points.reserve(keys.size());
  for (const auto& k : keys) out.push_back(grid.center_of(k), key_hash(k));
  return out;
}

/// Checks the provenance invariants: non-empty lists, ids unique across
/// voxels.
inline void validate_scene(const VoxelScene& scene) {
  scene.grid.validate();
  std::set<std::uint64_t> seen;
  for (const auto& [k, ids] : scene.voxels) {
    if (ids.empty()) throw Error("voxel with empty provenance");
    for (auto id : ids)
      if (!seen.insert(id).second) throw Error("provenance id appears in more than one voxel");
  }
}

// Native scene file, little-endian:
//   resolution f64, origin 3 x f64, count u64,
//   count x key (3 x i32) in sorted order,
//   count x provenance block (u32 n, n x u64 id).
inline io::Bytes encode_scene(const VoxelScene& scene) {
  io::ByteWriter w;
  w.put(scene.grid.resolution);
  w.put(scene.grid.origin.x());
  w.put(scene.grid.origin.y());
  w.put(scene.grid.origin.z());
  w.put(static_cast<std::uint64_t>(scene.size()));
  for (const auto& [k, ids] : scene.voxels) {
    w.put(k.i);
    w.put(k.j);
    w.put(k.k);
  }
  for (const auto& [k, ids] : scene.voxels) {
    w.put(static_cast<std::uint32_t>(ids.size()));
    for (auto id : ids) w.put(id);
  }
  return w.take();
}

inline VoxelScene decode_scene(std::span<const std::uint8_t> bytes, const std::string& origin = "scene") {
  io::ByteReader r(bytes, origin + ": truncated or corrupt native scene file");
  VoxelScene scene;
  scene.grid.resolution = r.get<double>();
  const double ox = r.get<double>(), oy = r.get<double>(), oz = r.get<double>();
  scene.grid.origin = Point3(ox, oy, oz);
  scene.grid.validate();
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining() / 12) throw Error(origin + ": truncated or corrupt native scene file");
  std::vector<VoxelKey> keys(count);
  for (auto& k : keys) {
    k.i = r.get<std::int32_t>();
    k.j = r.get<std::int32_t>();
    k.k = r.get<std::int32_t>();
  }
  for (std::size_t n = 0; n < keys.size(); ++n) {
    if (n > 0 && !(keys[n - 1] < keys[n])) throw Error(origin + ": native scene keys are not strictly sorted");
    const auto m = r.get<std::uint32_t>();
    if (m > r.remaining() / 8) throw Error(origin + ": truncated or corrupt native scene file");
    std::vector<std::uint64_t> ids(m);
    for (auto& id : ids) id = r.get<std::uint64_t>();
    scene.voxels.emplace_hint(scene.voxels.end(), keys[n], std::move(ids));
  }
  if (!r.at_end()) throw Error(origin + ": trailing bytes in native scene file");
  return scene;
}

inline void write_scene(const std::filesystem::path& path, const VoxelScene& scene) {
  io::write_file(path, encode_scene(scene));
}

inline VoxelScene read_scene(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_scene(bytes, path.string());
}

}  // namespace pcm
