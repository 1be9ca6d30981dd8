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

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

#include "pcm/edit/patch_db.hpp"
#include "pcm/scene/cuboid.hpp"
#include "pcm/scene/taxonomy.hpp"
#include "pcm/scene/voxel_scene.hpp"

namespace pcm {

struct Insertion {
  std::string patch_id;
  RigidTransform placement;
  /// Sorted, equal to the voxelization of the placed patch.
  std::vector<VoxelKey> inserted_keys;

  friend bool operator==(const Insertion& a, const Insertion& b) {
    return a.patch_id == b.patch_id && a.placement.rotation == b.placement.rotation &&
           a.placement.translation == b.placement.translation && a.inserted_keys == b.inserted_keys;
  }
};

/// Trackable edit of one base scene.
struct EditDelta {
  KeySet removed_keys;
  std::vector<Insertion> insertions;
  std::uint64_t scene_fingerprint = 0;

  bool empty() const { return removed_keys.empty() && insertions.empty(); }
  KeySet inserted_keys() const {
    KeySet out;
    for (const auto& ins : insertions) out.insert(ins.inserted_keys.begin(), ins.inserted_keys.end());
    return out;
  }
  friend bool operator==(const EditDelta&, const EditDelta&) = default;
};

struct AxisAlignedBox {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Zero();
  bool contains(const Point3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct Sphere {
  Point3 center = Point3::Zero();
  double radius = 0.0;
  bool contains(const Point3& p) const { return (p - center).squaredNorm() <= radius * radius; }
};

/// Declarative voxel selection; all regions are closed sets.
using SelectionRegion = std::variant<AxisAlignedBox, Sphere, Cuboid>;

inline bool region_contains(const SelectionRegion& region, const Point3& p) {
  return std::visit([&](const auto& r) { return r.contains(p); }, region);
}

inline void validate_region(const SelectionRegion& region) {
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, AxisAlignedBox>) {
          if (!((r.max.array() >= r.min.array()).all())) throw Error("selection box has min > max");
        } else if constexpr (std::is_same_v<T, Sphere>) {
          if (!(r.radius >= 0.0)) throw Error("selection sphere radius must be non-negative");
        } else {
          r.validate();
        }
      },
      region);
}

// Provenance tag of an inserted voxel:
//   bit 63 set | patch hash (23 bits) | insertion ordinal (16 bits) | key index (24 bits)
inline std::uint64_t insertion_tag(const std::string& patch_id, std::size_t ordinal, std::size_t index) {
  if (ordinal >= (1u << 16) || index >= (1u << 24)) throw Error("insertion too large to tag");
  return (1ULL << 63) | ((fnv1a64(patch_id) & 0x7fffffULL) << 40) | (static_cast<std::uint64_t>(ordinal) << 24) |
         static_cast<std::uint64_t>(index);
}

inline bool is_insertion_tag(std::uint64_t id) { return (id >> 63) != 0; }

/// Removes occupied voxels whose center lies inside a static-labeled cuboid.
inline EditDelta delete_by_cuboid(const VoxelScene& scene, const Cuboid& cuboid, const LabelTaxonomy& taxonomy) {
  cuboid.validate();
  if (taxonomy.is_dynamic(cuboid.label)) throw Error("refusing dynamic label for static edit: '" + cuboid.label + "'");
  EditDelta d;
  d.scene_fingerprint = scene.fingerprint();
  for (const auto& [k, ids] : scene.voxels)
    if (cuboid.contains(scene.grid.center_of(k))) d.removed_keys.insert(d.removed_keys.end(), k);
  return d;
}

inline EditDelta delete_by_selection(const VoxelScene& scene, const SelectionRegion& region) {
  validate_region(region);
  EditDelta d;
  d.scene_fingerprint = scene.fingerprint();
  for (const auto& [k, ids] : scene.voxels)
    if (region_contains(region, scene.grid.center_of(k))) d.removed_keys.insert(d.removed_keys.end(), k);
  return d;
}

/// Voxel keys of a patch placed by `placement` on the scene grid.
inline std::vector<VoxelKey> placed_patch_keys(const Patch& patch, const RigidTransform& placement,
                                               const VoxelGrid& grid) {
  KeySet keys;
  for (const auto& p : patch.cloud().points) keys.insert(grid.key_of(placement.apply(p)));
  return {keys.begin(), keys.end()};
}

/// Yaw about z, then translate to (x, y, ground height at xy).
inline EditDelta insert_patch(const VoxelScene& scene, const PatchDatabase& db, const std::string& patch_id,
                              const Eigen::Vector2d& xy, double yaw, const GroundModel& ground) {
  const Patch& patch = db.get(patch_id);
  const auto h = ground.height_at(xy.x(), xy.y());
  if (!h) throw Error("no ground sample at (" + std::to_string(xy.x()) + ", " + std::to_string(xy.y()) + ")");
  Insertion ins;
  ins.patch_id = patch_id;
  ins.placement = {rotation_z(yaw), Point3(xy.x(), xy.y(), *h)};
  ins.inserted_keys = placed_patch_keys(patch, ins.placement, scene.grid);
  EditDelta d;
  d.scene_fingerprint = scene.fingerprint();
  d.insertions.push_back(std::move(ins));
  return d;
}

/// (occupied \ removed) ∪ inserted. Surviving voxels keep their provenance;
/// inserted voxels gain synthetic tags derived from the delta alone.
inline VoxelScene apply_delta(const VoxelScene& scene, const EditDelta& delta) {
  if (delta.scene_fingerprint != scene.fingerprint()) throw Error("delta does not target this scene");
  VoxelScene out;
  out.grid = scene.grid;
  auto removed = delta.removed_keys.begin();
  for (const auto& [k, ids] : scene.voxels) {
    if (removed != delta.removed_keys.end() && *removed < k)
      throw Error("delta removes a voxel the scene does not contain");
    if (removed != delta.removed_keys.end() && *removed == k) {
      ++removed;
      continue;
    }
    out.voxels.emplace_hint(out.voxels.end(), k, ids);
  }
  if (removed != delta.removed_keys.end()) throw Error("delta removes a voxel the scene does not contain");

  KeySet touched;
  for (std::size_t o = 0; o < delta.insertions.size(); ++o) {
    const auto& ins = delta.insertions[o];
    for (std::size_t n = 0; n < ins.inserted_keys.size(); ++n) {
      out.voxels[ins.inserted_keys[n]].push_back(insertion_tag(ins.patch_id, o, n));
      touched.insert(ins.inserted_keys[n]);
    }
  }
  for (const auto& k : touched) {
    auto& ids = out.voxels[k];
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return out;
}

/// Several deltas against the same base as one: union of removals,
/// insertions concatenated in order.
inline EditDelta combine_deltas(std::span<const EditDelta> deltas) {
  if (deltas.empty()) throw Error("no deltas to combine");
  EditDelta out;
  out.scene_fingerprint = deltas.front().scene_fingerprint;
  for (const auto& d : deltas) {
    if (d.scene_fingerprint != out.scene_fingerprint) throw Error("deltas target different scenes");
    out.removed_keys.insert(d.removed_keys.begin(), d.removed_keys.end());
    out.insertions.insert(out.insertions.end(), d.insertions.begin(), d.insertions.end());
  }
  return out;
}

/// Sequential composition: `second` was made against apply_delta(base,
/// first). Removed = R1 ∪ (R2 \ I1), insertions concatenated. Removing
/// voxels that `first` inserted cannot be expressed without editing its
/// insertion records, so that case is rejected.
inline EditDelta merge_deltas(const EditDelta& first, const EditDelta& second) {
  const KeySet inserted = first.inserted_keys();
  EditDelta out;
  out.scene_fingerprint = first.scene_fingerprint;
  out.removed_keys = first.removed_keys;
  for (const auto& k : second.removed_keys) {
    if (inserted.contains(k)) throw Error("second delta removes voxels inserted by the first");
    out.removed_keys.insert(k);
  }
  out.insertions = first.insertions;
  out.insertions.insert(out.insertions.end(), second.insertions.begin(), second.insertions.end());
  return out;
}

// ---- JSON forms ------------------------------------------------------------

inline nlohmann::json keys_to_json(const auto& keys) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& k : keys) a.push_back({k.i, k.j, k.k});
  return a;
}

inline std::vector<VoxelKey> keys_from_json(const nlohmann::json& a) {
  std::vector<VoxelKey> out;
  for (const auto& k : a) out.push_back({k.at(0).get<std::int32_t>(), k.at(1).get<std::int32_t>(), k.at(2).get<std::int32_t>()});
  return out;
}

inline nlohmann::json to_json(const EditDelta& d) {
  nlohmann::json ins = nlohmann::json::array();
  for (const auto& i : d.insertions) {
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot.push_back(i.placement.rotation(r, c));
    ins.push_back({{"patch_id", i.patch_id},
                   {"rotation", rot},
                   {"translation", {i.placement.translation.x(), i.placement.translation.y(), i.placement.translation.z()}},
                   {"inserted_keys", keys_to_json(i.inserted_keys)}});
  }
  return {{"scene_fingerprint", to_hex(d.scene_fingerprint)}, {"removed_keys", keys_to_json(d.removed_keys)}, {"insertions", ins}};
}

inline EditDelta delta_from_json(const nlohmann::json& j) {
  try {
    EditDelta d;
    d.scene_fingerprint = from_hex(j.at("scene_fingerprint").get<std::string>());
    for (const auto& k : keys_from_json(j.at("removed_keys"))) d.removed_keys.insert(k);
    for (const auto& i : j.at("insertions")) {
      Insertion ins;
      ins.patch_id = i.at("patch_id").get<std::string>();
      const auto rot = i.at("rotation").get<std::vector<double>>();
      const auto t = i.at("translation").get<std::vector<double>>();
      if (rot.size() != 9 || t.size() != 3) throw Error("insertion placement needs 9 + 3 values");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) ins.placement.rotation(r, c) = rot[r * 3 + c];
      ins.placement.translation = Point3(t[0], t[1], t[2]);
      ins.inserted_keys = keys_from_json(i.at("inserted_keys"));
      std::sort(ins.inserted_keys.begin(), ins.inserted_keys.end());
      d.insertions.push_back(std::move(ins));
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid delta JSON: " + std::string(e.what()));
  }
}

inline SelectionRegion region_from_json(const nlohmann::json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    auto vec = [&](const char* name) {
      const auto v = j.at(name).get<std::vector<double>>();
      if (v.size() != 3) throw Error(std::string("region field '") + name + "' needs 3 values");
      return Point3(v[0], v[1], v[2]);
    };
    SelectionRegion r;
    if (type == "box") r = AxisAlignedBox{vec("min"), vec("max")};
    else if (type == "sphere") r = Sphere{vec("center"), j.at("radius").get<double>()};
    else if (type == "cuboid") r = cuboid_from_json(j);
    else throw Error("unknown selection region type '" + type + "'");
    validate_region(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid selection region JSON: " + std::string(e.what()));
  }
}

inline nlohmann::json to_json(const SelectionRegion& region) {
  return std::visit(
      [](const auto& r) -> nlohmann::json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, AxisAlignedBox>) {
          return {{"type", "box"}, {"min", {r.min.x(), r.min.y(), r.min.z()}}, {"max", {r.max.x(), r.max.y(), r.max.z()}}};
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return {{"type", "sphere"}, {"center", {r.center.x(), r.center.y(), r.center.z()}}, {"radius", r.radius}};
        } else {
          auto j = to_json(r);
          j["type"] = "cuboid";
          return j;
        }
      },
      region);
}

}  // namespace pcm
