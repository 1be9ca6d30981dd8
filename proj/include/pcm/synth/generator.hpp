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

// Deterministic street-scene fixtures on a z-up grid with origin (0,0,0):
// a one-voxel ground layer (k = 0) over [0, extent)^2, box-shell buildings,
// poles, signs and walls standing on it (k >= 1), dynamic vehicles that only
// appear in the raw scans, and an edit script that turns the up-to-date
// scene into an outdated one by removing some objects and inserting patches.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pcm/change/projector.hpp"
#include "pcm/edit/portable.hpp"
#include "pcm/edit/script.hpp"
#include "pcm/eval/metrics.hpp"
#include "pcm/io/png.hpp"
#include "pcm/synth/raycast.hpp"
#include "pcm/update/registration.hpp"

namespace pcm {

/// Counter-based generator: value n of stream s is a pure function of
/// (seed, s, n).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(seed ^ splitmix64(stream + 0x51ed))) {}

  std::uint64_t next() { return splitmix64(key_ ^ splitmix64(counter_++)); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct SceneRecipe {
  std::uint64_t seed = 1;
  double extent = 40.0;
  double resolution = 0.20;
  int buildings = 4;
  int poles = 6;
  int signs = 4;
  int walls = 3;
  int vehicles = 3;
  int removals = 3;    // objects present now but missing from the outdated map
  int insertions = 3;  // patches present only in the outdated map
  bool occluders = false;
  bool tall_structure = false;
  int camera_width = 320;
  int camera_height = 240;
  double focal = 260.0;
  double camera_height_m = 1.6;
  double camera_distance_min = 7.0;
  double camera_distance_max = 10.0;
  int lidar_scans = 4;
  int points_per_voxel = 2;

  void validate() const {
    if (!(resolution > 0.0)) throw Error("voxel resolution must be positive");
    if (!(extent >= 12.0)) throw Error("infeasible recipe: extent must be at least 12 m");
    if (buildings < 0 || poles < 0 || signs < 0 || walls < 0 || vehicles < 0 || removals < 0 || insertions < 0)
      throw Error("infeasible recipe: negative object count");
    if (removals > poles + signs + walls) throw Error("infeasible recipe: more removals than removable objects");
    if (camera_width <= 0 || camera_height <= 0 || !(focal > 0.0)) throw Error("invalid camera settings");
    if (!(camera_distance_min > 1.0) || camera_distance_max < camera_distance_min)
      throw Error("invalid camera distance range");
    if (lidar_scans <= 0 || points_per_voxel <= 0) throw Error("invalid scan settings");
  }

  /// The scenario where an edited structure rises far above the camera's
  /// vertical field of view.
  static SceneRecipe tall_building(std::uint64_t seed) {
    SceneRecipe r;
    r.seed = seed;
    r.buildings = 2;
    r.removals = 0;
    r.insertions = 0;
    r.tall_structure = true;
    return r;
  }
};

inline nlohmann::json to_json(const SceneRecipe& r) {
  return {{"seed", r.seed}, {"extent", r.extent}, {"resolution", r.resolution}, {"buildings", r.buildings},
          {"poles", r.poles}, {"signs", r.signs}, {"walls", r.walls}, {"vehicles", r.vehicles},
          {"removals", r.removals}, {"insertions", r.insertions}, {"occluders", r.occluders},
          {"tall_structure", r.tall_structure}, {"camera_width", r.camera_width},
          {"camera_height", r.camera_height}, {"focal", r.focal}, {"camera_height_m", r.camera_height_m},
          {"camera_distance_min", r.camera_distance_min}, {"camera_distance_max", r.camera_distance_max},
          {"lidar_scans", r.lidar_scans}, {"points_per_voxel", r.points_per_voxel}};
}

inline SceneRecipe recipe_from_json(const nlohmann::json& j) {
  try {
    SceneRecipe r;
    r.seed = j.value("seed", r.seed);
    r.extent = j.value("extent", r.extent);
    r.resolution = j.value("resolution", r.resolution);
    r.buildings = j.value("buildings", r.buildings);
    r.poles = j.value("poles", r.poles);
    r.signs = j.value("signs", r.signs);
    r.walls = j.value("walls", r.walls);
    r.vehicles = j.value("vehicles", r.vehicles);
    r.removals = j.value("removals", r.removals);
    r.insertions = j.value("insertions", r.insertions);
    r.occluders = j.value("occluders", r.occluders);
    r.tall_structure = j.value("tall_structure", r.tall_structure);
    r.camera_width = j.value("camera_width", r.camera_width);
    r.camera_height = j.value("camera_height", r.camera_height);
    r.focal = j.value("focal", r.focal);
    r.camera_height_m = j.value("camera_height_m", r.camera_height_m);
    r.camera_distance_min = j.value("camera_distance_min", r.camera_distance_min);
    r.camera_distance_max = j.value("camera_distance_max", r.camera_distance_max);
    r.lidar_scans = j.value("lidar_scans", r.lidar_scans);
    r.points_per_voxel = j.value("points_per_voxel", r.points_per_voxel);
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid recipe JSON: " + std::string(e.what()));
  }
}

enum class ObjectCategory { kBuilding, kPole, kSign, kWall, kOccluder, kPatch };
enum class EditRole { kNone, kRemoved, kInserted };

inline const char* to_string(ObjectCategory c) {
  switch (c) {
    case ObjectCategory::kBuilding: return "building";
    case ObjectCategory::kPole: return "pole";
    case ObjectCategory::kSign: return "sign";
    case ObjectCategory::kWall: return "wall";
    case ObjectCategory::kOccluder: return "occluder";
    case ObjectCategory::kPatch: return "patch";
  }
  return "?";
}

/// xy rectangle [x0, x1] x [y0, y1].
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Rect grown(double m) const { return {x0 - m, y0 - m, x1 + m, y1 + m}; }
  bool overlaps(const Rect& o) const { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  /// Whether the segment a-b meets the rectangle (slab test).
  bool hits_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const {
    const Eigen::Vector2d d = b - a;
    double t0 = 0.0, t1 = 1.0;
    const double lo[2] = {x0, y0}, hi[2] = {x1, y1};
    for (int ax = 0; ax < 2; ++ax) {
      if (d[ax] == 0.0) {
        if (a[ax] < lo[ax] || a[ax] > hi[ax]) return false;
        continue;
      }
      double ta = (lo[ax] - a[ax]) / d[ax], tb = (hi[ax] - a[ax]) / d[ax];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }
};

struct SynthObject {
  std::string id;
  ObjectCategory category = ObjectCategory::kPole;
  EditRole role = EditRole::kNone;
  std::vector<VoxelKey> keys;  // sorted; for insertions the placed patch keys
  Rect footprint;
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();  // plate normal, zero for round objects
  std::string label;
  bool tall = false;
  bool occluded = false;  // an occluder was put in front of its camera
  std::optional<InsertPatchOp> insert_op;
};

struct SynthBundle {
  SceneRecipe recipe;
  VoxelScene truth;     // up-to-date map
  VoxelScene outdated;  // outdated map
  EditScript script;
  std::vector<EditDelta> deltas;  // one per op, against `truth`
  std::vector<Cuboid> cuboids;    // annotations: dynamic vehicles, static removed objects
  std::vector<SynthObject> objects;
  std::vector<CameraModel> cameras;
  std::vector<int> camera_target;       // object index per camera
  std::vector<PosedScan> lidar_scans;   // raw input of the scene builder
  std::vector<PosedScan> camera_scans;  // synchronized per-camera depth scans of the current world
  ChangeSet3D changes;
  DiffResult truth_diff;
  PatchDatabase patches;
  GroundModel ground{1.0};
  SimilarityTransform predictor_frame;  // map-from-predictor similarity
};

namespace synth_detail {

inline std::vector<VoxelKey> sorted_keys(std::vector<VoxelKey> keys) {
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

inline Rect key_rect(const std::vector<VoxelKey>& keys, double res) {
  Rect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& k : keys) {
    r.x0 = std::min(r.x0, k.i * res);
    r.y0 = std::min(r.y0, k.j * res);
    r.x1 = std::max(r.x1, (k.i + 1) * res);
    r.y1 = std::max(r.y1, (k.j + 1) * res);
  }
  return r;
}

/// Patch of voxel-center points, `nx` x `ny` x `nz` cells centered on the
/// local origin in xy (odd sizes land on voxel centers).
inline Patch box_patch(const std::string& id, int nx, int ny, int nz, double res, const std::string& label) {
  PointCloud c;
  for (int a = 0; a < nx; ++a)
    for (int b = 0; b < ny; ++b)
      for (int h = 0; h < nz; ++h)
        c.push_back(Point3((a - (nx - 1) / 2.0) * res, (b - (ny - 1) / 2.0) * res, h * res));
  return Patch::make(id, std::move(c), label);
}

class Layout {
 public:
  explicit Layout(double extent) : extent_(extent) {}

  bool free(const Rect& r, double clearance) const {
    if (r.x0 < 1.0 || r.y0 < 1.0 || r.x1 > extent_ - 1.0 || r.y1 > extent_ - 1.0) return false;
    const Rect g = r.grown(clearance);
    return std::none_of(rects_.begin(), rects_.end(), [&](const Rect& o) { return o.overlaps(g); });
  }
  void add(const Rect& r) { rects_.push_back(r); }
  const std::vector<Rect>& rects() const { return rects_; }
  double extent() const { return extent_; }

 private:
  double extent_;
  std::vector<Rect> rects_;
};

}  // namespace synth_detail

inline LabelTaxonomy synth_taxonomy() { return LabelTaxonomy::defaults(); }

/// Patch catalogue used for insertions.
inline PatchDatabase synth_patches(double res) {
  PatchDatabase db;
  db.add(synth_detail::box_patch("kiosk", 5, 5, 11, res, "KIOSK"));
  db.add(synth_detail::box_patch("post", 1, 1, 12, res, "POST"));
  db.add(synth_detail::box_patch("panel", 7, 1, 6, res, "PANEL"));
  db.add(synth_detail::box_patch("tower", 21, 1, 150, res, "STRUCTURE"));
  return db;
}

namespace synth_detail {

struct LayoutRejected : Error {
  using Error::Error;
};

inline SynthBundle generate_attempt(const SceneRecipe& recipe, std::uint64_t salt) {
  using namespace synth_detail;
  const std::uint64_t seed = salt == 0 ? recipe.seed : splitmix64(recipe.seed ^ splitmix64(salt));
  const double res = recipe.resolution;
  const auto cells = static_cast<std::int32_t>(std::floor(recipe.extent / res));
  const VoxelGrid grid{res, Point3::Zero()};
  constexpr int kMaxTries = 400;

  SynthBundle b;
  b.recipe = recipe;
  b.patches = synth_patches(res);
  // Patches rest on the ground layer; their lowest points sit at the centers
  // of the k = 1 cells.
  b.ground = GroundModel::flat(0.0, 0.0, recipe.extent, recipe.extent, 1.5 * res, 1.0);

  Layout layout(recipe.extent);
  std::vector<SynthObject>& objs = b.objects;
  auto cell_of = [&](double x) { return static_cast<std::int32_t>(std::floor(x / res)); };
  auto place = [&](CounterRng& rng, ObjectCategory cat, auto make_keys, double clearance) {
    for (int t = 0; t < kMaxTries; ++t) {
      SynthObject o;
      o.category = cat;
      make_keys(rng, o);
      o.keys = sorted_keys(std::move(o.keys));
      o.footprint = key_rect(o.keys, res);
      if (!layout.free(o.footprint, clearance)) continue;
      layout.add(o.footprint);
      o.id = std::string(to_string(cat)) + "_" + std::to_string(objs.size());
      objs.push_back(std::move(o));
      return;
    }
    throw LayoutRejected(std::string("infeasible recipe: cannot place ") + to_string(cat));
  };
  auto rand_cell = [&](CounterRng& rng, int margin) {
    return static_cast<std::int32_t>(rng.integer(margin, cells - 1 - margin));
  };

  // Buildings: box shells with a roof.
  CounterRng rb(seed, 1);
  for (int n = 0; n < recipe.buildings; ++n)
    place(rb, ObjectCategory::kBuilding, [&](CounterRng& rng, SynthObject& o) {
      const int w = static_cast<int>(rng.integer(20, 40)), d = static_cast<int>(rng.integer(20, 40));
      const int h = static_cast<int>(rng.integer(20, 50));
      const auto i0 = rand_cell(rng, 5), j0 = rand_cell(rng, 5);
      for (int a = 0; a < w; ++a)
        for (int c = 0; c < d; ++c) {
          const bool edge = a == 0 || c == 0 || a == w - 1 || c == d - 1;
          for (int k = 1; k <= h; ++k)
            if (edge || k == h) o.keys.push_back({i0 + a, j0 + c, k});
        }
    }, 2.0);

  // Poles: single columns.
  CounterRng rp(seed, 2);
  for (int n = 0; n < recipe.poles; ++n)
    place(rp, ObjectCategory::kPole, [&](CounterRng& rng, SynthObject& o) {
      const auto i = rand_cell(rng, 10), j = rand_cell(rng, 10);
      const int h = static_cast<int>(rng.integer(10, 20));
      for (int k = 1; k <= h; ++k) o.keys.push_back({i, j, k});
      o.label = "BOLLARD";
    }, 1.5);

  // Signs: a column whose top three cells widen into a plate in one plane.
  CounterRng rs(seed, 3);
  for (int n = 0; n < recipe.signs; ++n)
    place(rs, ObjectCategory::kSign, [&](CounterRng& rng, SynthObject& o) {
      const auto i = rand_cell(rng, 10), j = rand_cell(rng, 10);
      const int h = static_cast<int>(rng.integer(10, 14));
      const bool along_x = rng.uniform() < 0.5;
      for (int k = 1; k <= h; ++k) {
        const int half = k > h - 3 ? 2 : 0;
        for (int a = -half; a <= half; ++a) o.keys.push_back(along_x ? VoxelKey{i + a, j, k} : VoxelKey{i, j + a, k});
      }
      o.normal = along_x ? Eigen::Vector2d(0, 1) : Eigen::Vector2d(1, 0);
      o.label = rng.uniform() < 0.5 ? "SIGN" : "STOP_SIGN";
    }, 1.5);

  // Walls: one-cell-thick plates.
  CounterRng rw(seed, 4);
  for (int n = 0; n < recipe.walls; ++n)
    place(rw, ObjectCategory::kWall, [&](CounterRng& rng, SynthObject& o) {
      const auto i = rand_cell(rng, 10), j = rand_cell(rng, 10);
      const int len = static_cast<int>(rng.integer(10, 25)), h = static_cast<int>(rng.integer(5, 10));
      const bool along_x = rng.uniform() < 0.5;
      for (int a = 0; a < len; ++a)
        for (int k = 1; k <= h; ++k) o.keys.push_back(along_x ? VoxelKey{i + a, j, k} : VoxelKey{i, j + a, k});
      o.normal = along_x ? Eigen::Vector2d(0, 1) : Eigen::Vector2d(1, 0);
    }, 1.5);

  // Choose removals among poles, signs and walls.
  CounterRng re(seed, 5);
  {
    std::vector<std::size_t> pool;
    for (std::size_t n = 0; n < objs.size(); ++n)
      if (objs[n].category != ObjectCategory::kBuilding) pool.push_back(n);
    for (std::size_t n = pool.size(); n > 1; --n) std::swap(pool[n - 1], pool[static_cast<std::size_t>(re.integer(0, static_cast<std::int64_t>(n) - 1))]);
    for (int n = 0; n < recipe.removals; ++n) objs[pool[static_cast<std::size_t>(n)]].role = EditRole::kRemoved;
  }

  // Insertions: patches placed on free ground.
  CounterRng ri(seed, 6);
  auto insert_object = [&](CounterRng& rng, const std::string& patch_id, bool tall) {
    const Patch& patch = b.patches.get(patch_id);
    place(rng, ObjectCategory::kPatch, [&](CounterRng& r, SynthObject& o) {
      const auto i = rand_cell(r, 15), j = rand_cell(r, 15);
      const bool quarter = r.uniform() < 0.5;
      const double yaw = quarter ? std::numbers::pi / 2 : 0.0;
      const RigidTransform placement{rotation_z(yaw), Point3((i + 0.5) * res, (j + 0.5) * res, 1.5 * res)};
      o.keys = placed_patch_keys(patch, placement, grid);
      o.label = patch.label();
      o.role = EditRole::kInserted;
      o.tall = tall;
      const bool plate = patch.footprint_max().y() - patch.footprint_min().y() < res;
      if (plate) o.normal = quarter ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
      o.insert_op = InsertPatchOp{patch_id, placement.translation.x(), placement.translation.y(), yaw};
    }, 1.5);
  };
  {
    static const char* kPatchCycle[] = {"kiosk", "post", "panel"};
    for (int n = 0; n < recipe.insertions; ++n) insert_object(ri, kPatchCycle[n % 3], false);
    if (recipe.tall_structure) insert_object(ri, "tower", true);
  }
  // Cameras, one per edited object.
  CounterRng rc(seed, 7);
  CounterRng ro(seed, 8);
  const double hfov_margin = 3.0;
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> sight_lines;
  for (std::size_t n = 0; n < objs.size(); ++n) {
    SynthObject& o = objs[n];
    if (o.role == EditRole::kNone) continue;
    const Eigen::Vector2d ctr(0.5 * (o.footprint.x0 + o.footprint.x1), 0.5 * (o.footprint.y0 + o.footprint.y1));
    std::vector<double> azimuths;
    if (o.normal.squaredNorm() > 0) {
      const double base = std::atan2(o.normal.y(), o.normal.x());
      for (double off : {0.0, 0.35, -0.35, 0.6, -0.6}) {
        azimuths.push_back(base + off);
        azimuths.push_back(base + std::numbers::pi + off);
      }
    } else {
      const double start = rc.uniform(0.0, 2 * std::numbers::pi);
      for (int a = 0; a < 12; ++a) azimuths.push_back(start + a * std::numbers::pi / 6);
    }
    const Eigen::Vector2d corners[] = {ctr,
                                       {o.footprint.x0, o.footprint.y0},
                                       {o.footprint.x1, o.footprint.y0},
                                       {o.footprint.x0, o.footprint.y1},
                                       {o.footprint.x1, o.footprint.y1}};
    bool placed = false;
    for (int attempt = 0; attempt < 5 && !placed; ++attempt) {
      const double dist = rc.uniform(recipe.camera_distance_min, recipe.camera_distance_max);
      for (double az : azimuths) {
        const Eigen::Vector2d eye2 = ctr + dist * Eigen::Vector2d(std::cos(az), std::sin(az));
        if (eye2.x() < 1.0 || eye2.y() < 1.0 || eye2.x() > recipe.extent - 1.0 || eye2.y() > recipe.extent - 1.0)
          continue;
        bool clear = true;
        for (std::size_t m = 0; m < objs.size() && clear; ++m) {
          if (m == n) continue;
          if (objs[m].footprint.grown(0.5).contains(eye2.x(), eye2.y())) clear = false;
          for (const auto& corner : corners)
            if (objs[m].footprint.grown(0.2).hits_segment(eye2, corner)) clear = false;
        }
        if (!clear) continue;
        const Point3 eye(eye2.x(), eye2.y(), recipe.camera_height_m);
        CameraModel cam = look_at_camera(eye, Point3(ctr.x(), ctr.y(), recipe.camera_height_m), recipe.camera_width,
                                         recipe.camera_height, recipe.focal);
        if (!o.tall) {
          bool in_frame = true;
          for (const auto& k : o.keys) {
            const auto px = project_point(grid.center_of(k), cam);
            if (!px || px->u < hfov_margin || px->v < hfov_margin || px->u > cam.width - hfov_margin ||
                px->v > cam.height - hfov_margin) {
              in_frame = false;
              break;
            }
          }
          if (!in_frame) continue;
        }
        cam.name = "cam_" + std::to_string(b.cameras.size());
        b.cameras.push_back(cam);
        b.camera_target.push_back(static_cast<int>(n));
        for (const auto& corner : corners) sight_lines.emplace_back(eye2, corner);
        placed = true;

        // Optional occluder halfway along the line of sight, covering the
        // whole object or half of it.
        if (recipe.occluders && ro.uniform() < 0.5) {
          const Eigen::Vector2d dir = (ctr - eye2).normalized();
          const Eigen::Vector2d side(-dir.y(), dir.x());
          const double half_w = 0.5 * std::max(o.footprint.x1 - o.footprint.x0, o.footprint.y1 - o.footprint.y0);
          const bool full = ro.uniform() < 0.5;
          const Eigen::Vector2d mid = eye2 + 0.5 * dist * dir;
          const double a0 = full ? -(half_w + 0.6) : 0.0, a1 = half_w + 0.6;
          SynthObject occ;
          occ.category = ObjectCategory::kOccluder;
          for (double s = a0; s <= a1; s += 0.5 * res) {
            const Eigen::Vector2d p = mid + s * side;
            for (int k = 1; k <= 16; ++k) occ.keys.push_back({cell_of(p.x()), cell_of(p.y()), k});
          }
          occ.keys = sorted_keys(std::move(occ.keys));
          occ.footprint = key_rect(occ.keys, res);
          bool ok = layout.free(occ.footprint, 0.3);
          for (std::size_t s = 0; s + 5 < sight_lines.size() && ok; ++s)
            if (occ.footprint.grown(0.2).hits_segment(sight_lines[s].first, sight_lines[s].second)) ok = false;
          if (ok) {
            layout.add(occ.footprint);
            occ.id = "occluder_" + std::to_string(objs.size());
            o.occluded = true;
            objs.push_back(std::move(occ));
          }
        }
        break;
      }
    }
    if (!placed) throw LayoutRejected("infeasible recipe: no clear camera position for " + o.id);
  }

  // Static world (up-to-date): ground plus every object except insertions.
  KeySet world;
  for (std::int32_t i = 0; i < cells; ++i)
    for (std::int32_t j = 0; j < cells; ++j) world.insert(world.end(), {i, j, 0});
  for (const auto& o : objs)
    if (o.role != EditRole::kInserted) world.insert(o.keys.begin(), o.keys.end());

  // Dynamic vehicles on free ground.
  CounterRng rv(seed, 9);
  std::vector<Cuboid> vehicles;
  for (int n = 0; n < recipe.vehicles; ++n) {
    bool ok = false;
    for (int t = 0; t < kMaxTries && !ok; ++t) {
      const double yaw = rv.uniform() < 0.5 ? 0.0 : std::numbers::pi / 2;
      const double x = rv.uniform(4.0, recipe.extent - 4.0), y = rv.uniform(4.0, recipe.extent - 4.0);
      const double half_x = yaw == 0.0 ? 2.2 : 0.9, half_y = yaw == 0.0 ? 0.9 : 2.2;
      const Rect r{x - half_x, y - half_y, x + half_x, y + half_y};
      if (!layout.free(r, 0.5)) continue;
      layout.add(r);
      vehicles.push_back({Point3(x, y, 1.0), Point3(4.4, 1.8, 1.5), rotation_z(yaw), "REGULAR_VEHICLE"});
      ok = true;
    }
    if (!ok) throw LayoutRejected("infeasible recipe: cannot place vehicle");
  }

  // Raw LiDAR scans: jittered samples inside every static cell, plus vehicle
  // surface points; each sample belongs to one scan.
  CounterRng rl(seed, 10);
  b.lidar_scans.resize(static_cast<std::size_t>(recipe.lidar_scans));
  for (int s = 0; s < recipe.lidar_scans; ++s) {
    const double yaw = rl.uniform(-std::numbers::pi, std::numbers::pi);
    b.lidar_scans[s].pose = {rotation_z(yaw), Point3(rl.uniform(0, recipe.extent), rl.uniform(0, recipe.extent), 1.8)};
    b.lidar_scans[s].timestamp_ns = 1'000'000'000LL + 100'000'000LL * s;
  }
  std::vector<RigidTransform> inv;
  for (const auto& sc : b.lidar_scans) inv.push_back(sc.pose.inverse());
  auto emit = [&](const Point3& w) {
    const auto s = static_cast<std::size_t>(rl.integer(0, recipe.lidar_scans - 1));
    b.lidar_scans[s].cloud.push_back(inv[s].apply(w));
  };
  for (const auto& k : world)
    for (int p = 0; p < recipe.points_per_voxel; ++p)
      emit(grid.origin + Point3(k.i + rl.uniform(0.15, 0.85), k.j + rl.uniform(0.15, 0.85), k.k + rl.uniform(0.15, 0.85)) * res);
  for (const auto& v : vehicles)
    for (int p = 0; p < 300; ++p) {
      Point3 local(rl.uniform(-0.45, 0.45) * v.dims.x(), rl.uniform(-0.45, 0.45) * v.dims.y(),
                   rl.uniform(-0.45, 0.45) * v.dims.z());
      emit(v.center + v.rotation * local);
    }

  // Annotations: vehicles plus static boxes around removed poles and signs.
  b.cuboids = vehicles;
  const LabelTaxonomy taxonomy = synth_taxonomy();
  b.truth = build_scene(b.lidar_scans, b.cuboids, taxonomy, grid);

  std::vector<EditOp> removal_ops;
  for (const auto& o : objs) {
    if (o.role != EditRole::kRemoved) continue;
    const Point3 lo(o.footprint.x0 + 0.05, o.footprint.y0 + 0.05, res);
    double top = 0;
    for (const auto& k : o.keys) top = std::max(top, (k.k + 1) * res);
    const Point3 hi(o.footprint.x1 - 0.05, o.footprint.y1 - 0.05, top - 0.05);
    if (o.category == ObjectCategory::kWall) {
      removal_ops.push_back(DeleteSelectionOp{AxisAlignedBox{lo, hi}});
    } else {
      Cuboid c{0.5 * (lo + hi), hi - lo, Matrix3::Identity(), o.label};
      b.cuboids.push_back(c);
      removal_ops.push_back(DeleteCuboidOp{c});
    }
  }
  for (const auto& o : objs)
    if (o.insert_op) removal_ops.push_back(*o.insert_op);
  b.script.ops = std::move(removal_ops);

  b.deltas = run_edit_script(b.truth, b.script, b.patches, b.ground, taxonomy);
  b.outdated = apply_delta(b.truth, combine_deltas(b.deltas));
  b.truth_diff = diff_sets(b.outdated, b.truth, b.truth);

  // Per-object change sets.
  for (const auto& o : objs) {
    if (o.role == EditRole::kNone) continue;
    ChangeObject c;
    c.object_id = o.id;
    c.kind = o.role == EditRole::kRemoved ? ChangeKind::kAdded : ChangeKind::kDeleted;
    for (const auto& k : o.keys)
      if (o.role == EditRole::kRemoved || !b.truth.contains(k)) c.points.push_back(grid.center_of(k));
    if (!c.points.empty()) b.changes.objects.push_back(std::move(c));
  }

  const VoxelRaycaster caster(b.truth);
  for (const auto& cam : b.cameras) b.camera_scans.push_back(render_depth_scan(caster, cam));

  CounterRng rf(seed, 11);
  const double scale = std::exp(rf.uniform(std::log(0.5), std::log(2.0)));
  b.predictor_frame = {scale, rotation_ypr(rf.uniform(-3.0, 3.0), rf.uniform(-1.0, 1.0), rf.uniform(-3.0, 3.0)),
                       Point3(rf.uniform(-20, 20), rf.uniform(-20, 20), rf.uniform(-5, 5))};
  return b;
}

}  // namespace synth_detail

/// Deterministic in the recipe. Layouts that leave an edited object without
/// a clear camera are redrawn from a derived seed a bounded number of times.
inline SynthBundle generate(const SceneRecipe& recipe) {
  recipe.validate();
  constexpr std::uint64_t kLayoutAttempts = 24;
  for (std::uint64_t salt = 0;; ++salt) {
    try {
      return synth_detail::generate_attempt(recipe, salt);
    } catch (const synth_detail::LayoutRejected& e) {
      if (salt + 1 == kLayoutAttempts) throw Error(e.what());
    }
  }
}

/// Ground-truth change masks, one per camera.
inline std::vector<ChangeMask> truth_masks(const SynthBundle& b, const OcclusionParams& params = {}) {
  std::vector<ChangeMask> out;
  for (std::size_t c = 0; c < b.cameras.size(); ++c)
    out.push_back(build_change_mask(b.changes, b.cameras[c], b.camera_scans[c], params).second);
  return out;
}

/// A perfect image-to-3D predictor: each pixel's current-world hit cell center,
/// expressed in the predictor's own similarity frame.
struct OraclePrediction {
  PredictedReconstruction pred;
  std::vector<Point3> map_points;  // the same points in the map frame
};

inline OraclePrediction oracle_prediction(const VoxelScene& world, std::span<const CameraModel> cameras,
                                          const SimilarityTransform& map_from_pred) {
  const VoxelRaycaster caster(world);
  const SimilarityTransform pred_from_map = map_from_pred.inverse();
  OraclePrediction out;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto& cam = cameras[c];
    const Point3 o = cam.center();
    for (int row = 0; row < cam.height; ++row)
      for (int col = 0; col < cam.width; ++col) {
        const auto hit = caster.cast(o, pixel_center_ray(cam, col, row), 200.0);
        if (!hit) continue;
        const Point3 m = world.grid.center_of(hit->key);
        out.map_points.push_back(m);
        out.pred.cloud.push_back(pred_from_map.apply(m));
        out.pred.u.push_back(col + 0.5);
        out.pred.v.push_back(row + 0.5);
        out.pred.image_index.push_back(static_cast<std::int32_t>(c));
      }
  }
  return out;
}

/// Exact correspondences from unmasked pixels, every `stride`-th one.
inline CorrespondenceSet oracle_correspondences(const OraclePrediction& p, std::span<const BinaryMask> masks,
                                                std::size_t stride = 37) {
  CorrespondenceSet corr;
  for (std::size_t n = 0; n < p.pred.cloud.size(); n += stride)
    if (!pixel_in_masks(p.pred.u[n], p.pred.v[n], p.pred.image_index[n], masks))
      corr.add(p.pred.cloud.points[n], p.map_points[n]);
  return corr;
}

/// Writes the bundle in the toolkit's native formats.
inline void write_bundle(const SynthBundle& b, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  io::write_text(dir / "recipe.json", to_json(b.recipe).dump(2));
  write_scene(dir / "truth.pcms", b.truth);
  write_scene(dir / "outdated.pcms", b.outdated);
  io::write_text(dir / "edit.json", to_json(b.script).dump(2));
  {
    nlohmann::json cub = nlohmann::json::array();
    for (const auto& c : b.cuboids) cub.push_back(to_json(c));
    io::write_text(dir / "cuboids.json", cub.dump(2));
  }
  {
    nlohmann::json cams = nlohmann::json::array();
    for (const auto& c : b.cameras) cams.push_back(to_json(c));
    io::write_text(dir / "cameras.json", cams.dump(2));
  }
  write_scan_directory(dir / "scans", b.lidar_scans);
  write_scan_directory(dir / "camera_scans", b.camera_scans);
  io::write_text(dir / "changes.json", to_json(b.changes).dump());
  b.patches.save(dir / "patches");
  io::write_text(dir / "ground.json", b.ground.to_json().dump());
  nlohmann::json truth{{"added_keys", keys_to_json(b.truth_diff.add_star)},
                       {"deleted_keys", keys_to_json(b.truth_diff.del_star)}};
  io::write_text(dir / "truth_diff.json", truth.dump());
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : b.objects)
    objs.push_back({{"id", o.id}, {"category", to_string(o.category)},
                    {"role", o.role == EditRole::kNone ? "none" : o.role == EditRole::kRemoved ? "removed" : "inserted"},
                    {"voxels", o.keys.size()}, {"label", o.label}, {"occluded", o.occluded}});
  io::write_text(dir / "objects.json", objs.dump(2));
}

}  // namespace pcm
