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

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pcm/change/projector.hpp"
#include "pcm/scene/voxel_scene.hpp"

namespace pcm {

enum class Visibility : std::uint8_t { kOutOfView, kOccluded, kVisible };

inline const char* to_string(Visibility v) {
  switch (v) {
    case Visibility::kOutOfView: return "out_of_view";
    case Visibility::kOccluded: return "occluded";
    case Visibility::kVisible: return "visible";
  }
  return "?";
}

struct VisibilityReport {
  std::vector<Visibility> classes;
  std::array<std::size_t, 3> counts{};  // indexed by Visibility

  std::size_t count(Visibility v) const { return counts[static_cast<std::size_t>(v)]; }

  nlohmann::json to_json() const {
    return {{"out_of_view", count(Visibility::kOutOfView)},
            {"occluded", count(Visibility::kOccluded)},
            {"visible", count(Visibility::kVisible)}};
  }
};

inline Visibility classify_point(const Point3& p, const CameraModel& cam, const DepthReference& ref,
                                 const OcclusionParams& params) {
  const auto px = project_point(p, cam);
  if (!px) return Visibility::kOutOfView;
  return ref.occludes(px->col(), px->row(), px->depth, params) ? Visibility::kOccluded : Visibility::kVisible;
}

inline VisibilityReport classify_visibility(std::span<const Point3> points, const CameraModel& cam,
                                            const DepthReference& ref, const OcclusionParams& params,
                                            unsigned threads = 1) {
  cam.validate();
  params.validate();
  if (ref.width() != cam.width || ref.height() != cam.height) throw Error("depth reference does not match camera");
  VisibilityReport rep;
  rep.classes.resize(points.size());
  parallel_chunks(points.size(), 4096, threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t n = b; n < e; ++n) rep.classes[n] = classify_point(points[n], cam, ref, params);
  });
  for (auto c : rep.classes) ++rep.counts[static_cast<std::size_t>(c)];
  return rep;
}

inline VisibilityReport classify_visibility(const PointCloud& cloud, const CameraModel& cam,
                                            const DepthReference& ref, const OcclusionParams& params,
                                            unsigned threads = 1) {
  return classify_visibility(std::span<const Point3>(cloud.points), cam, ref, params, threads);
}

struct DeletionParams {
  OcclusionParams occlusion;
  /// Also demand positive free-space evidence: the ray through the voxel's
  /// pixel center crosses the cell over a chord of at least
  /// `min_chord_fraction` * resolution, and the reference depth at that pixel
  /// is missing or lies beyond the cell exit by more than the margin. Keeps
  /// still-present geometry that a convex mask happens to cover.
  bool require_free_space = true;
  double min_chord_fraction = 0.25;
};

/// Camera-depth interval over which the ray through the center of pixel
/// (col, row) lies inside the voxel cell, plus the chord length in meters.
struct CellCrossing {
  double enter_depth = 0.0, exit_depth = 0.0, chord_m = 0.0;
};

inline std::optional<CellCrossing> pixel_ray_crossing(const CameraModel& cam, int col, int row, const VoxelKey& key,
                                                      const VoxelGrid& grid) {
  const Point3 d = pixel_center_ray(cam, col, row);
  const Point3 o = cam.center();
  const Point3 lo = grid.origin + Point3(key.i, key.j, key.k) * grid.resolution;
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double hi = lo[a] + grid.resolution;
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a], tb = (hi - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return std::nullopt;
  return CellCrossing{t0, t1, (t1 - t0) * d.norm()};
}

/// Keys of `scene` voxels whose centers are visible and project into a set
/// mask pixel (and, by default, show free-space evidence).
inline KeySet predict_deletion_keys(const VoxelScene& scene, const BinaryMask& mask, const CameraModel& cam,
                                    const DepthReference& ref, const DeletionParams& params) {
  cam.validate();
  params.occlusion.validate();
  if (mask.width != cam.width || mask.height != cam.height) throw Error("mask dimensions do not match camera");
  if (ref.width() != cam.width || ref.height() != cam.height) throw Error("depth reference does not match camera");
  KeySet out;
  if (mask.count() == 0) return out;
  for (const auto& [k, ids] : scene.voxels) {
    const auto px = project_point(scene.grid.center_of(k), cam);
    if (!px || !mask.at(px->col(), px->row())) continue;
    if (ref.occludes(px->col(), px->row(), px->depth, params.occlusion)) continue;
    if (params.require_free_space) {
      const auto x = pixel_ray_crossing(cam, px->col(), px->row(), k, scene.grid);
      if (!x || x->chord_m < params.min_chord_fraction * scene.grid.resolution) continue;
      if (!(ref.at(px->col(), px->row()) > x->exit_depth + params.occlusion.margin_m)) continue;
    }
    out.insert(out.end(), k);
  }
  return out;
}

inline PointCloud predict_deletions(const VoxelScene& scene, const BinaryMask& mask, const CameraModel& cam,
                                    const DepthReference& ref, const DeletionParams& params) {
  return key_centers(predict_deletion_keys(scene, mask, cam, ref, params), scene.grid);
}

/// One camera's evidence for deletion.
struct DeletionView {
  const CameraModel* camera = nullptr;
  const BinaryMask* mask = nullptr;
  const DepthReference* depth = nullptr;
};

/// Union over views.
inline KeySet predict_deletion_keys(const VoxelScene& scene, std::span<const DeletionView> views,
                                    const DeletionParams& params) {
  KeySet out;
  for (const auto& v : views) {
    const KeySet keys = predict_deletion_keys(scene, *v.mask, *v.camera, *v.depth, params);
    out.insert(keys.begin(), keys.end());
  }
  return out;
}

}  // namespace pcm
