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
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pcm/geom/camera.hpp"
#include "pcm/geom/hull.hpp"
#include "pcm/scene/builder.hpp"

namespace pcm {

enum class ChangeKind { kAdded, kDeleted };

inline const char* to_string(ChangeKind k) { return k == ChangeKind::kAdded ? "added" : "deleted"; }

inline ChangeKind change_kind_from_string(const std::string& s) {
  if (s == "added") return ChangeKind::kAdded;
  if (s == "deleted") return ChangeKind::kDeleted;
  throw Error("unknown change kind '" + s + "'");
}

struct ChangeObject {
  std::string object_id;
  ChangeKind kind = ChangeKind::kAdded;
  /// Changed voxel centers (world frame).
  PointCloud points;
};

struct ChangeSet3D {
  std::vector<ChangeObject> objects;

  void validate() const {
    std::set<std::string> ids;
    for (const auto& o : objects) {
      if (o.points.empty()) throw Error("change object '" + o.object_id + "' has no points");
      if (!ids.insert(o.object_id).second) throw Error("duplicate change object id '" + o.object_id + "'");
    }
  }
};

/// Neighborhood occlusion test parameters; shared by change projection and
/// deletion.
struct OcclusionParams {
  int radius_px = 2;
  double margin_m = 0.3;

  void validate() const {
    if (radius_px < 0) throw Error("occlusion radius must be non-negative");
    if (!(margin_m > 0.0)) throw Error("occlusion margin must be positive");
  }
};

/// Per-pixel minimum depth of a synchronized scan; +inf marks "no sample".
class DepthReference {
 public:
  DepthReference() = default;
  DepthReference(int width, int height)
      : width_(width), height_(height),
        depth_(static_cast<std::size_t>(width) * height, std::numeric_limits<double>::infinity()) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int col, int row) const { return depth_[index(col, row)]; }
  bool has_sample(int col, int row) const { return at(col, row) < std::numeric_limits<double>::infinity(); }

  void offer(int col, int row, double depth) {
    double& d = depth_[index(col, row)];
    d = std::min(d, depth);
  }

  std::size_t sample_count() const {
    return static_cast<std::size_t>(std::count_if(depth_.begin(), depth_.end(), [](double d) {
      return d < std::numeric_limits<double>::infinity();
    }));
  }

  /// True if some sample within Chebyshev distance `radius_px` of (col,row)
  /// is closer than depth - margin.
  bool occludes(int col, int row, double depth, const OcclusionParams& p) const {
    const double limit = depth - p.margin_m;
    const int r0 = std::max(0, row - p.radius_px), r1 = std::min(height_ - 1, row + p.radius_px);
    const int c0 = std::max(0, col - p.radius_px), c1 = std::min(width_ - 1, col + p.radius_px);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        if (depth_[index(c, r)] < limit) return true;
    return false;
  }

 private:
  std::size_t index(int col, int row) const { return static_cast<std::size_t>(row) * width_ + col; }
  int width_ = 0, height_ = 0;
  std::vector<double> depth_;
};

/// Z-buffers a scan into the camera: nearest depth per pixel.
inline DepthReference depth_reference(const PosedScan& scan, const CameraModel& cam) {
  cam.validate();
  DepthReference ref(cam.width, cam.height);
  for (const auto& p : scan.cloud.points)
    if (auto px = project_point(scan.pose.apply(p), cam)) ref.offer(px->col(), px->row(), px->depth);
  return ref;
}

struct FilteredPixels {
  std::vector<Pixel> survivors;
  std::size_t input_count = 0;
};

/// Drops pixels with occluding reference samples nearby; keeps the rest in
/// input order.
inline FilteredPixels filter_occluded(std::span<const Pixel> pixels, const DepthReference& ref,
                                      const OcclusionParams& params) {
  params.validate();
  FilteredPixels out;
  out.input_count = pixels.size();
  for (const auto& px : pixels)
    if (!ref.occludes(px.col(), px.row(), px.depth, params)) out.survivors.push_back(px);
  return out;
}

struct ObjectProjection {
  std::string object_id;
  ChangeKind kind = ChangeKind::kAdded;
  std::vector<Pixel> survivors;
  std::size_t projected_count = 0;  // in-frame projections before filtering
  std::size_t input_count = 0;      // 3D points
};

struct SparseChangeProjection {
  std::vector<ObjectProjection> objects;
};

struct ObjectMask {
  std::string object_id;
  ChangeKind kind = ChangeKind::kAdded;
  Polygon polygon;  // empty when nothing survived
  std::size_t survivor_count = 0;
  std::size_t input_count = 0;
};

struct ChangeMask {
  BinaryMask raster;
  std::vector<ObjectMask> objects;

  int width() const { return raster.width; }
  int height() const { return raster.height; }
};

/// Pixel-index lattice points of a set of pixels, i.e. hull inputs.
inline std::vector<Point2> pixel_lattice(std::span<const Pixel> pixels) {
  std::vector<Point2> out;
  out.reserve(pixels.size());
  for (const auto& px : pixels) out.push_back({static_cast<double>(px.col()), static_cast<double>(px.row())});
  return out;
}

/// Per object: project, occlusion-filter, hull the surviving pixel indices,
/// rasterize; the mask is the union. Objects are processed in object_id
/// order, so the output does not depend on input ordering.
inline std::pair<SparseChangeProjection, ChangeMask> build_change_mask(const ChangeSet3D& changes,
                                                                       const CameraModel& cam,
                                                                       const DepthReference& ref,
                                                                       const OcclusionParams& params) {
  cam.validate();
  params.validate();
  if (ref.width() != cam.width || ref.height() != cam.height) throw Error("depth reference does not match camera");

  std::vector<const ChangeObject*> order;
  for (const auto& o : changes.objects) order.push_back(&o);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->object_id < b->object_id; });

  SparseChangeProjection sparse;
  ChangeMask mask{BinaryMask(cam.width, cam.height), {}};
  for (const ChangeObject* obj : order) {
    std::vector<Pixel> projected;
    for (const auto& p : obj->points.points)
      if (auto px = project_point(p, cam)) projected.push_back(*px);
    FilteredPixels kept = filter_occluded(projected, ref, params);

    ObjectMask om{obj->object_id, obj->kind, {}, kept.survivors.size(), obj->points.size()};
    if (!kept.survivors.empty()) {
      om.polygon = convex_hull_2d(pixel_lattice(kept.survivors));
      mask.raster.merge(rasterize_polygon(om.polygon, cam.width, cam.height));
    }
    sparse.objects.push_back({obj->object_id, obj->kind, std::move(kept.survivors), projected.size(), obj->points.size()});
    mask.objects.push_back(std::move(om));
  }
  return {std::move(sparse), std::move(mask)};
}

inline std::pair<SparseChangeProjection, ChangeMask> build_change_mask(const ChangeSet3D& changes,
                                                                       const CameraModel& cam, const PosedScan& scan,
                                                                       const OcclusionParams& params) {
  return build_change_mask(changes, cam, depth_reference(scan, cam), params);
}

// ---- JSON forms ------------------------------------------------------------

inline nlohmann::json mask_sidecar(const ChangeMask& mask, const std::string& camera_name) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : mask.objects) {
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& v : o.polygon) poly.push_back({v.u, v.v});
    objs.push_back({{"object_id", o.object_id},
                    {"change_kind", to_string(o.kind)},
                    {"polygon", poly},
                    {"survivor_count", o.survivor_count},
                    {"input_count", o.input_count}});
  }
  return {{"camera", camera_name}, {"width", mask.width()}, {"height", mask.height()}, {"objects", objs}};
}

/// {"objects": [{"object_id", "change_kind", "points": [[x,y,z], ...]}]}
inline nlohmann::json to_json(const ChangeSet3D& changes) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : changes.objects) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : o.points.points) pts.push_back({p.x(), p.y(), p.z()});
    objs.push_back({{"object_id", o.object_id}, {"change_kind", to_string(o.kind)}, {"points", pts}});
  }
  return {{"objects", objs}};
}

inline ChangeSet3D change_set_from_json(const nlohmann::json& j) {
  try {
    ChangeSet3D cs;
    for (const auto& o : j.at("objects")) {
      ChangeObject obj;
      obj.object_id = o.at("object_id").get<std::string>();
      obj.kind = change_kind_from_string(o.at("change_kind").get<std::string>());
      for (const auto& p : o.at("points")) obj.points.push_back(Point3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()));
      cs.objects.push_back(std::move(obj));
    }
    cs.validate();
    return cs;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid change set JSON: " + std::string(e.what()));
  }
}

inline nlohmann::json to_json(const CameraModel& cam) {
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(cam.extrinsics.rotation(r, c));
  const auto& t = cam.extrinsics.translation;
  return {{"name", cam.name}, {"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
          {"width", cam.width}, {"height", cam.height}, {"rotation", rot}, {"translation", {t.x(), t.y(), t.z()}}};
}

/// "rotation" is the row-major world-to-camera matrix.
inline CameraModel camera_from_json(const nlohmann::json& j) {
  try {
    CameraModel cam;
    cam.name = j.value("name", std::string());
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const auto rot = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (rot.size() != 9 || t.size() != 3) throw Error("camera extrinsics need 9 + 3 values");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cam.extrinsics.rotation(r, c) = rot[r * 3 + c];
    cam.extrinsics.translation = Point3(t[0], t[1], t[2]);
    cam.validate();
    return cam;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid camera JSON: " + std::string(e.what()));
  }
}

inline std::vector<CameraModel> cameras_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("camera document must be a JSON array");
  std::vector<CameraModel> out;
  for (const auto& c : j) out.push_back(camera_from_json(c));
  return out;
}

}  // namespace pcm
