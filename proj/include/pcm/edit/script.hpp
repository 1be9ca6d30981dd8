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

// Edit scripts: {"ops": [op, ...]} where op is one of
//   {"op": "delete_cuboid", "cuboid": {...}}
//   {"op": "delete_selection", "region": {...}}
//   {"op": "insert_patch", "patch_id": "...", "x": .., "y": .., "yaw": ..}
// Every op is evaluated against the same base scene.

#include <nlohmann/json.hpp>

#include <string>
#include <variant>
#include <vector>

#include "pcm/edit/editor.hpp"

namespace pcm {

struct DeleteCuboidOp {
  Cuboid cuboid;
};
struct DeleteSelectionOp {
  SelectionRegion region;
};
struct InsertPatchOp {
  std::string patch_id;
  double x = 0.0, y = 0.0, yaw = 0.0;
};

using EditOp = std::variant<DeleteCuboidOp, DeleteSelectionOp, InsertPatchOp>;

struct EditScript {
  std::vector<EditOp> ops;
};

inline nlohmann::json to_json(const EditOp& op) {
  return std::visit(
      [](const auto& o) -> nlohmann::json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, DeleteCuboidOp>) return {{"op", "delete_cuboid"}, {"cuboid", to_json(o.cuboid)}};
        else if constexpr (std::is_same_v<T, DeleteSelectionOp>) return {{"op", "delete_selection"}, {"region", to_json(o.region)}};
        else return {{"op", "insert_patch"}, {"patch_id", o.patch_id}, {"x", o.x}, {"y", o.y}, {"yaw", o.yaw}};
      },
      op);
}

inline nlohmann::json to_json(const EditScript& s) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : s.ops) ops.push_back(to_json(op));
  return {{"ops", ops}};
}

inline EditScript edit_script_from_json(const nlohmann::json& j) {
  try {
    EditScript s;
    for (const auto& o : j.at("ops")) {
      const auto kind = o.at("op").get<std::string>();
      if (kind == "delete_cuboid") s.ops.push_back(DeleteCuboidOp{cuboid_from_json(o.at("cuboid"))});
      else if (kind == "delete_selection") s.ops.push_back(DeleteSelectionOp{region_from_json(o.at("region"))});
      else if (kind == "insert_patch")
        s.ops.push_back(InsertPatchOp{o.at("patch_id").get<std::string>(), o.at("x").get<double>(),
                                      o.at("y").get<double>(), o.value("yaw", 0.0)});
      else throw Error("unknown edit op '" + kind + "'");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid edit script JSON: " + std::string(e.what()));
  }
}

inline EditDelta run_edit_op(const VoxelScene& scene, const EditOp& op, const PatchDatabase& db,
                             const GroundModel& ground, const LabelTaxonomy& taxonomy) {
  return std::visit(
      [&](const auto& o) -> EditDelta {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, DeleteCuboidOp>) return delete_by_cuboid(scene, o.cuboid, taxonomy);
        else if constexpr (std::is_same_v<T, DeleteSelectionOp>) return delete_by_selection(scene, o.region);
        else return insert_patch(scene, db, o.patch_id, {o.x, o.y}, o.yaw, ground);
      },
      op);
}

/// One delta per op, all against `scene`.
inline std::vector<EditDelta> run_edit_script(const VoxelScene& scene, const EditScript& script,
                                              const PatchDatabase& db, const GroundModel& ground,
                                              const LabelTaxonomy& taxonomy) {
  std::vector<EditDelta> out;
  out.reserve(script.ops.size());
  for (const auto& op : script.ops) out.push_back(run_edit_op(scene, op, db, ground, taxonomy));
  return out;
}

}  // namespace pcm
