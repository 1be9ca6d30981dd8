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

#include <set>
#include <string>

#include "pcm/common.hpp"

namespace pcm {

/// Static vs dynamic object categories of the annotation source (Argoverse 2
/// label names).
class LabelTaxonomy {
 public:
  LabelTaxonomy(std::set<std::string> static_labels, std::set<std::string> dynamic_labels)
      : static_(std::move(static_labels)), dynamic_(std::move(dynamic_labels)) {
    for (const auto& s : static_)
      if (dynamic_.contains(s)) throw Error("label '" + s + "' is both static and dynamic");
  }

  static LabelTaxonomy defaults() {
    return LabelTaxonomy(
        {"BOLLARD", "CONSTRUCTION_BARREL", "CONSTRUCTION_CONE", "MESSAGE_BOARD_TRAILER",
         "MOBILE_PEDESTRIAN_CROSSING_SIGN", "OFFICIAL_SIGNALER", "SIGN", "STOP_SIGN",
         "TRAFFIC_LIGHT_TRAILER"},
        {"ANIMAL", "ARTICULATED_BUS", "BICYCLE", "BICYCLIST", "BOX_TRUCK", "BUS", "DOG",
         "LARGE_VEHICLE", "MOTORCYCLE", "MOTORCYCLIST", "PEDESTRIAN", "RAILED_VEHICLE",
         "REGULAR_VEHICLE", "SCHOOL_BUS", "STROLLER", "TRUCK", "TRUCK_CAB", "VEHICULAR_TRAILER",
         "WHEELCHAIR", "WHEELED_DEVICE", "WHEELED_RIDER"});
  }

  /// {"static_labels": [...], "dynamic_labels": [...]}
  static LabelTaxonomy from_json(const nlohmann::json& j) {
    try {
      return LabelTaxonomy(j.at("static_labels").get<std::set<std::string>>(),
                           j.at("dynamic_labels").get<std::set<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("invalid taxonomy JSON: ") + e.what());
    }
  }

  bool is_dynamic(const std::string& label) const {
    if (dynamic_.contains(label)) return true;
    if (static_.contains(label)) return false;
    throw Error("label not in taxonomy: '" + label + "'");
  }
  bool is_static(const std::string& label) const { return !is_dynamic(label); }

  const std::set<std::string>& static_labels() const { return static_; }
  const std::set<std::string>& dynamic_labels() const { return dynamic_; }

 private:
  std::set<std::string> static_;
  std::set<std::string> dynamic_;
};

}  // namespace pcm
