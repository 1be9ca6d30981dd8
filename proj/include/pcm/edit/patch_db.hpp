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

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "pcm/io/ply.hpp"

namespace pcm {

/// Object point cloud in a local frame whose lowest point sits at z = 0.
class Patch {
 public:
  /// Shifts the cloud so its minimum z is 0.
  static Patch make(std::string id, PointCloud cloud, std::string label) {
    if (cloud.empty()) throw Error("patch '" + id + "' is empty");
    cloud.validate();
    double zmin = std::numeric_limits<double>::infinity();
    for (const auto& p : cloud.points) zmin = std::min(zmin, p.z());
    for (auto& p : cloud.points) p.z() -= zmin;
    Patch patch;
    patch.id_ = std::move(id);
    patch.cloud_ = std::move(cloud);
    patch.label_ = std::move(label);
    patch.fp_min_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    patch.fp_max_ = -patch.fp_min_;
    for (const auto& p : patch.cloud_.points) {
      patch.fp_min_ = patch.fp_min_.cwiseMin(p.head<2>());
      patch.fp_max_ = patch.fp_max_.cwiseMax(p.head<2>());
    }
    return patch;
  }

  const std::string& id() const { return id_; }
  const PointCloud& cloud() const { return cloud_; }
  const std::string& label() const { return label_; }
  /// Axis-aligned xy bounds of the local cloud.
  Eigen::Vector2d footprint_min() const { return fp_min_; }
  Eigen::Vector2d footprint_max() const { return fp_max_; }

 private:
  Patch() = default;
  std::string id_;
  PointCloud cloud_;
  std::string label_;
  Eigen::Vector2d fp_min_, fp_max_;
};

class PatchDatabase {
 public:
  void add(Patch patch) {
    const std::string id = patch.id();
    if (!patches_.emplace(id, std::move(patch)).second) throw Error("duplicate patch id '" + id + "'");
  }
  const Patch& get(const std::string& id) const {
    auto it = patches_.find(id);
    if (it == patches_.end()) throw Error("unknown patch id '" + id + "'");
    return it->second;
  }
  bool contains(const std::string& id) const { return patches_.contains(id); }
  std::size_t size() const { return patches_.size(); }
  const std::map<std::string, Patch>& patches() const { return patches_; }

  nlohmann::json manifest() const {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& [id, p] : patches_)
      items.push_back({{"id", id}, {"label", p.label()}, {"file", id + ".ply"}, {"points", p.cloud().size()}});
    return {{"patches", items}, {"count", patches_.size()}};
  }

  /// Directory of PLY files plus manifest.json.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [id, p] : patches_) io::write_ply(dir / (id + ".ply"), p.cloud());
    io::write_text(dir / "manifest.json", manifest().dump(2));
  }

  static PatchDatabase load(const std::filesystem::path& dir) {
    PatchDatabase db;
    try {
      const auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
      for (const auto& item : manifest.at("patches")) {
        const auto id = item.at("id").get<std::string>();
        const auto file = item.value("file", id + ".ply");
        db.add(Patch::make(id, io::read_ply(dir / file).cloud, item.value("label", std::string())));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("invalid patch manifest: " + std::string(e.what()));
    }
    return db;
  }

 private:
  std::map<std::string, Patch> patches_;
};

/// Ground heights sampled on a regular xy grid.
class GroundModel {
 public:
  explicit GroundModel(double cell_size = 1.0) : cell_size_(cell_size) {
    if (!(cell_size > 0.0)) throw Error("ground cell size must be positive");
  }

  void set(std::int32_t ci, std::int32_t cj, double z) {
    if (!std::isfinite(z)) throw Error("ground height must be finite");
    heights_[{ci, cj}] = z;
  }
  std::pair<std::int32_t, std::int32_t> cell_of(double x, double y) const {
    return {static_cast<std::int32_t>(std::floor(x / cell_size_)),
            static_cast<std::int32_t>(std::floor(y / cell_size_))};
  }
  std::optional<double> height_at(double x, double y) const {
    auto it = heights_.find(cell_of(x, y));
    if (it == heights_.end()) return std::nullopt;
    return it->second;
  }
  double cell_size() const { return cell_size_; }
  const std::map<std::pair<std::int32_t, std::int32_t>, double>& cells() const { return heights_; }

  /// Flat ground of height z covering [xmin,xmax) x [ymin,ymax).
  static GroundModel flat(double xmin, double ymin, double xmax, double ymax, double z, double cell_size) {
    GroundModel g(cell_size);
    const auto [i0, j0] = g.cell_of(xmin, ymin);
    const auto [i1, j1] = g.cell_of(std::nextafter(xmax, xmin), std::nextafter(ymax, ymin));
    for (auto i = i0; i <= i1; ++i)
      for (auto j = j0; j <= j1; ++j) g.set(i, j, z);
    return g;
  }

  /// {"cell_size": s, "cells": [[i, j, z], ...]}
  nlohmann::json to_json() const {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [ij, z] : heights_) cells.push_back({ij.first, ij.second, z});
    return {{"cell_size", cell_size_}, {"cells", cells}};
  }
  static GroundModel from_json(const nlohmann::json& j) {
    try {
      GroundModel g(j.at("cell_size").get<double>());
      for (const auto& c : j.at("cells")) g.set(c.at(0).get<std::int32_t>(), c.at(1).get<std::int32_t>(), c.at(2).get<double>());
      return g;
    } catch (const nlohmann::json::exception& e) {
      throw Error("invalid ground model JSON: " + std::string(e.what()));
    }
  }

  // Binary grid: "PCMG", cell_size f64, i0 i32, j0 i32, nx u32, ny u32,
  // nx*ny f64 heights (row-major in j, NaN = no sample).
  io::Bytes encode_binary() const {
    io::ByteWriter w;
    for (char c : std::string_view("PCMG")) w.put(static_cast<std::uint8_t>(c));
    w.put(cell_size_);
    std::int32_t i0 = 0, j0 = 0, i1 = -1, j1 = -1;
    if (!heights_.empty()) {
      i0 = j0 = std::numeric_limits<std::int32_t>::max();
      i1 = j1 = std::numeric_limits<std::int32_t>::min();
      for (const auto& [ij, z] : heights_) {
        i0 = std::min(i0, ij.first), i1 = std::max(i1, ij.first);
        j0 = std::min(j0, ij.second), j1 = std::max(j1, ij.second);
      }
    }
    const auto nx = static_cast<std::uint32_t>(i1 - i0 + 1), ny = static_cast<std::uint32_t>(j1 - j0 + 1);
    w.put(i0);
    w.put(j0);
    w.put(nx);
    w.put(ny);
    for (std::uint32_t b = 0; b < ny; ++b)
      for (std::uint32_t a = 0; a < nx; ++a) {
        auto it = heights_.find({i0 + static_cast<std::int32_t>(a), j0 + static_cast<std::int32_t>(b)});
        w.put(it == heights_.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
      }
    return w.take();
  }
  static GroundModel decode_binary(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes, "ground grid: truncated or corrupt");
    const auto magic = r.get_bytes(4);
    if (std::string(magic.begin(), magic.end()) != "PCMG") throw Error("ground grid: bad magic");
    GroundModel g(r.get<double>());
    const auto i0 = r.get<std::int32_t>(), j0 = r.get<std::int32_t>();
    const auto nx = r.get<std::uint32_t>(), ny = r.get<std::uint32_t>();
    for (std::uint32_t b = 0; b < ny; ++b)
      for (std::uint32_t a = 0; a < nx; ++a) {
        const double z = r.get<double>();
        if (!std::isnan(z)) g.set(i0 + static_cast<std::int32_t>(a), j0 + static_cast<std::int32_t>(b), z);
      }
    return g;
  }

  static GroundModel load(const std::filesystem::path& path) {
    if (path.extension() == ".json") return from_json(nlohmann::json::parse(io::read_text(path)));
    const auto bytes = io::read_file(path);
    return decode_binary(bytes);
  }

 private:
  double cell_size_;
  std::map<std::pair<std::int32_t, std::int32_t>, double> heights_;
};

}  // namespace pcm
