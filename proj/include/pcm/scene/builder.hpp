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
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pcm/io/ply.hpp"
#include "pcm/scene/cuboid.hpp"
#include "pcm/scene/taxonomy.hpp"
#include "pcm/scene/voxel_scene.hpp"

namespace pcm {

/// Scan in its sensor frame with the sensor-to-world pose.
struct PosedScan {
  PointCloud cloud;
  RigidTransform pose;
  std::int64_t timestamp_ns = 0;

  PointCloud world_points() const { return transformed(cloud, pose); }
};

/// Removes points that fall inside any dynamic-labeled cuboid (world frame,
/// faces inclusive). Static cuboids never remove anything, but every label
/// must be known to the taxonomy. Surviving points keep their ids; a scan
/// without ids gets its original point indices as ids so provenance still
/// refers to raw points.
inline PosedScan filter_dynamic(const PosedScan& scan, std::span<const Cuboid> cuboids,
                                const LabelTaxonomy& taxonomy) {
  std::vector<const Cuboid*> dynamic;
  for (const auto& c : cuboids)
    if (taxonomy.is_dynamic(c.label)) dynamic.push_back(&c);

  PosedScan out;
  out.pose = scan.pose;
  out.timestamp_ns = scan.timestamp_ns;
  out.cloud.points.reserve(scan.cloud.size());
  out.cloud.ids.reserve(scan.cloud.size());
  for (std::size_t n = 0; n < scan.cloud.size(); ++n) {
    const Point3 w = scan.pose.apply(scan.cloud.points[n]);
    const bool inside = std::any_of(dynamic.begin(), dynamic.end(), [&](const Cuboid* c) { return c->contains(w); });
    if (inside) continue;
    out.cloud.push_back(scan.cloud.points[n], scan.cloud.has_ids() ? scan.cloud.ids[n] : n);
  }
  return out;
}

/// Packs (scan index, point id) into one provenance id.
inline std::uint64_t pack_point_id(std::uint64_t scan_index, std::uint64_t point_id) {
  if (scan_index > 0xffffffffULL || point_id > 0xffffffffULL)
    throw Error("scan or point index exceeds 32 bits");
  return (scan_index << 32) | point_id;
}

/// World-frame concatenation of all scans. A point's id packs its scan
/// index with its in-scan id (or position when the scan has no ids).
inline PointCloud accumulate(std::span<const PosedScan> scans) {
  if (scans.empty()) throw Error("no scans to accumulate");
  PointCloud out;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    const auto& scan = scans[s];
    for (std::size_t n = 0; n < scan.cloud.size(); ++n) {
      const std::uint64_t local = scan.cloud.has_ids() ? scan.cloud.ids[n] : n;
      out.push_back(scan.pose.apply(scan.cloud.points[n]), pack_point_id(s, local));
    }
  }
  return out;
}

/// filter -> accumulate -> voxelize.
inline VoxelScene build_scene(std::span<const PosedScan> scans, std::span<const Cuboid> cuboids,
                              const LabelTaxonomy& taxonomy, const VoxelGrid& grid) {
  std::vector<PosedScan> filtered;
  filtered.reserve(scans.size());
  for (const auto& s : scans) filtered.push_back(filter_dynamic(s, cuboids, taxonomy));
  return voxelize(accumulate(filtered), grid);
}

struct PoseRecord {
  std::int64_t timestamp_ns = 0;
  RigidTransform pose;
};

/// One line per scan: "timestamp_ns tx ty tz qw qx qy qz". Blank lines and
/// lines starting with '#' are ignored.
inline std::vector<PoseRecord> parse_poses(const std::string& text) {
  std::vector<PoseRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
      continue;
    std::istringstream ls(line);
    PoseRecord rec;
    double tx, ty, tz, qw, qx, qy, qz;
    if (!(ls >> rec.timestamp_ns >> tx >> ty >> tz >> qw >> qx >> qy >> qz))
      throw Error("poses file line " + std::to_string(line_no) + ": expected 'timestamp tx ty tz qw qx qy qz'");
    rec.pose = RigidTransform::from_quaternion(qw, qx, qy, qz, Point3(tx, ty, tz));
    out.push_back(rec);
  }
  return out;
}

inline std::string format_poses(std::span<const PoseRecord> poses) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& p : poses) {
    Eigen::Quaterniond q(p.pose.rotation);
    out << p.timestamp_ns << ' ' << p.pose.translation.x() << ' ' << p.pose.translation.y() << ' '
        << p.pose.translation.z() << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << '\n';
  }
  return out.str();
}

/// Scan directory layout: "*.ply" files (lexicographic order) paired
/// line-by-line with `poses.txt`.
inline std::vector<PosedScan> read_scan_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ply") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  const auto poses = parse_poses(io::read_text(dir / "poses.txt"));
  if (poses.size() != files.size())
    throw Error("poses.txt has " + std::to_string(poses.size()) + " entries for " + std::to_string(files.size()) +
                " scan files");
  std::vector<PosedScan> scans;
  for (std::size_t n = 0; n < files.size(); ++n)
    scans.push_back({io::read_ply(files[n]).cloud, poses[n].pose, poses[n].timestamp_ns});
  return scans;
}

inline void write_scan_directory(const std::filesystem::path& dir, std::span<const PosedScan> scans) {
  std::filesystem::create_directories(dir);
  std::vector<PoseRecord> poses;
  for (std::size_t n = 0; n < scans.size(); ++n) {
    std::ostringstream name;
    name << "scan_" << std::setw(4) << std::setfill('0') << n << ".ply";
    io::write_ply(dir / name.str(), scans[n].cloud);
    poses.push_back({scans[n].timestamp_ns, scans[n].pose});
  }
  io::write_text(dir / "poses.txt", format_poses(poses));
}

}  // namespace pcm
