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

// Binary little-endian PLY for point clouds. Written files always carry
// double x/y/z, an optional uint64 "id", and optional extra double
// properties. The reader accepts any scalar property types on the vertex
// element and skips other elements.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pcm/geom/types.hpp"
#include "pcm/io/binary.hpp"

namespace pcm::io {

struct PlyData {
  PointCloud cloud;
  /// Extra per-vertex scalar properties keyed by name, in file order.
  std::map<std::string, std::vector<double>> extra;
};

namespace ply_detail {

enum class Scalar { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64, kInt64, kUInt64 };

inline Scalar parse_scalar(const std::string& t) {
  if (t == "char" || t == "int8") return Scalar::kInt8;
  if (t == "uchar" || t == "uint8") return Scalar::kUInt8;
  if (t == "short" || t == "int16") return Scalar::kInt16;
  if (t == "ushort" || t == "uint16") return Scalar::kUInt16;
  if (t == "int" || t == "int32") return Scalar::kInt32;
  if (t == "uint" || t == "uint32") return Scalar::kUInt32;
  if (t == "float" || t == "float32") return Scalar::kFloat32;
  if (t == "double" || t == "float64") return Scalar::kFloat64;
  if (t == "int64") return Scalar::kInt64;
  if (t == "uint64") return Scalar::kUInt64;
  throw Error("PLY: unsupported property type '" + t + "'");
}

inline std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::kInt8: case Scalar::kUInt8: return 1;
    case Scalar::kInt16: case Scalar::kUInt16: return 2;
    case Scalar::kInt32: case Scalar::kUInt32: case Scalar::kFloat32: return 4;
    default: return 8;
  }
}

struct Property {
  std::string name;
  Scalar type;
  bool is_list = false;
  Scalar count_type = Scalar::kUInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

// Reads a value as double, or as exact uint64 through `as_u64`.
inline double read_scalar(ByteReader& r, Scalar s, std::uint64_t* as_u64 = nullptr) {
  auto out = [&](auto v) {
    if (as_u64) *as_u64 = static_cast<std::uint64_t>(v);
    return static_cast<double>(v);
  };
  switch (s) {
    case Scalar::kInt8: return out(r.get<std::int8_t>());
    case Scalar::kUInt8: return out(r.get<std::uint8_t>());
    case Scalar::kInt16: return out(r.get<std::int16_t>());
    case Scalar::kUInt16: return out(r.get<std::uint16_t>());
    case Scalar::kInt32: return out(r.get<std::int32_t>());
    case Scalar::kUInt32: return out(r.get<std::uint32_t>());
    case Scalar::kFloat32: return out(r.get<float>());
    case Scalar::kFloat64: return out(r.get<double>());
    case Scalar::kInt64: return out(r.get<std::int64_t>());
    case Scalar::kUInt64: return out(r.get<std::uint64_t>());
  }
  return 0.0;
}

}  // namespace ply_detail

inline Bytes encode_ply(const PointCloud& cloud,
                        const std::map<std::string, std::vector<double>>& extra = {}) {
  if (cloud.has_ids() && cloud.ids.size() != cloud.size())
    throw Error("PLY: ids length does not match point count");
  for (const auto& [name, values] : extra)
    if (values.size() != cloud.size()) throw Error("PLY: property '" + name + "' has wrong length");

  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n"
         << "element vertex " << cloud.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_ids()) header << "property uint64 id\n";
  for (const auto& [name, values] : extra) header << "property double " << name << "\n";
  header << "end_header\n";

  ByteWriter w;
  const std::string h = header.str();
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(h.data()), h.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    w.put(cloud.points[i].x());
    w.put(cloud.points[i].y());
    w.put(cloud.points[i].z());
    if (cloud.has_ids()) w.put(cloud.ids[i]);
    for (const auto& [name, values] : extra) w.put(values[i]);
  }
  return w.take();
}

inline PlyData decode_ply(std::span<const std::uint8_t> bytes, const std::string& origin = "PLY") {
  using namespace ply_detail;
  const std::string corrupt = origin + ": malformed PLY";
  // Header is ASCII lines up to and including "end_header\n".
  static constexpr std::string_view kEnd = "end_header\n";
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto end_pos = text.find(kEnd);
  if (text.substr(0, 4) != "ply\n" || end_pos == std::string_view::npos) throw Error(corrupt);

  std::istringstream hs(std::string(text.substr(0, end_pos)));
  std::string line;
  std::vector<Element> elements;
  bool format_ok = false;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw Error(origin + ": only binary_little_endian PLY is supported");
      format_ok = true;
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw Error(corrupt);
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(ct);
        p.type = parse_scalar(it);
      } else {
        p.type = parse_scalar(t);
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    }
  }
  if (!format_ok) throw Error(corrupt);

  ByteReader r(bytes.subspan(end_pos + kEnd.size()), corrupt);
  PlyData out;
  bool saw_vertex = false;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    if (is_vertex) {
      saw_vertex = true;
      out.cloud.points.resize(e.count);
      bool has_id = false;
      for (const auto& p : e.props) {
        if (p.is_list) continue;
        if (p.name == "id") has_id = true;
        else if (p.name != "x" && p.name != "y" && p.name != "z") out.extra[p.name].resize(e.count);
      }
      if (has_id) out.cloud.ids.resize(e.count);
    }
    for (std::size_t i = 0; i < e.count; ++i) {
      for (const auto& p : e.props) {
        if (p.is_list) {
          std::uint64_t n = 0;
          read_scalar(r, p.count_type, &n);
          r.get_bytes(static_cast<std::size_t>(n) * scalar_size(p.type));
          continue;
        }
        std::uint64_t as_u64 = 0;
        const double v = read_scalar(r, p.type, &as_u64);
        if (!is_vertex) continue;
        if (p.name == "x") out.cloud.points[i].x() = v;
        else if (p.name == "y") out.cloud.points[i].y() = v;
        else if (p.name == "z") out.cloud.points[i].z() = v;
        else if (p.name == "id") out.cloud.ids[i] = as_u64;
        else out.extra[p.name][i] = v;
      }
    }
  }
  if (!saw_vertex) throw Error(origin + ": PLY has no vertex element");
  return out;
}

inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
                      const std::map<std::string, std::vector<double>>& extra = {}) {
  write_file(path, encode_ply(cloud, extra));
}

inline PlyData read_ply(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return decode_ply(b, path.string());
}

}  // namespace pcm::io
