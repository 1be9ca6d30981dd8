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
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pcm/common.hpp"

namespace pcm {

/// Image-plane point in pixel-index coordinates: pixel (col, row) is the
/// lattice point (col, row).
struct Point2 {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
  friend auto operator<=>(const Point2&, const Point2&) = default;
};

/// Convex polygon, counter-clockwise in (u, v); 1 vertex is a point and
/// 2 vertices a segment.
using Polygon = std::vector<Point2>;

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u);
}

/// Andrew's monotone chain. Collinear boundary points are dropped; the
/// first vertex is the lexicographically smallest one.
inline Polygon convex_hull_2d(std::span<const Point2> pixels) {
  if (pixels.empty()) throw Error("no change pixels");
  std::vector<Point2> pts(pixels.begin(), pixels.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;

  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  // All points collinear: the chain collapses to the two extremes.
  return hull;
}

/// Closed containment (boundary counts as inside). `eps` loosens the edge
/// tests for callers working with non-lattice coordinates.
inline bool polygon_contains(const Polygon& poly, const Point2& p, double eps = 0.0) {
  if (poly.empty()) return false;
  if (poly.size() == 1) return std::abs(poly[0].u - p.u) <= eps && std::abs(poly[0].v - p.v) <= eps;
  if (poly.size() == 2) {
    const Point2& a = poly[0];
    const Point2& b = poly[1];
    const double len = std::hypot(b.u - a.u, b.v - a.v);
    if (std::abs(cross(a, b, p)) > eps * len) return false;
    return p.u >= std::min(a.u, b.u) - eps && p.u <= std::max(a.u, b.u) + eps &&
           p.v >= std::min(a.v, b.v) - eps && p.v <= std::max(a.v, b.v) + eps;
  }
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    const double len = std::hypot(b.u - a.u, b.v - a.v);
    if (cross(a, b, p) < -eps * len) return false;
  }
  return true;
}

/// Row-major binary raster; 0 = unset, 255 = set.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {
    if (w <= 0 || h <= 0) throw Error("mask size must be positive");
  }

  bool at(int col, int row) const {
    return data[static_cast<std::size_t>(row) * width + col] != 0;
  }
  void set(int col, int row) { data[static_cast<std::size_t>(row) * width + col] = 255; }
  bool in_bounds(int col, int row) const {
    return col >= 0 && row >= 0 && col < width && row < height;
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto b) { return b != 0; }));
  }
  void merge(const BinaryMask& other) {
    if (other.width != width || other.height != height) throw Error("mask size mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] |= other.data[i];
  }
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Sets every pixel whose lattice point lies inside or on the polygon.
/// Degenerate polygons set the lattice points they pass through.
inline BinaryMask rasterize_polygon(const Polygon& poly, int width, int height) {
  BinaryMask mask(width, height);
  if (poly.empty()) return mask;

  double vmin = poly[0].v, vmax = poly[0].v;
  for (const auto& p : poly) {
    vmin = std::min(vmin, p.v);
    vmax = std::max(vmax, p.v);
  }
  const int row_lo = std::max(0, static_cast<int>(std::ceil(vmin)));
  const int row_hi = std::min(height - 1, static_cast<int>(std::floor(vmax)));
  const std::size_t n = poly.size();

  for (int row = row_lo; row <= row_hi; ++row) {
    const double y = row;
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -std::numeric_limits<double>::infinity();
    auto extend = [&](double x) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    };
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = poly[i];
      const Point2& b = poly[(i + 1) % n];
      if (a.v == y) extend(a.u);
      if (b.v == y) extend(b.u);
      if ((a.v < y && b.v > y) || (a.v > y && b.v < y))
        extend(a.u + (y - a.v) * (b.u - a.u) / (b.v - a.v));
    }
    if (!(xmin <= xmax)) continue;
    // The scanline interval is only a candidate range; the closed
    // containment test decides the boundary pixels exactly.
    int lo = std::max(0, static_cast<int>(std::ceil(xmin - 1e-6)));
    int hi = std::min(width - 1, static_cast<int>(std::floor(xmax + 1e-6)));
    while (lo <= hi && !polygon_contains(poly, {static_cast<double>(lo), y})) ++lo;
    while (hi >= lo && !polygon_contains(poly, {static_cast<double>(hi), y})) --hi;
    for (int col = lo; col <= hi; ++col) mask.set(col, row);
  }
  return mask;
}

}  // namespace pcm
