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
#include <numeric>
#include <span>
#include <vector>

#include "pcm/geom/types.hpp"

namespace pcm {

/// Squared Euclidean distance with a fixed evaluation order. The index and
/// every brute-force path share this function so results compare exactly.
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = std::numeric_limits<double>::infinity();
  double distance() const { return std::sqrt(squared_distance); }
};

/// Immutable kd-tree over a copy of the input points. Queries are const and
/// safe to run concurrently.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::span<const Point3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw Error("empty point set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, order_.size());
  }

  std::size_t size() const { return points_.size(); }
  const Point3& point(std::size_t i) const { return points_[i]; }

  /// Nearest indexed point; ties go to the lowest point index.
  Neighbor nearest(const Point3& q) const {
    Neighbor best;
    search(0, q, best);
    return best;
  }

  double nearest_distance(const Point3& q) const { return nearest(q).distance(); }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin = 0, end = 0;   // range in order_ (leaves)
    int axis = -1;                    // -1 for leaves
    double split = 0.0;
    std::size_t left = 0, right = 0;  // child node indices
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void search(std::size_t id, const Point3& q, Neighbor& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d = squared_distance(q, points_[idx]);
        if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
          best.squared_distance = d;
          best.index = idx;
        }
      }
      return;
    }
    // Left child holds coordinates <= split, right child >= split.
    const double diff = q[n.axis] - n.split;
    const std::size_t near_child = diff < 0.0 ? n.left : n.right;
    const std::size_t far_child = diff < 0.0 ? n.right : n.left;
    search(near_child, q, best);
    if (diff * diff <= best.squared_distance) search(far_child, q, best);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

inline SpatialIndex build_index(const PointCloud& cloud) { return SpatialIndex(cloud.points); }

inline double nearest_distance(const SpatialIndex& index, const Point3& q) {
  return index.nearest_distance(q);
}

}  // namespace pcm
