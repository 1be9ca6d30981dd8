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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcm/geom/spatial_index.hpp"
#include "pcm/scene/voxel_scene.hpp"

namespace pcm {

// ---- set decomposition -------------------------------------------------------

struct DiffResult {
  KeySet add, del;            // predicted: P_upd \ P_out, P_out \ P_upd
  KeySet add_star, del_star;  // ground truth: P*_upd \ P_out, P_out \ P*_upd
  VoxelGrid grid;

  PointCloud add_points() const { return key_centers(add, grid); }
  PointCloud del_points() const { return key_centers(del, grid); }
  PointCloud add_star_points() const { return key_centers(add_star, grid); }
  PointCloud del_star_points() const { return key_centers(del_star, grid); }
};

inline KeySet key_difference(const VoxelScene& a, const VoxelScene& b) {
  KeySet out;
  auto ib = b.voxels.begin();
  for (const auto& [k, ids] : a.voxels) {
    while (ib != b.voxels.end() && ib->first < k) ++ib;
    if (ib == b.voxels.end() || ib->first != k) out.insert(out.end(), k);
  }
  return out;
}

inline DiffResult diff_sets(const VoxelScene& outdated, const VoxelScene& updated, const VoxelScene& truth) {
  if (!(outdated.grid == updated.grid) || !(outdated.grid == truth.grid)) throw Error("incompatible voxel grids");
  DiffResult d;
  d.grid = outdated.grid;
  d.add = key_difference(updated, outdated);
  d.del = key_difference(outdated, updated);
  d.add_star = key_difference(truth, outdated);
  d.del_star = key_difference(outdated, truth);
  return d;
}

// ---- distances -----------------------------------------------------------------

struct MetricOptions {
  bool oracle = false;  // brute-force O(N*M) nearest neighbors
  unsigned threads = 1;
};

inline constexpr std::size_t kMetricChunk = 1024;

/// Squared distance from every query to its nearest target, in query order.
inline std::vector<double> nearest_squared(std::span<const Point3> queries, std::span<const Point3> targets,
                                           const MetricOptions& opt) {
  if (targets.empty() || queries.empty()) throw Error("undefined on empty set");
  std::vector<double> out(queries.size());
  if (opt.oracle) {
    parallel_chunks(queries.size(), kMetricChunk, opt.threads, [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t n = b; n < e; ++n) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& t : targets) best = std::min(best, squared_distance(queries[n], t));
        out[n] = best;
      }
    });
  } else {
    const SpatialIndex index(targets);
    parallel_chunks(queries.size(), kMetricChunk, opt.threads, [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t n = b; n < e; ++n) out[n] = index.nearest(queries[n]).squared_distance;
    });
  }
  return out;
}

/// Summary of one direction of nearest distances.
struct DirectedTerms {
  double mean_squared = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  std::size_t count = 0;
};

/// Even counts take the mean of the two central order statistics.
inline double median_of(std::vector<double> values) {
  if (values.empty()) throw Error("undefined on empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline DirectedTerms directed_terms(std::span<const Point3> from, std::span<const Point3> to,
                                    const MetricOptions& opt = {}) {
  const std::vector<double> sq = nearest_squared(from, to, opt);
  std::vector<double> d(sq.size());
  for (std::size_t n = 0; n < sq.size(); ++n) d[n] = std::sqrt(sq[n]);
  // Sums are reduced per fixed chunk and then in chunk order.
  const std::size_t chunks = num_chunks(sq.size(), kMetricChunk);
  std::vector<double> part_sq(chunks, 0.0), part_d(chunks, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t n = c * kMetricChunk; n < std::min(sq.size(), (c + 1) * kMetricChunk); ++n) {
      part_sq[c] += sq[n];
      part_d[c] += d[n];
    }
  DirectedTerms t;
  t.count = sq.size();
  double s_sq = 0.0, s_d = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    s_sq += part_sq[c];
    s_d += part_d[c];
  }
  t.mean_squared = s_sq / static_cast<double>(t.count);
  t.mean = s_d / static_cast<double>(t.count);
  t.max = *std::max_element(d.begin(), d.end());
  t.median = median_of(std::move(d));
  return t;
}

/// Mean squared nearest distance both ways, summed (m^2).
inline double chamfer(std::span<const Point3> p, std::span<const Point3> q, const MetricOptions& opt = {}) {
  return directed_terms(p, q, opt).mean_squared + directed_terms(q, p, opt).mean_squared;
}
inline double hausdorff(std::span<const Point3> p, std::span<const Point3> q, const MetricOptions& opt = {}) {
  return std::max(directed_terms(p, q, opt).max, directed_terms(q, p, opt).max);
}
inline double modified_hausdorff(std::span<const Point3> p, std::span<const Point3> q,
                                 const MetricOptions& opt = {}) {
  return std::max(directed_terms(p, q, opt).mean, directed_terms(q, p, opt).mean);
}
inline double median_point(std::span<const Point3> p, std::span<const Point3> q, const MetricOptions& opt = {}) {
  return std::max(directed_terms(p, q, opt).median, directed_terms(q, p, opt).median);
}

inline double chamfer(const PointCloud& p, const PointCloud& q, const MetricOptions& opt = {}) {
  return chamfer(std::span<const Point3>(p.points), std::span<const Point3>(q.points), opt);
}
inline double hausdorff(const PointCloud& p, const PointCloud& q, const MetricOptions& opt = {}) {
  return hausdorff(std::span<const Point3>(p.points), std::span<const Point3>(q.points), opt);
}
inline double modified_hausdorff(const PointCloud& p, const PointCloud& q, const MetricOptions& opt = {}) {
  return modified_hausdorff(std::span<const Point3>(p.points), std::span<const Point3>(q.points), opt);
}
inline double median_point(const PointCloud& p, const PointCloud& q, const MetricOptions& opt = {}) {
  return median_point(std::span<const Point3>(p.points), std::span<const Point3>(q.points), opt);
}

/// All four metrics of one pair. `predicted` is the estimate, `truth` the
/// reference; fields stay empty when either side is empty.
struct MetricReport {
  std::optional<double> chamfer_m2, hausdorff_m, modified_hausdorff_m, median_point_m;
  std::optional<DirectedTerms> pred_to_truth, truth_to_pred;
  std::size_t predicted_count = 0, truth_count = 0;

  bool defined() const { return chamfer_m2.has_value(); }

  nlohmann::json to_json() const {
    auto opt = [](const std::optional<double>& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(); };
    auto dir = [](const std::optional<DirectedTerms>& t) -> nlohmann::json {
      if (!t) return nullptr;
      return {{"mean_squared_m2", t->mean_squared}, {"max_m", t->max}, {"mean_m", t->mean},
              {"median_m", t->median}, {"count", t->count}};
    };
    nlohmann::json undefined = nlohmann::json::array();
    if (!defined())
      for (const char* name : {"chamfer_m2", "hausdorff_m", "modified_hausdorff_m", "median_point_m"}) undefined.push_back(name);
    return {{"chamfer_m2", opt(chamfer_m2)},
            {"hausdorff_m", opt(hausdorff_m)},
            {"modified_hausdorff_m", opt(modified_hausdorff_m)},
            {"median_point_m", opt(median_point_m)},
            {"directed", {{"predicted_to_truth", dir(pred_to_truth)}, {"truth_to_predicted", dir(truth_to_pred)}}},
            {"counts", {{"predicted", predicted_count}, {"truth", truth_count}}},
            {"undefined", undefined}};
  }
};

inline MetricReport evaluate_pair(const PointCloud& predicted, const PointCloud& truth, const MetricOptions& opt = {}) {
  MetricReport r;
  r.predicted_count = predicted.size();
  r.truth_count = truth.size();
  if (predicted.empty() || truth.empty()) return r;
  const auto a = directed_terms(predicted.points, truth.points, opt);
  const auto b = directed_terms(truth.points, predicted.points, opt);
  r.pred_to_truth = a;
  r.truth_to_pred = b;
  r.chamfer_m2 = a.mean_squared + b.mean_squared;
  r.hausdorff_m = std::max(a.max, b.max);
  r.modified_hausdorff_m = std::max(a.mean, b.mean);
  r.median_point_m = std::max(a.median, b.median);
  return r;
}

/// Exact key-set agreement of one predicted/ground-truth pair.
struct KeySetComparison {
  std::size_t true_positive = 0, false_positive = 0, false_negative = 0;
  bool exact() const { return false_positive == 0 && false_negative == 0; }
  nlohmann::json to_json() const {
    return {{"true_positive", true_positive}, {"false_positive", false_positive},
            {"false_negative", false_negative}, {"exact", exact()}};
  }
};

inline KeySetComparison compare_keys(const KeySet& predicted, const KeySet& truth) {
  KeySetComparison c;
  for (const auto& k : predicted) (truth.contains(k) ? c.true_positive : c.false_positive)++;
  for (const auto& k : truth)
    if (!predicted.contains(k)) ++c.false_negative;
  return c;
}

struct UpdateReport {
  MetricReport addition, deletion;
  KeySetComparison addition_keys, deletion_keys;
  /// Whole updated map against the whole ground truth, when scenes are given.
  std::optional<MetricReport> map;

  nlohmann::json to_json() const {
    nlohmann::json j{{"addition", addition.to_json()},
                     {"deletion", deletion.to_json()},
                     {"addition_keys", addition_keys.to_json()},
                     {"deletion_keys", deletion_keys.to_json()}};
    if (map) j["map"] = map->to_json();
    return j;
  }
};

/// Addition pair P_add vs P*_add, deletion pair P_del vs P*_del.
inline UpdateReport evaluate_update(const DiffResult& d, const MetricOptions& opt = {}) {
  UpdateReport r;
  r.addition = evaluate_pair(d.add_points(), d.add_star_points(), opt);
  r.deletion = evaluate_pair(d.del_points(), d.del_star_points(), opt);
  r.addition_keys = compare_keys(d.add, d.add_star);
  r.deletion_keys = compare_keys(d.del, d.del_star);
  return r;
}

inline UpdateReport evaluate_update(const VoxelScene& outdated, const VoxelScene& updated, const VoxelScene& truth,
                                    const MetricOptions& opt = {}) {
  UpdateReport r = evaluate_update(diff_sets(outdated, updated, truth), opt);
  r.map = evaluate_pair(scene_points(updated), scene_points(truth), opt);
  return r;
}

}  // namespace pcm
