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

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pcm/geom/hull.hpp"
#include "pcm/io/ply.hpp"
#include "pcm/scene/voxel_scene.hpp"

namespace pcm {

/// Paired points: source in the predictor frame, target in the map frame.
struct CorrespondenceSet {
  std::vector<Point3> source;
  std::vector<Point3> target;

  std::size_t size() const { return source.size(); }
  void add(const Point3& s, const Point3& t) {
    source.push_back(s);
    target.push_back(t);
  }
};

struct SimilarityFit {
  SimilarityTransform transform;
  double rmse = 0.0;
  std::size_t pairs = 0;
};

/// Sum of squared residuals of `t` over `corr`.
inline double residual_sum(const SimilarityTransform& t, const CorrespondenceSet& corr) {
  double s = 0.0;
  for (std::size_t n = 0; n < corr.size(); ++n) s += (t.apply(corr.source[n]) - corr.target[n]).squaredNorm();
  return s;
}

/// Closed-form least-squares similarity target ≈ s R source + t, with the
/// sign correction that keeps det(R) = +1.
inline SimilarityFit kabsch_umeyama(const CorrespondenceSet& corr) {
  if (corr.source.size() != corr.target.size()) throw Error("correspondence source/target length mismatch");
  const std::size_t n = corr.size();
  if (n < 3) throw Error("need at least 3 correspondences, got " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (!is_finite(corr.source[i]) || !is_finite(corr.target[i])) throw Error("non-finite correspondence");

  Point3 mu_x = Point3::Zero(), mu_y = Point3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_x += corr.source[i];
    mu_y += corr.target[i];
  }
  mu_x /= static_cast<double>(n);
  mu_y /= static_cast<double>(n);

  Matrix3 sigma = Matrix3::Zero();  // (1/n) Σ (y - μy)(x - μx)^T
  Matrix3 cov_x = Matrix3::Zero();
  double var_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 dx = corr.source[i] - mu_x, dy = corr.target[i] - mu_y;
    sigma += dy * dx.transpose();
    cov_x += dx * dx.transpose();
    var_x += dx.squaredNorm();
  }
  sigma /= static_cast<double>(n);
  cov_x /= static_cast<double>(n);
  var_x /= static_cast<double>(n);

  // Rank check on the centered source: its second principal variance must
  // not vanish relative to the first (collinear or coincident points).
  const Eigen::SelfAdjointEigenSolver<Matrix3> eig(cov_x);
  const auto ev = eig.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) throw Error("rank-deficient correspondence set");

  const Eigen::JacobiSVD<Matrix3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix3& u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  Matrix3 s = Matrix3::Identity();
  if (u.determinant() * v.determinant() < 0.0) s(2, 2) = -1.0;

  SimilarityFit fit;
  fit.transform.rotation = u * s * v.transpose();
  fit.transform.scale = (svd.singularValues().asDiagonal() * s).trace() / var_x;
  fit.transform.translation = mu_y - fit.transform.scale * (fit.transform.rotation * mu_x);
  fit.pairs = n;
  fit.rmse = std::sqrt(residual_sum(fit.transform, corr) / static_cast<double>(n));
  if (!(fit.transform.scale > 0.0)) throw Error("rank-deficient correspondence set");
  return fit;
}

/// Predictor output: points in an arbitrary similarity frame, each tagged
/// with its source pixel and image.
struct PredictedReconstruction {
  PointCloud cloud;
  std::vector<double> u, v;
  std::vector<std::int32_t> image_index;
  std::vector<std::uint8_t> in_change_mask;

  void validate() const {
    const auto n = cloud.size();
    if (u.size() != n || v.size() != n || image_index.size() != n)
      throw Error("predicted reconstruction attribute length mismatch");
    if (!in_change_mask.empty() && in_change_mask.size() != n) throw Error("mask flag length mismatch");
    cloud.validate();
  }
};

/// Whether pixel (floor(u), floor(v)) of image `image` is set in its mask.
inline bool pixel_in_masks(double u, double v, std::int32_t image, std::span<const BinaryMask> masks) {
  if (image < 0 || static_cast<std::size_t>(image) >= masks.size()) throw Error("image index has no mask");
  const auto& m = masks[static_cast<std::size_t>(image)];
  const int col = static_cast<int>(std::floor(u)), row = static_cast<int>(std::floor(v));
  return m.in_bounds(col, row) && m.at(col, row);
}

inline void flag_change_pixels(PredictedReconstruction& pred, std::span<const BinaryMask> masks) {
  pred.in_change_mask.assign(pred.cloud.size(), 0);
  for (std::size_t n = 0; n < pred.cloud.size(); ++n)
    pred.in_change_mask[n] = pixel_in_masks(pred.u[n], pred.v[n], pred.image_index[n], masks) ? 1 : 0;
}

struct AdditionResult {
  PointCloud points;  // map frame; ids are the predicted point indices
  SimilarityFit fit;
  bool fitted = false;
};

/// Fits the similarity on `corr` and maps every predicted point whose
/// source pixel is masked. No masked points means no fit and no output.
inline AdditionResult register_addition(const PredictedReconstruction& pred, const CorrespondenceSet& corr,
                                        std::span<const BinaryMask> masks) {
  pred.validate();
  std::vector<std::size_t> masked;
  for (std::size_t n = 0; n < pred.cloud.size(); ++n)
    if (pixel_in_masks(pred.u[n], pred.v[n], pred.image_index[n], masks)) masked.push_back(n);
  AdditionResult out;
  if (masked.empty()) return out;
  out.fit = kabsch_umeyama(corr);
  out.fitted = true;
  for (auto n : masked) out.points.push_back(out.fit.transform.apply(pred.cloud.points[n]), n);
  return out;
}

/// Concatenates per-batch additions and keeps one point per voxel (its
/// center).
inline KeySet accumulate_addition_keys(std::span<const PointCloud> batches, const VoxelGrid& grid) {
  grid.validate();
  KeySet keys;
  for (const auto& b : batches)
    for (const auto& p : b.points) keys.insert(grid.key_of(p));
  return keys;
}

inline PointCloud accumulate_additions(std::span<const PointCloud> batches, const VoxelGrid& grid) {
  return key_centers(accumulate_addition_keys(batches, grid), grid);
}

/// (P_out \ deleted) ∪ added. Added voxels carry their key hash as
/// provenance unless already present.
inline VoxelScene apply_update(const VoxelScene& outdated, const KeySet& deleted, const KeySet& added) {
  VoxelScene out;
  out.grid = outdated.grid;
  for (const auto& [k, ids] : outdated.voxels)
    if (!deleted.contains(k)) out.voxels.emplace_hint(out.voxels.end(), k, ids);
  for (const auto& k : added) out.voxels.try_emplace(k, std::vector<std::uint64_t>{key_hash(k)});
  return out;
}

// ---- IO ----------------------------------------------------------------------

/// One pair per line: "sx sy sz tx ty tz"; '#' starts a comment line.
inline CorrespondenceSet parse_correspondences(const std::string& text) {
  CorrespondenceSet c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double a[6];
    for (double& x : a)
      if (!(ls >> x)) throw Error("correspondence line " + std::to_string(line_no) + ": expected 6 numbers");
    c.add({a[0], a[1], a[2]}, {a[3], a[4], a[5]});
  }
  return c;
}

inline std::string format_correspondences(const CorrespondenceSet& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t n = 0; n < c.size(); ++n) {
    const auto& s = c.source[n];
    const auto& t = c.target[n];
    out << s.x() << ' ' << s.y() << ' ' << s.z() << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << '\n';
  }
  return out.str();
}

inline void write_prediction(const std::filesystem::path& path, const PredictedReconstruction& pred) {
  pred.validate();
  std::vector<double> img(pred.image_index.begin(), pred.image_index.end());
  io::write_ply(path, pred.cloud, {{"u", pred.u}, {"v", pred.v}, {"image_index", img}});
}

inline PredictedReconstruction read_prediction(const std::filesystem::path& path) {
  io::PlyData d = io::read_ply(path);
  PredictedReconstruction pred;
  pred.cloud = std::move(d.cloud);
  for (const char* name : {"u", "v", "image_index"})
    if (!d.extra.contains(name)) throw Error(path.string() + ": missing vertex property '" + name + "'");
  pred.u = std::move(d.extra["u"]);
  pred.v = std::move(d.extra["v"]);
  for (double x : d.extra["image_index"]) {
    if (x != std::floor(x) || x < 0 || x > std::numeric_limits<std::int32_t>::max())
      throw Error(path.string() + ": image_index must be a non-negative integer");
    pred.image_index.push_back(static_cast<std::int32_t>(x));
  }
  pred.validate();
  return pred;
}

}  // namespace pcm
