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
#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <random>

#include "pcm/update/registration.hpp"
#include "test_util.hpp"

namespace pcm {
namespace {

CorrespondenceSet mapped(const std::vector<Point3>& src, const SimilarityTransform& t) {
  CorrespondenceSet c;
  for (const auto& p : src) c.add(p, t.apply(p));
  return c;
}

TEST(KabschUmeyama, Identity) {
  std::mt19937_64 rng(1);
  const auto pts = testing::random_points(rng, 10);
  const auto fit = kabsch_umeyama(mapped(pts, {}));
  EXPECT_NEAR(fit.transform.scale, 1.0, 1e-12);
  EXPECT_LE((fit.transform.rotation - Matrix3::Identity()).norm(), 1e-12);
  EXPECT_LE(fit.transform.translation.norm(), 1e-12);
  EXPECT_LE(fit.rmse, 1e-12);
}

TEST(KabschUmeyama, ScaledQuarterTurn) {
  std::mt19937_64 rng(2);
  const auto pts = testing::random_points(rng, 10);
  const SimilarityTransform truth{2.0, rotation_z(std::numbers::pi / 2), Point3(1, 2, 3)};
  const auto fit = kabsch_umeyama(mapped(pts, truth));
  EXPECT_NEAR(fit.transform.scale, 2.0, 1e-9);
  EXPECT_LE((fit.transform.rotation - truth.rotation).norm(), 1e-9);
  EXPECT_LE((fit.transform.translation - truth.translation).norm(), 1e-9);
}

TEST(KabschUmeyama, ReflectionGivesProperRotation) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto pts = testing::random_points(rng, 12);
    CorrespondenceSet c;
    for (const auto& p : pts) c.add(p, Point3(-p.x(), p.y(), p.z()));
    const auto fit = kabsch_umeyama(c);
    EXPECT_NEAR(fit.transform.rotation.determinant(), 1.0, 1e-12);
    EXPECT_GT(fit.rmse, 1e-6);
  }
}

TEST(KabschUmeyama, MatchesEigenUmeyama) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int t = 0; t < 200; ++t) {
    const auto pts = testing::random_points(rng, 5 + t % 40);
    const SimilarityTransform truth{0.1 + 0.05 * t, testing::random_rotation(rng), Point3(t, -2, 0.5)};
    CorrespondenceSet c = mapped(pts, truth);
    for (auto& q : c.target) q += Point3(noise(rng), noise(rng), noise(rng));
    const auto fit = kabsch_umeyama(c);
    Eigen::Matrix3Xd src(3, c.size()), dst(3, c.size());
    for (std::size_t n = 0; n < c.size(); ++n) {
      src.col(static_cast<Eigen::Index>(n)) = c.source[n];
      dst.col(static_cast<Eigen::Index>(n)) = c.target[n];
    }
    const Eigen::Matrix4d ref = Eigen::umeyama(src, dst, true);
    const double s = ref.block<3, 1>(0, 0).norm();
    EXPECT_NEAR(fit.transform.scale, s, 1e-9 * s);
    EXPECT_LE((fit.transform.rotation - ref.block<3, 3>(0, 0) / s).norm(), 1e-9);
    EXPECT_LE((fit.transform.translation - ref.block<3, 1>(0, 3)).norm(), 1e-8 * (1 + ref.block<3, 1>(0, 3).norm()));
  }
}

TEST(KabschUmeyama, LocallyOptimalUnderNoise) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1), tiny(0.0, 1e-3);
  for (int t = 0; t < 30; ++t) {
    const auto pts = testing::random_points(rng, 30);
    CorrespondenceSet c = mapped(pts, {1.7, testing::random_rotation(rng), Point3(3, 1, -2)});
    for (auto& q : c.target) q += Point3(noise(rng), noise(rng), noise(rng));
    const auto fit = kabsch_umeyama(c);
    const double best = residual_sum(fit.transform, c);
    for (int k = 0; k < 50; ++k) {
      SimilarityTransform p = fit.transform;
      p.scale *= 1 + tiny(rng);
      const Eigen::Vector3d w(tiny(rng), tiny(rng), tiny(rng));
      p.rotation = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() * p.rotation;
      p.translation += Point3(tiny(rng), tiny(rng), tiny(rng));
      EXPECT_GE(residual_sum(p, c), best * (1 - 1e-12));
    }
  }
}

TEST(KabschUmeyama, RigidEquivariance) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto pts = testing::random_points(rng, 20);
    const SimilarityTransform truth{0.5 + t * 0.1, testing::random_rotation(rng), Point3(1, 2, 3)};
    CorrespondenceSet c = mapped(pts, truth);
    const RigidTransform g{testing::random_rotation(rng), Point3(-4, 5, t)};
    CorrespondenceSet moved;
    for (std::size_t n = 0; n < c.size(); ++n) moved.add(c.source[n], g.apply(c.target[n]));
    const auto a = kabsch_umeyama(c).transform, b = kabsch_umeyama(moved).transform;
    const SimilarityTransform ga = g * a;
    EXPECT_NEAR(b.scale, ga.scale, 1e-9 * ga.scale);
    EXPECT_LE((b.rotation - ga.rotation).norm(), 1e-9);
    EXPECT_LE((b.translation - ga.translation).norm(), 1e-9 * (1 + ga.translation.norm()));
  }
}

TEST(KabschUmeyama, Degenerate) {
  CorrespondenceSet two;
  two.add({0, 0, 0}, {0, 0, 0});
  two.add({1, 0, 0}, {1, 0, 0});
  EXPECT_THROW(kabsch_umeyama(two), Error);
  CorrespondenceSet line;
  for (int n = 0; n < 10; ++n) line.add({double(n), 2.0 * n, 0}, {double(n), 0, 0});
  try {
    kabsch_umeyama(line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "rank-deficient correspondence set");
  }
  CorrespondenceSet same;
  for (int n = 0; n < 5; ++n) same.add({1, 1, 1}, {double(n), 0, 0});
  EXPECT_THROW(kabsch_umeyama(same), Error);
  // planar sources are fine
  CorrespondenceSet plane;
  for (int n = 0; n < 9; ++n) plane.add({double(n % 3), double(n / 3), 0}, {double(n % 3), double(n / 3), 5});
  EXPECT_NO_THROW(kabsch_umeyama(plane));
}

PredictedReconstruction grid_prediction(const SimilarityTransform& pred_from_map, std::vector<Point3>* map_pts) {
  PredictedReconstruction p;
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 30; ++c) {
      const Point3 m(c * 0.2, r * 0.2, 0.05 * ((c * 7 + r * 3) % 5));
      map_pts->push_back(m);
      p.cloud.push_back(pred_from_map.apply(m));
      p.u.push_back(c + 0.5);
      p.v.push_back(r + 0.5);
      p.image_index.push_back(0);
    }
  return p;
}

TEST(RegisterAddition, IdentityFrame) {
  std::vector<Point3> map_pts;
  const auto pred = grid_prediction({}, &map_pts);
  BinaryMask m(30, 20);
  for (int r = 5; r < 10; ++r)
    for (int c = 3; c < 8; ++c) m.set(c, r);
  CorrespondenceSet corr;
  for (std::size_t n = 0; n < map_pts.size(); n += 7) corr.add(pred.cloud.points[n], map_pts[n]);
  std::vector<BinaryMask> masks{m};
  const auto out = register_addition(pred, corr, masks);
  ASSERT_TRUE(out.fitted);
  ASSERT_EQ(out.points.size(), 25u);
  for (std::size_t n = 0; n < out.points.size(); ++n) {
    const auto src = out.points.ids[n];
    EXPECT_LE((out.points.points[n] - map_pts[src]).norm(), 1e-9);
    EXPECT_TRUE(pixel_in_masks(pred.u[src], pred.v[src], 0, masks));
  }
}

TEST(RegisterAddition, KnownSimilarity) {
  std::mt19937_64 rng(7);
  const SimilarityTransform map_from_pred{0.37, testing::random_rotation(rng), Point3(12, -3, 4)};
  std::vector<Point3> map_pts;
  const auto pred = grid_prediction(map_from_pred.inverse(), &map_pts);
  BinaryMask m(30, 20);
  for (int r = 0; r < 20; r += 2)
    for (int c = 0; c < 30; c += 3) m.set(c, r);
  CorrespondenceSet corr;
  for (std::size_t n = 1; n < map_pts.size(); n += 5) corr.add(pred.cloud.points[n], map_pts[n]);
  std::vector<BinaryMask> masks{m};
  const auto out = register_addition(pred, corr, masks);
  ASSERT_EQ(out.points.size(), m.count());
  for (std::size_t n = 0; n < out.points.size(); ++n)
    EXPECT_LE((out.points.points[n] - map_pts[out.points.ids[n]]).norm(), 1e-6);
}

TEST(RegisterAddition, EmptyMasksGiveNothing) {
  std::vector<Point3> map_pts;
  const auto pred = grid_prediction({}, &map_pts);
  std::vector<BinaryMask> masks{BinaryMask(30, 20)};
  CorrespondenceSet degenerate;  // would throw if a fit were attempted
  const auto out = register_addition(pred, degenerate, masks);
  EXPECT_FALSE(out.fitted);
  EXPECT_TRUE(out.points.empty());
}

TEST(RegisterAddition, MissingMaskForImage) {
  std::vector<Point3> map_pts;
  auto pred = grid_prediction({}, &map_pts);
  pred.image_index[3] = 2;
  std::vector<BinaryMask> masks{BinaryMask(30, 20)};
  EXPECT_THROW(register_addition(pred, {}, masks), Error);
}

TEST(Accumulate, DeduplicatesByVoxel) {
  PointCloud a, b;
  a.push_back({0.05, 0.05, 0.05});
  a.push_back({0.15, 0.15, 0.15});
  b.push_back({0.11, 0.02, 0.19});
  b.push_back({0.25, 0.05, 0.05});
  std::vector<PointCloud> batches{a, b};
  const auto keys = accumulate_addition_keys(batches, VoxelGrid{});
  EXPECT_EQ(keys, (KeySet{{0, 0, 0}, {1, 0, 0}}));
  EXPECT_EQ(accumulate_additions(batches, VoxelGrid{}).size(), 2u);
}

TEST(ApplyUpdate, SetAlgebra) {
  VoxelScene s;
  s.voxels[{0, 0, 0}] = {1};
  s.voxels[{1, 0, 0}] = {2};
  const auto u = apply_update(s, KeySet{{0, 0, 0}}, KeySet{{1, 0, 0}, {2, 0, 0}});
  EXPECT_EQ(u.keys(), (KeySet{{1, 0, 0}, {2, 0, 0}}));
  EXPECT_EQ(u.voxels.at({1, 0, 0}), (std::vector<std::uint64_t>{2}));
}

TEST(CorrespondenceText, RoundTrip) {
  std::mt19937_64 rng(8);
  CorrespondenceSet c;
  for (const auto& p : testing::random_points(rng, 20)) c.add(p, 2 * p);
  const auto back = parse_correspondences("# pairs\n" + format_correspondences(c));
  EXPECT_EQ(back.source, c.source);
  EXPECT_EQ(back.target, c.target);
  EXPECT_THROW(parse_correspondences("1 2 3 4 5\n"), Error);
}

TEST(PredictionFile, RoundTrip) {
  testing::TempDir dir("pred");
  std::vector<Point3> map_pts;
  const auto pred = grid_prediction({}, &map_pts);
  write_prediction(dir / "p.ply", pred);
  const auto back = read_prediction(dir / "p.ply");
  EXPECT_EQ(back.cloud.points, pred.cloud.points);
  EXPECT_EQ(back.u, pred.u);
  EXPECT_EQ(back.image_index, pred.image_index);
  io::write_ply(dir / "bare.ply", pred.cloud);
  EXPECT_THROW(read_prediction(dir / "bare.ply"), Error);
}

}  // namespace
}  // namespace pcm
