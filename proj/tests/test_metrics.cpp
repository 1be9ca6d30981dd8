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

#include <random>

#include "pcm/eval/metrics.hpp"
#include "test_util.hpp"

namespace pcm {
namespace {

using Pts = std::vector<Point3>;

TEST(Metrics, HandFixtures) {
  const Pts origin{{0, 0, 0}};
  EXPECT_EQ(chamfer(origin, Pts{{1, 0, 0}}), 2.0);
  const Pts two{{0, 0, 0}, {2, 0, 0}};
  EXPECT_EQ(hausdorff(two, origin), 2.0);
  EXPECT_EQ(modified_hausdorff(two, origin), 1.0);
  const Pts three{{0, 0, 0}, {1, 0, 0}, {10, 0, 0}};
  EXPECT_EQ(median_point(three, origin), 1.0);
  EXPECT_EQ(median_of({0, 0, 2, 2}), 1.0);
  EXPECT_EQ(median_of({2, 0, 2, 0}), 1.0);
}

TEST(Metrics, IdenticalIsZero) {
  std::mt19937_64 rng(1);
  const auto p = testing::random_points(rng, 300);
  EXPECT_EQ(chamfer(p, p), 0.0);
  EXPECT_EQ(hausdorff(p, p), 0.0);
  EXPECT_EQ(modified_hausdorff(p, p), 0.0);
  EXPECT_EQ(median_point(p, p), 0.0);
}

TEST(Metrics, EmptyInputThrows) {
  const Pts empty, one{{0, 0, 0}};
  for (auto f : {+[](const Pts& a, const Pts& b) { return chamfer(a, b); },
                 +[](const Pts& a, const Pts& b) { return hausdorff(a, b); },
                 +[](const Pts& a, const Pts& b) { return modified_hausdorff(a, b); },
                 +[](const Pts& a, const Pts& b) { return median_point(a, b); }}) {
    try {
      f(empty, one);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_STREQ(e.what(), "undefined on empty set");
    }
    EXPECT_THROW(f(one, empty), Error);
  }
}

TEST(Metrics, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> size(1, 600);
  for (int t = 0; t < 30; ++t) {
    const auto p = testing::random_points(rng, size(rng)), q = testing::random_points(rng, size(rng), -5, 12);
    for (bool oracle : {false, true}) {
      MetricOptions opt;
      opt.oracle = oracle;
      EXPECT_LE(testing::rel_err(chamfer(p, q, opt), testing::brute_chamfer(p, q)), 1e-12);
      EXPECT_LE(testing::rel_err(hausdorff(p, q, opt), testing::brute_hausdorff(p, q)), 1e-12);
      EXPECT_LE(testing::rel_err(modified_hausdorff(p, q, opt), testing::brute_mhd(p, q)), 1e-12);
      EXPECT_LE(testing::rel_err(median_point(p, q, opt), testing::brute_median_point(p, q)), 1e-12);
    }
  }
}

TEST(Metrics, SymmetryAndOrdering) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 40; ++t) {
    const auto p = testing::random_points(rng, 50 + t), q = testing::random_points(rng, 80, 0, 3);
    EXPECT_DOUBLE_EQ(chamfer(p, q), chamfer(q, p));
    EXPECT_EQ(hausdorff(p, q), hausdorff(q, p));
    EXPECT_DOUBLE_EQ(modified_hausdorff(p, q), modified_hausdorff(q, p));
    EXPECT_EQ(median_point(p, q), median_point(q, p));
    const double h = hausdorff(p, q);
    EXPECT_LE(modified_hausdorff(p, q), h);
    EXPECT_LE(median_point(p, q), h);
    EXPECT_GE(median_point(p, q), 0.0);
  }
}

TEST(Metrics, SubsetHausdorff) {
  std::mt19937_64 rng(4);
  const auto q = testing::random_points(rng, 200);
  const Pts p(q.begin(), q.begin() + 50);
  const auto back = testing::brute_directed(q, p);
  EXPECT_EQ(hausdorff(p, q), *std::max_element(back.begin(), back.end()));
  const auto terms = directed_terms(p, q);
  EXPECT_EQ(terms.max, 0.0);
}

TEST(Metrics, OutlierRobustness) {
  Pts p(99, Point3(0, 0, 0)), q{{0, 0, 0}};
  p.push_back({50, 0, 0});
  EXPECT_EQ(hausdorff(p, q), 50.0);
  EXPECT_NEAR(modified_hausdorff(p, q), 50.0 / 100.0, 1e-15);
  EXPECT_EQ(median_point(p, q), 0.0);
}

TEST(Metrics, RigidInvarianceAndScaleCovariance) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto p = testing::random_points(rng, 120), q = testing::random_points(rng, 90);
    const RigidTransform g{testing::random_rotation(rng), Point3(100, -40, 7)};
    Pts gp, gq, sp, sq;
    const double s = 0.3 + t;
    for (const auto& x : p) gp.push_back(g.apply(x)), sp.push_back(s * x);
    for (const auto& x : q) gq.push_back(g.apply(x)), sq.push_back(s * x);
    EXPECT_NEAR(chamfer(gp, gq), chamfer(p, q), 1e-9);
    EXPECT_NEAR(hausdorff(gp, gq), hausdorff(p, q), 1e-9);
    EXPECT_NEAR(modified_hausdorff(gp, gq), modified_hausdorff(p, q), 1e-9);
    EXPECT_NEAR(median_point(gp, gq), median_point(p, q), 1e-9);
    EXPECT_LE(testing::rel_err(chamfer(sp, sq), s * s * chamfer(p, q)), 1e-12);
    EXPECT_LE(testing::rel_err(hausdorff(sp, sq), s * hausdorff(p, q)), 1e-12);
    EXPECT_LE(testing::rel_err(modified_hausdorff(sp, sq), s * modified_hausdorff(p, q)), 1e-12);
    EXPECT_LE(testing::rel_err(median_point(sp, sq), s * median_point(p, q)), 1e-12);
  }
}

TEST(Metrics, ThreadCountDoesNotChangeResults) {
  std::mt19937_64 rng(6);
  const auto p = testing::random_points(rng, 5000), q = testing::random_points(rng, 3000);
  MetricOptions one, four;
  four.threads = 4;
  EXPECT_EQ(chamfer(p, q, one), chamfer(p, q, four));
  EXPECT_EQ(hausdorff(p, q, one), hausdorff(p, q, four));
  EXPECT_EQ(modified_hausdorff(p, q, one), modified_hausdorff(p, q, four));
  EXPECT_EQ(median_point(p, q, one), median_point(p, q, four));
}

VoxelScene scene_of(const KeySet& keys, VoxelGrid grid = {}) {
  VoxelScene s;
  s.grid = grid;
  std::uint64_t id = 0;
  for (const auto& k : keys) s.voxels[k] = {id++};
  return s;
}

TEST(DiffSets, Example) {
  const VoxelKey a{0, 0, 0}, b{1, 0, 0}, c{2, 0, 0}, d{3, 0, 0};
  const auto out = scene_of({a, b, c}), upd = scene_of({b, c, d});
  const auto r = diff_sets(out, upd, upd);
  EXPECT_EQ(r.del, KeySet{a});
  EXPECT_EQ(r.add, KeySet{d});
  EXPECT_EQ(r.add_star, KeySet{d});
  const auto same = diff_sets(out, out, out);
  EXPECT_TRUE(same.add.empty() && same.del.empty() && same.add_star.empty() && same.del_star.empty());
}

TEST(DiffSets, MatchesPerKeyOracle) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto o = testing::random_scene(rng, 8, 0.4), u = testing::random_scene(rng, 8, 0.4),
               s = testing::random_scene(rng, 8, 0.4);
    const auto r = diff_sets(o, u, s);
    KeySet add, del, add_s, del_s;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        for (int k = 0; k < 8; ++k) {
          const VoxelKey key{i, j, k};
          const bool io = o.voxels.contains(key), iu = u.voxels.contains(key), is = s.voxels.contains(key);
          if (iu && !io) add.insert(key);
          if (io && !iu) del.insert(key);
          if (is && !io) add_s.insert(key);
          if (io && !is) del_s.insert(key);
        }
    EXPECT_EQ(r.add, add);
    EXPECT_EQ(r.del, del);
    EXPECT_EQ(r.add_star, add_s);
    EXPECT_EQ(r.del_star, del_s);
    for (const auto& k : r.add) EXPECT_FALSE(o.voxels.contains(k));
    for (const auto& k : r.del) EXPECT_TRUE(o.voxels.contains(k));
  }
}

TEST(DiffSets, GridMismatch) {
  VoxelGrid other;
  other.resolution = 0.1;
  try {
    diff_sets(scene_of({}), scene_of({}, other), scene_of({}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "incompatible voxel grids");
  }
}

TEST(EvaluateUpdate, PerfectUpdateIsZero) {
  std::mt19937_64 rng(8);
  const auto o = testing::random_scene(rng, 10, 0.3), t = testing::random_scene(rng, 10, 0.3);
  const auto r = evaluate_update(o, t, t);
  ASSERT_TRUE(r.addition.defined());
  ASSERT_TRUE(r.deletion.defined());
  EXPECT_EQ(*r.addition.chamfer_m2, 0.0);
  EXPECT_EQ(*r.addition.hausdorff_m, 0.0);
  EXPECT_EQ(*r.deletion.modified_hausdorff_m, 0.0);
  EXPECT_EQ(*r.deletion.median_point_m, 0.0);
  EXPECT_TRUE(r.addition_keys.exact());
  EXPECT_TRUE(r.deletion_keys.exact());
  EXPECT_EQ(*r.map->hausdorff_m, 0.0);
}

TEST(EvaluateUpdate, MissingVoxelGivesDistance) {
  const KeySet base{{0, 0, 0}, {1, 0, 0}};
  KeySet truth = base;
  for (int i = 0; i < 4; ++i) truth.insert({i, 5, 0});
  truth.insert({3, 9, 0});  // missed; nearest predicted neighbour is (3,5,0)
  KeySet upd = truth;
  upd.erase({3, 9, 0});
  const auto r = evaluate_update(scene_of(base), scene_of(upd), scene_of(truth));
  const double res = VoxelGrid{}.resolution;
  EXPECT_NEAR(*r.addition.hausdorff_m, 4 * res, 1e-12);
  EXPECT_EQ(r.addition_keys.false_negative, 1u);
  EXPECT_EQ(r.addition_keys.true_positive, 4u);
  EXPECT_FALSE(r.deletion.defined());
}

TEST(EvaluateUpdate, EmptySidesReportedUndefined) {
  const auto s = scene_of({{0, 0, 0}});
  const auto r = evaluate_update(s, s, s);
  EXPECT_FALSE(r.addition.defined());
  const auto j = r.to_json();
  EXPECT_TRUE(j["addition"]["chamfer_m2"].is_null());
  EXPECT_EQ(j["addition"]["undefined"].size(), 4u);
  EXPECT_EQ(j["addition"]["counts"]["truth"], 0);
}

}  // namespace
}  // namespace pcm
