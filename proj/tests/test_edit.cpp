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

#include "pcm/edit/portable.hpp"
#include "pcm/edit/script.hpp"
#include "pcm/eval/metrics.hpp"
#include "test_util.hpp"

namespace pcm {
namespace {

using testing::random_scene;
using testing::TempDir;

const LabelTaxonomy kTaxonomy = LabelTaxonomy::defaults();

VoxelScene three_voxel_scene() {
  VoxelScene s;
  s.voxels[{0, 0, 0}] = {1};
  s.voxels[{0, 0, 1}] = {2};
  s.voxels[{0, 0, 2}] = {3};
  s.voxels[{10, 10, 0}] = {4};
  return s;
}

PatchDatabase one_point_db() {
  PatchDatabase db;
  PointCloud c;
  c.push_back({0, 0, 0});
  db.add(Patch::make("dot", c, "BOLLARD"));
  PointCloud bar;
  for (int n = 0; n < 5; ++n) bar.push_back({0.1 + 0.2 * n, 0.1, 0.3});
  db.add(Patch::make("bar", bar, "SIGN"));
  return db;
}

GroundModel flat_ground(double z) { return GroundModel::flat(-50, -50, 50, 50, z, 1.0); }

TEST(DeleteByCuboid, EnclosesObject) {
  const auto s = three_voxel_scene();
  Cuboid c{{0.1, 0.1, 0.3}, {0.5, 0.5, 0.7}, Matrix3::Identity(), "SIGN"};
  const auto d = delete_by_cuboid(s, c, kTaxonomy);
  EXPECT_EQ(d.removed_keys, (KeySet{{0, 0, 0}, {0, 0, 1}, {0, 0, 2}}));
  EXPECT_EQ(d.scene_fingerprint, s.fingerprint());
}

TEST(DeleteByCuboid, MissIsEmpty) {
  Cuboid c{{5, 5, 5}, {0.5, 0.5, 0.5}, Matrix3::Identity(), "SIGN"};
  EXPECT_TRUE(delete_by_cuboid(three_voxel_scene(), c, kTaxonomy).empty());
}

TEST(DeleteByCuboid, RefusesDynamic) {
  Cuboid c{{0, 0, 0}, {1, 1, 1}, Matrix3::Identity(), "REGULAR_VEHICLE"};
  try {
    delete_by_cuboid(three_voxel_scene(), c, kTaxonomy);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("refusing dynamic label for static edit"), std::string::npos);
  }
}

TEST(DeleteByCuboid, OverlapComposesToUnion) {
  std::mt19937_64 rng(1);
  const auto s = random_scene(rng, 10, 0.5);
  Cuboid a{{0.6, 0.6, 0.6}, {0.8, 0.8, 0.8}, Matrix3::Identity(), "SIGN"};
  Cuboid b{{0.9, 0.9, 0.9}, {0.8, 0.8, 0.8}, rotation_z(0.4), "SIGN"};
  const auto da = delete_by_cuboid(s, a, kTaxonomy), db = delete_by_cuboid(s, b, kTaxonomy);
  std::vector<EditDelta> both{da, db};
  const auto combined = combine_deltas(both);
  KeySet u = da.removed_keys;
  u.insert(db.removed_keys.begin(), db.removed_keys.end());
  EXPECT_EQ(combined.removed_keys, u);
  EXPECT_EQ(apply_delta(s, combined).size(), s.size() - u.size());
}

TEST(DeleteBySelection, ZeroSphere) {
  const auto s = three_voxel_scene();
  const auto d = delete_by_selection(s, Sphere{s.grid.center_of({0, 0, 1}), 0.0});
  EXPECT_EQ(d.removed_keys, (KeySet{{0, 0, 1}}));
}

TEST(DeleteBySelection, WholeScene) {
  const auto s = three_voxel_scene();
  const auto d = delete_by_selection(s, AxisAlignedBox{Point3(-10, -10, -10), Point3(10, 10, 10)});
  EXPECT_EQ(d.removed_keys, s.keys());
  EXPECT_TRUE(apply_delta(s, d).empty());
}

TEST(DeleteBySelection, RandomBoxesMatchOracle) {
  std::mt19937_64 rng(2);
  const auto s = random_scene(rng, 15, 0.4);
  std::uniform_real_distribution<double> u(-0.5, 3.5);
  for (int t = 0; t < 50; ++t) {
    Point3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    const AxisAlignedBox box{a.cwiseMin(b), a.cwiseMax(b)};
    KeySet expect;
    for (const auto& [k, ids] : s.voxels) {
      const Point3 c = s.grid.center_of(k);
      bool in = true;
      for (int ax = 0; ax < 3; ++ax) in = in && c[ax] >= box.min[ax] && c[ax] <= box.max[ax];
      if (in) expect.insert(k);
    }
    EXPECT_EQ(delete_by_selection(s, box).removed_keys, expect);
  }
  EXPECT_THROW(delete_by_selection(s, AxisAlignedBox{Point3(1, 1, 1), Point3(0, 0, 0)}), Error);
  EXPECT_THROW(delete_by_selection(s, Sphere{Point3::Zero(), -1}), Error);
}

TEST(InsertPatch, SinglePointOnGround) {
  const auto s = three_voxel_scene();
  const auto d = insert_patch(s, one_point_db(), "dot", {3, 4}, 0.0, flat_ground(1.5));
  ASSERT_EQ(d.insertions.size(), 1u);
  EXPECT_EQ(d.insertions[0].inserted_keys, (std::vector<VoxelKey>{s.grid.key_of({3, 4, 1.5})}));
  EXPECT_EQ(d.insertions[0].inserted_keys[0], (VoxelKey{15, 20, 7}));
}

TEST(InsertPatch, Errors) {
  const auto s = three_voxel_scene();
  try {
    insert_patch(s, one_point_db(), "dot", {300, 4}, 0.0, flat_ground(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no ground sample"), std::string::npos);
  }
  EXPECT_THROW(insert_patch(s, one_point_db(), "nope", {3, 4}, 0.0, flat_ground(0)), Error);
}

TEST(InsertPatch, YawZeroIsTranslation) {
  const auto s = three_voxel_scene();
  const auto db = one_point_db();
  const auto d = insert_patch(s, db, "bar", {2.0, 3.0}, 0.0, flat_ground(0.0));
  PointCloud moved;
  for (const auto& p : db.get("bar").cloud().points) moved.push_back(p + Point3(2.0, 3.0, 0.0));
  EXPECT_EQ(KeySet(d.insertions[0].inserted_keys.begin(), d.insertions[0].inserted_keys.end()),
            voxelize(moved, s.grid).keys());
}

TEST(InsertPatch, TwoLocationsOffsetByPlacement) {
  const auto s = three_voxel_scene();
  const auto db = one_point_db();
  const auto a = insert_patch(s, db, "bar", {2.0, 3.0}, 0.0, flat_ground(0.0));
  const auto b = insert_patch(s, db, "bar", {4.0, 3.0}, 0.0, flat_ground(0.0));
  std::vector<EditDelta> both{a, b};
  const auto combined = combine_deltas(both);
  EXPECT_EQ(combined.insertions.size(), 2u);
  ASSERT_EQ(a.insertions[0].inserted_keys.size(), b.insertions[0].inserted_keys.size());
  for (std::size_t n = 0; n < a.insertions[0].inserted_keys.size(); ++n) {
    const auto& ka = a.insertions[0].inserted_keys[n];
    const auto& kb = b.insertions[0].inserted_keys[n];
    EXPECT_EQ(kb.i - ka.i, 10);
    EXPECT_EQ(kb.j, ka.j);
    EXPECT_EQ(kb.k, ka.k);
  }
}

TEST(InsertPatch, RotatedKeysMatchRevoxelization) {
  std::mt19937_64 rng(3);
  PatchDatabase db;
  db.add(Patch::make("blob", testing::random_cloud(rng, 300, -1, 1), "SIGN"));
  const auto s = three_voxel_scene();
  std::uniform_real_distribution<double> u(-5, 5), yaw(-3.2, 3.2);
  for (int t = 0; t < 20; ++t) {
    const double x = u(rng), y = u(rng), th = yaw(rng);
    const auto d = insert_patch(s, db, "blob", {x, y}, th, flat_ground(0.7));
    const RigidTransform place{rotation_z(th), Point3(x, y, 0.7)};
    EXPECT_EQ(KeySet(d.insertions[0].inserted_keys.begin(), d.insertions[0].inserted_keys.end()),
              voxelize(transformed(db.get("blob").cloud(), place), s.grid).keys());
  }
}

TEST(Patch, GroundContact) {
  PointCloud c;
  c.push_back({0, 0, 5});
  c.push_back({1, 0, 7.5});
  const auto p = Patch::make("p", c, "SIGN");
  EXPECT_EQ(p.cloud().points[0].z(), 0.0);
  EXPECT_EQ(p.cloud().points[1].z(), 2.5);
  EXPECT_THROW(Patch::make("e", PointCloud{}, "SIGN"), Error);
  PatchDatabase db;
  db.add(p);
  EXPECT_THROW(db.add(p), Error);
}

TEST(PatchDatabase, SaveLoad) {
  TempDir dir("patches");
  const auto db = one_point_db();
  db.save(dir.path());
  const auto back = PatchDatabase::load(dir.path());
  EXPECT_EQ(back.size(), 2u);
  EXPECT_EQ(back.get("bar").cloud().points, db.get("bar").cloud().points);
  EXPECT_EQ(back.get("bar").label(), "SIGN");
}

TEST(Ground, JsonAndBinary) {
  GroundModel g(0.5);
  g.set(0, 0, 1.25);
  g.set(-3, 7, -0.5);
  EXPECT_EQ(g.height_at(0.2, 0.3), 1.25);
  EXPECT_EQ(g.height_at(-1.4, 3.6), -0.5);
  EXPECT_FALSE(g.height_at(10, 10));
  const auto j = GroundModel::from_json(g.to_json());
  EXPECT_EQ(j.height_at(-1.4, 3.6), -0.5);
  const auto b = GroundModel::decode_binary(g.encode_binary());
  EXPECT_EQ(b.height_at(0.2, 0.3), 1.25);
  EXPECT_THROW(GroundModel(0.0), Error);
}

TEST(ApplyDelta, EmptyIsIdentity) {
  const auto s = three_voxel_scene();
  EditDelta d;
  d.scene_fingerprint = s.fingerprint();
  EXPECT_EQ(apply_delta(s, d), s);
}

TEST(ApplyDelta, FingerprintMismatch) {
  EditDelta d;
  d.scene_fingerprint = 42;
  try {
    apply_delta(three_voxel_scene(), d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "delta does not target this scene");
  }
}

TEST(ApplyDelta, DiffRecoversDelta) {
  std::mt19937_64 rng(4);
  const auto db = one_point_db();
  for (int t = 0; t < 20; ++t) {
    const auto s = random_scene(rng, 12, 0.3);
    std::vector<EditDelta> parts;
    parts.push_back(delete_by_selection(s, Sphere{Point3(1.2, 1.2, 1.2), 0.5 + 0.05 * t}));
    parts.push_back(insert_patch(s, db, "bar", {-3.0 + 0.1 * t, 1.0}, 0.0, flat_ground(0.0)));
    const auto d = combine_deltas(parts);
    const auto edited = apply_delta(s, d);
    // base -> edited: keys that left are removed, keys that appeared are inserted
    EXPECT_EQ(key_difference(s, edited), d.removed_keys);
    KeySet new_keys;
    for (const auto& k : d.inserted_keys())
      if (!s.contains(k)) new_keys.insert(k);
    EXPECT_EQ(key_difference(edited, s), new_keys);
    for (const auto& k : d.inserted_keys())
      for (auto id : edited.voxels.at(k))
        if (!s.contains(k)) EXPECT_TRUE(is_insertion_tag(id));
  }
}

TEST(ApplyDelta, RejectsRemovingAbsentKey) {
  const auto s = three_voxel_scene();
  EditDelta d;
  d.scene_fingerprint = s.fingerprint();
  d.removed_keys.insert({5, 5, 5});
  EXPECT_THROW(apply_delta(s, d), Error);
}

TEST(MergeDeltas, SequentialEqualsMerged) {
  std::mt19937_64 rng(5);
  const auto db = one_point_db();
  for (int t = 0; t < 20; ++t) {
    const auto s = random_scene(rng, 12, 0.35);
    std::vector<EditDelta> p1{delete_by_selection(s, Sphere{Point3(1, 1, 1), 0.6}),
                              insert_patch(s, db, "bar", {1.0, 1.0}, 0.0, flat_ground(0.0))};
    const auto d1 = combine_deltas(p1);
    const auto s1 = apply_delta(s, d1);
    // second edit avoids the inserted voxels
    auto d2 = delete_by_selection(s1, AxisAlignedBox{Point3(1.4, 1.4, 0.5), Point3(2.4, 2.4, 2.4)});
    const auto s2 = apply_delta(s1, d2);
    const auto merged = merge_deltas(d1, d2);
    EXPECT_EQ(apply_delta(s, merged).keys(), s2.keys());
  }
}

TEST(MergeDeltas, RejectsRemovingInsertedVoxels) {
  const auto s = three_voxel_scene();
  const auto d1 = insert_patch(s, one_point_db(), "dot", {3, 4}, 0.0, flat_ground(1.5));
  const auto s1 = apply_delta(s, d1);
  const auto d2 = delete_by_selection(s1, Sphere{Point3(3, 4, 1.5), 0.3});
  ASSERT_FALSE(d2.removed_keys.empty());
  EXPECT_THROW(merge_deltas(d1, d2), Error);
}

TEST(DeltaJson, RoundTrip) {
  std::mt19937_64 rng(6);
  const auto s = random_scene(rng, 8, 0.5);
  std::vector<EditDelta> p{delete_by_selection(s, Sphere{Point3(0.8, 0.8, 0.8), 0.5}),
                           insert_patch(s, one_point_db(), "bar", {1.0, 2.0}, 0.7, flat_ground(0.1))};
  const auto d = combine_deltas(p);
  EXPECT_EQ(delta_from_json(to_json(d)), d);
}

TEST(RegionJson, RoundTrip) {
  for (const SelectionRegion& r :
       {SelectionRegion{AxisAlignedBox{Point3(0, 0, 0), Point3(1, 2, 3)}},
        SelectionRegion{Sphere{Point3(1, 1, 1), 2.5}},
        SelectionRegion{Cuboid{Point3(1, 2, 3), Point3(1, 1, 1), rotation_z(0.2), "SIGN"}}}) {
    const auto back = region_from_json(to_json(r));
    EXPECT_EQ(back.index(), r.index());
    EXPECT_EQ(to_json(back), to_json(r));
  }
  EXPECT_THROW(region_from_json({{"type", "torus"}}), Error);
}

TEST(Script, JsonRoundTripAndRun) {
  const auto s = three_voxel_scene();
  EditScript script;
  script.ops.push_back(DeleteCuboidOp{Cuboid{{0.1, 0.1, 0.3}, {0.5, 0.5, 0.7}, Matrix3::Identity(), "SIGN"}});
  script.ops.push_back(DeleteSelectionOp{Sphere{s.grid.center_of({10, 10, 0}), 0.01}});
  script.ops.push_back(InsertPatchOp{"dot", 3, 4, 0.5});
  const auto back = edit_script_from_json(to_json(script));
  EXPECT_EQ(to_json(back), to_json(script));
  const auto deltas = run_edit_script(s, back, one_point_db(), flat_ground(1.5), kTaxonomy);
  ASSERT_EQ(deltas.size(), 3u);
  EXPECT_EQ(deltas[0].removed_keys.size(), 3u);
  EXPECT_EQ(deltas[1].removed_keys, (KeySet{{10, 10, 0}}));
  EXPECT_EQ(deltas[2].insertions.size(), 1u);
  EXPECT_THROW(edit_script_from_json({{"ops", {{{"op", "paint"}}}}}), Error);
}

// ---- portable archives ----

EditDelta sample_delta(const VoxelScene& s, std::mt19937_64& rng) {
  std::vector<EditDelta> p;
  std::uniform_real_distribution<double> u(0.5, 2.0);
  p.push_back(delete_by_selection(s, Sphere{Point3(u(rng), u(rng), u(rng)), 0.4}));
  p.push_back(insert_patch(s, one_point_db(), "bar", {u(rng), u(rng)}, u(rng), flat_ground(0.2)));
  return combine_deltas(p);
}

TEST(Portable, ExactReconstruction) {
  TempDir dir("portable");
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    const auto s = random_scene(rng, 12, 0.3, 1000);
    std::vector<EditDelta> deltas{sample_delta(s, rng), sample_delta(s, rng)};
    const auto path = dir / ("a" + std::to_string(t) + ".pcme");
    export_portable("base.pcms", s.fingerprint(), deltas, path);
    const auto scenes = import_portable(path, s);
    ASSERT_EQ(scenes.size(), 2u);
    for (int n = 0; n < 2; ++n) EXPECT_EQ(scenes[n], apply_delta(s, deltas[n]));  // keys and provenance
    const auto archive = read_portable(path);
    EXPECT_EQ(archive.deltas, deltas);
    EXPECT_EQ(archive.base_ref, "base.pcms");
    // export -> import -> export is byte-identical
    const auto path2 = dir / ("b" + std::to_string(t) + ".pcme");
    export_portable(archive.base_ref, archive.base_fingerprint, archive.deltas, path2);
    EXPECT_EQ(io::read_file(path), io::read_file(path2));
  }
}

TEST(Portable, ZeroDeltas) {
  TempDir dir("portable0");
  const auto s = three_voxel_scene();
  export_portable("base", s.fingerprint(), {}, dir / "z.pcme");
  EXPECT_TRUE(import_portable(dir / "z.pcme", s).empty());
}

TEST(Portable, WrongBase) {
  TempDir dir("portablew");
  const auto s = three_voxel_scene();
  export_portable("base", s.fingerprint(), {}, dir / "z.pcme");
  auto other = s;
  other.voxels[{3, 3, 3}] = {9};
  EXPECT_THROW(import_portable(dir / "z.pcme", other), Error);
}

TEST(Portable, CorruptionDetected) {
  std::mt19937_64 rng(8);
  const auto s = random_scene(rng, 10, 0.3);
  const PortableArchive a{s.fingerprint(), "b", {sample_delta(s, rng)}};
  const auto bytes = encode_portable(a);
  for (std::size_t at : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[at] ^= 0x10;
    try {
      decode_portable(bad);
      FAIL() << at;
    } catch (const Error& e) {
      EXPECT_STREQ(e.what(), "portable archive corrupt");
    }
  }
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(decode_portable(cut), Error);
}

TEST(Portable, SmallDeltaCompresses) {
  // 100k voxels, remove 1% (5 x 10 x 20 centers)
  std::mt19937_64 rng(9);
  VoxelScene s;
  std::uint64_t id = 0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j)
      for (int k = 0; k < 40; ++k) s.voxels[{i, j, k}] = {id++};
  ASSERT_EQ(s.size(), 100000u);
  const auto d = delete_by_selection(s, AxisAlignedBox{Point3(0, 0, 0), Point3(1.0, 1.99, 4.0)});
  ASSERT_EQ(d.removed_keys.size(), 1000u);
  const auto archive = encode_portable({s.fingerprint(), "base", {d}});
  const auto full = encode_scene(s);
  EXPECT_LE(archive.size() * 10, full.size());
}

}  // namespace
}  // namespace pcm
