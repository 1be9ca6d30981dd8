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

#include <cstring>
#include <limits>
#include <random>

#include "pcm/io/binary.hpp"
#include "pcm/io/ply.hpp"
#include "pcm/io/png.hpp"
#include "test_util.hpp"

namespace pcm {
namespace {

TEST(Varint, RoundTripEdgeValues) {
  const std::uint64_t us[] = {0, 1, 127, 128, 300, 16383, 16384, 0xffffffffULL,
                              std::numeric_limits<std::uint64_t>::max()};
  const std::int64_t ss[] = {0, 1, -1, 63, -64, 64, -65, std::numeric_limits<std::int64_t>::min(),
                             std::numeric_limits<std::int64_t>::max()};
  io::ByteWriter w;
  for (auto v : us) w.put_varint(v);
  for (auto v : ss) w.put_svarint(v);
  const auto bytes = w.take();
  io::ByteReader r(bytes, "ctx");
  for (auto v : us) EXPECT_EQ(r.get_varint(), v);
  for (auto v : ss) EXPECT_EQ(r.get_svarint(), v);
  EXPECT_TRUE(r.at_end());
}

TEST(Varint, KnownEncodings) {
  io::ByteWriter w;
  w.put_varint(300);
  EXPECT_EQ(w.bytes(), (io::Bytes{0xac, 0x02}));
  EXPECT_EQ(io::ByteWriter::zigzag_encode(-1), 1u);
  EXPECT_EQ(io::ByteWriter::zigzag_encode(1), 2u);
  EXPECT_EQ(io::ByteWriter::zigzag_encode(-2), 3u);
}

TEST(ByteReader, OverrunThrowsWithContext) {
  io::Bytes b{1, 2, 3};
  io::ByteReader r(b, "short buffer");
  try {
    r.get<std::uint32_t>();
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "short buffer");
  }
  io::Bytes unterminated(11, 0xff);
  io::ByteReader r2(unterminated, "bad varint");
  EXPECT_THROW(r2.get_varint(), Error);
}

TEST(Ply, RoundTripWithIdsAndExtras) {
  std::mt19937_64 rng(1);
  PointCloud c = testing::random_cloud(rng, 257);
  for (std::size_t n = 0; n < c.size(); ++n) c.ids.push_back(n * 977 + (1ULL << 40));
  std::vector<double> u(c.size()), v(c.size());
  for (std::size_t n = 0; n < c.size(); ++n) {
    u[n] = n + 0.5;
    v[n] = -0.25 * n;
  }
  const auto bytes = io::encode_ply(c, {{"u", u}, {"v", v}});
  const auto d = io::decode_ply(bytes);
  EXPECT_EQ(d.cloud.points, c.points);
  EXPECT_EQ(d.cloud.ids, c.ids);
  EXPECT_EQ(d.extra.at("u"), u);
  EXPECT_EQ(d.extra.at("v"), v);
  // re-encoding is byte-identical
  EXPECT_EQ(io::encode_ply(d.cloud, d.extra), bytes);
}

TEST(Ply, EmptyCloud) {
  const auto d = io::decode_ply(io::encode_ply(PointCloud{}));
  EXPECT_TRUE(d.cloud.empty());
  EXPECT_FALSE(d.cloud.has_ids());
}

TEST(Ply, ReadsFloatPropertiesAndSkipsOtherElements) {
  std::string header =
      "ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\nproperty uchar red\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n";
  io::ByteWriter w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(header.data()), header.size()));
  for (float f : {1.5f, 2.0f, -3.0f}) w.put(f);
  w.put(std::uint8_t{7});
  for (float f : {0.0f, 0.25f, 8.0f}) w.put(f);
  w.put(std::uint8_t{9});
  w.put(std::uint8_t{3});
  for (int i : {0, 1, 0}) w.put(std::int32_t(i));
  const auto d = io::decode_ply(w.bytes());
  ASSERT_EQ(d.cloud.size(), 2u);
  EXPECT_EQ(d.cloud.points[0], Point3(1.5, 2.0, -3.0));
  EXPECT_EQ(d.cloud.points[1], Point3(0.0, 0.25, 8.0));
  EXPECT_EQ(d.extra.at("red"), (std::vector<double>{7, 9}));
}

TEST(Ply, RejectsAsciiAndTruncation) {
  const std::string ascii = "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
  EXPECT_THROW(io::decode_ply(std::span(reinterpret_cast<const std::uint8_t*>(ascii.data()), ascii.size())), Error);
  PointCloud c;
  c.push_back({1, 2, 3});
  auto bytes = io::encode_ply(c);
  bytes.pop_back();
  EXPECT_THROW(io::decode_ply(bytes), Error);
  io::Bytes junk{'x', 'y'};
  EXPECT_THROW(io::decode_ply(junk), Error);
}

TEST(Ply, ExtraLengthMismatchThrows) {
  PointCloud c;
  c.push_back({1, 2, 3});
  EXPECT_THROW(io::encode_ply(c, {{"u", {1.0, 2.0}}}), Error);
}

TEST(Png, MaskRoundTrip) {
  testing::TempDir dir("png");
  BinaryMask m(37, 23);
  for (int r = 0; r < 23; ++r)
    for (int c = 0; c < 37; ++c)
      if ((r * 37 + c) % 5 == 0) m.set(c, r);
  io::write_mask_png(dir / "m.png", m);
  EXPECT_EQ(io::read_mask_png(dir / "m.png"), m);
  // deterministic bytes
  io::write_mask_png(dir / "m2.png", m);
  EXPECT_EQ(io::read_file(dir / "m.png"), io::read_file(dir / "m2.png"));
}

TEST(Png, MissingFileThrows) { EXPECT_THROW(io::read_mask_png("/nonexistent/m.png"), Error); }

TEST(Files, MissingFileThrows) { EXPECT_THROW(io::read_file("/nonexistent/x.bin"), Error); }

TEST(Hash, FnvKnownValues) {
  // Reference values of 64-bit FNV-1a.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hash, HexRoundTrip) {
  for (std::uint64_t v : {0ULL, 1ULL, 0xdeadbeefULL, ~0ULL}) {
    EXPECT_EQ(to_hex(v).size(), 16u);
    EXPECT_EQ(from_hex(to_hex(v)), v);
  }
  EXPECT_THROW(from_hex("xyz"), Error);
}

}  // namespace
}  // namespace pcm
