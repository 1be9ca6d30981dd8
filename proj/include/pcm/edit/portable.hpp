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

// Portable edit archive. All integers little-endian.
//
//   "PCME"                    4 bytes magic
//   version                   u16 (= 1)
//   base fingerprint          u64
//   base reference            varint length + UTF-8 bytes
//   delta count               varint
//   per delta:
//     removed key count       varint
//     removed keys            sorted; per key zig-zag varints of (di, dj, dk)
//                             relative to the previous key (first vs 0,0,0)
//     insertion count         varint
//     per insertion:
//       patch id              varint length + bytes
//       placement             12 x f64 (rotation row-major, translation)
//       inserted key count    varint
//       inserted keys         encoded like removed keys
//   CRC-32 (zlib)             u32 over every preceding byte
//
// Every delta in an archive targets the base scene.

#include <zlib.h>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pcm/edit/editor.hpp"
#include "pcm/io/binary.hpp"

namespace pcm {

inline constexpr std::uint16_t kPortableVersion = 1;

struct PortableArchive {
  std::uint64_t base_fingerprint = 0;
  std::string base_ref;
  std::vector<EditDelta> deltas;
};

namespace portable_detail {

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename Range>
void put_keys(io::ByteWriter& w, const Range& keys) {
  w.put_varint(std::size(keys));
  VoxelKey prev{0, 0, 0};
  for (const auto& k : keys) {
    w.put_svarint(static_cast<std::int64_t>(k.i) - prev.i);
    w.put_svarint(static_cast<std::int64_t>(k.j) - prev.j);
    w.put_svarint(static_cast<std::int64_t>(k.k) - prev.k);
    prev = k;
  }
}

inline std::vector<VoxelKey> get_keys(io::ByteReader& r) {
  const auto n = r.get_varint();
  if (n > r.remaining() / 3) throw Error("portable archive corrupt");
  std::vector<VoxelKey> keys;
  keys.reserve(static_cast<std::size_t>(n));
  std::int64_t i = 0, j = 0, k = 0;
  for (std::uint64_t c = 0; c < n; ++c) {
    i += r.get_svarint();
    j += r.get_svarint();
    k += r.get_svarint();
    auto fits = [](std::int64_t v) {
      return v >= std::numeric_limits<std::int32_t>::min() && v <= std::numeric_limits<std::int32_t>::max();
    };
    if (!fits(i) || !fits(j) || !fits(k)) throw Error("portable archive corrupt");
    VoxelKey key{static_cast<std::int32_t>(i), static_cast<std::int32_t>(j), static_cast<std::int32_t>(k)};
    if (!keys.empty() && !(keys.back() < key)) throw Error("portable archive corrupt");
    keys.push_back(key);
  }
  return keys;
}

}  // namespace portable_detail

inline io::Bytes encode_portable(const PortableArchive& archive) {
  io::ByteWriter w;
  for (char c : std::string_view("PCME")) w.put(static_cast<std::uint8_t>(c));
  w.put(kPortableVersion);
  w.put(archive.base_fingerprint);
  w.put_string(archive.base_ref);
  w.put_varint(archive.deltas.size());
  for (const auto& d : archive.deltas) {
    if (d.scene_fingerprint != archive.base_fingerprint) throw Error("delta does not target this scene");
    portable_detail::put_keys(w, d.removed_keys);
    w.put_varint(d.insertions.size());
    for (const auto& ins : d.insertions) {
      w.put_string(ins.patch_id);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) w.put(ins.placement.rotation(r, c));
      for (int a = 0; a < 3; ++a) w.put(ins.placement.translation[a]);
      portable_detail::put_keys(w, ins.inserted_keys);
    }
  }
  w.put(portable_detail::crc32_of(w.bytes()));
  return w.take();
}

inline PortableArchive decode_portable(std::span<const std::uint8_t> bytes) {
  constexpr const char* kCorrupt = "portable archive corrupt";
  if (bytes.size() < 4 + 2 + 8 + 4) throw Error(kCorrupt);
  const auto body = bytes.first(bytes.size() - 4);
  io::ByteReader trailer(bytes.last(4), kCorrupt);
  if (trailer.get<std::uint32_t>() != portable_detail::crc32_of(body)) throw Error(kCorrupt);

  io::ByteReader r(body, kCorrupt);
  const auto magic = r.get_bytes(4);
  if (std::string(magic.begin(), magic.end()) != "PCME") throw Error(kCorrupt);
  if (r.get<std::uint16_t>() != kPortableVersion) throw Error(kCorrupt);

  PortableArchive a;
  a.base_fingerprint = r.get<std::uint64_t>();
  a.base_ref = r.get_string();
  const auto num_deltas = r.get_varint();
  if (num_deltas > r.remaining()) throw Error(kCorrupt);
  for (std::uint64_t n = 0; n < num_deltas; ++n) {
    EditDelta d;
    d.scene_fingerprint = a.base_fingerprint;
    for (const auto& k : portable_detail::get_keys(r)) d.removed_keys.insert(d.removed_keys.end(), k);
    const auto num_ins = r.get_varint();
    if (num_ins > r.remaining()) throw Error(kCorrupt);
    for (std::uint64_t m = 0; m < num_ins; ++m) {
      Insertion ins;
      ins.patch_id = r.get_string();
      for (int rr = 0; rr < 3; ++rr)
        for (int c = 0; c < 3; ++c) ins.placement.rotation(rr, c) = r.get<double>();
      for (int ax = 0; ax < 3; ++ax) ins.placement.translation[ax] = r.get<double>();
      ins.inserted_keys = portable_detail::get_keys(r);
      d.insertions.push_back(std::move(ins));
    }
    a.deltas.push_back(std::move(d));
  }
  if (!r.at_end()) throw Error(kCorrupt);
  return a;
}

/// Writes the archive for `deltas` against the base identified by
/// `base_fingerprint` / `base_ref`.
inline void export_portable(const std::string& base_ref, std::uint64_t base_fingerprint,
                            std::span<const EditDelta> deltas, const std::filesystem::path& path) {
  PortableArchive a{base_fingerprint, base_ref, {deltas.begin(), deltas.end()}};
  io::write_file(path, encode_portable(a));
}

inline PortableArchive read_portable(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_portable(bytes);
}

/// Reconstructs every edited scene of the archive from its base.
inline std::vector<VoxelScene> import_portable(const std::filesystem::path& path, const VoxelScene& base) {
  const PortableArchive a = read_portable(path);
  if (a.base_fingerprint != base.fingerprint()) throw Error("delta does not target this scene");
  std::vector<VoxelScene> out;
  out.reserve(a.deltas.size());
  for (const auto& d : a.deltas) out.push_back(apply_delta(base, d));
  return out;
}

}  // namespace pcm
