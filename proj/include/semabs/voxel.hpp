// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "semabs/binary_io.hpp"
#include "semabs/geometry.hpp"
#include "semabs/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace semabs {

/// Dense C-channel grid. Storage is channel-major, then x, y, z (z fastest),
/// matching the FVOL on-disk layout.
template <class T>
struct BasicFeatureVolume {
  GridSpec spec;
  int channels = 1;
  std::vector<T> data;

  BasicFeatureVolume() = default;
  BasicFeatureVolume(const GridSpec& s, int c, T fill = T(0))
      : spec(s), channels(c), data(static_cast<std::size_t>(c) * s.voxel_count(), fill) {
    s.validate();
    SEMABS_EXPECT(c >= 1, "FeatureVolume: channels must be >= 1");
  }

  std::size_t voxels() const { return spec.voxel_count(); }
  T& at(int c, std::size_t v) { return data[c * voxels() + v]; }
  T at(int c, std::size_t v) const { return data[c * voxels() + v]; }
  T& at(int c, int x, int y, int z) { return at(c, spec.flat(x, y, z)); }
  T at(int c, int x, int y, int z) const { return at(c, spec.flat(x, y, z)); }

  std::span<T> channel(int c) { return std::span<T>(data).subspan(c * voxels(), voxels()); }
  std::span<const T> channel(int c) const {
    return std::span<const T>(data).subspan(c * voxels(), voxels());
  }
};

using FeatureVolume = BasicFeatureVolume<float>;

struct OccupancyGrid {
  GridSpec spec;
  std::vector<std::uint8_t> data;  // 0 / 1 per voxel, flat order

  OccupancyGrid() = default;
  explicit OccupancyGrid(const GridSpec& s) : spec(s), data(s.voxel_count(), 0) {}

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : data) n += b != 0;
    return n;
  }
  friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
    return a.spec == b.spec && a.data == b.data;
  }
};

struct SemanticGrid {
  static constexpr std::int32_t kEmpty = -1;
  GridSpec spec;
  std::vector<std::int32_t> data;

  SemanticGrid() = default;
  explicit SemanticGrid(const GridSpec& s) : spec(s), data(s.voxel_count(), kEmpty) {}

  OccupancyGrid mask(std::int32_t label) const {
    OccupancyGrid g(spec);
    for (std::size_t i = 0; i < data.size(); ++i) g.data[i] = data[i] == label;
    return g;
  }
  friend bool operator==(const SemanticGrid& a, const SemanticGrid& b) {
    return a.spec == b.spec && a.data == b.data;
  }
};

/// Per-channel max of point features into their voxels; untouched voxels are 0.
template <class T = float>
BasicFeatureVolume<T> scatter_max(const PointCloud& pc, const GridSpec& spec) {
  spec.validate();
  BasicFeatureVolume<T> vol(spec, pc.channels);
  std::vector<std::uint8_t> touched(spec.voxel_count(), 0);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3& p = pc.positions[i];
    if (!spec.contains(p)) throw ContractViolation("scatter_max: point outside grid bounds");
    const auto [x, y, z] = spec.voxel_of(p);
    const std::size_t v = spec.flat(x, y, z);
    for (int c = 0; c < pc.channels; ++c) {
      const T f = static_cast<T>(pc.feature(i, c));
      T& slot = vol.at(c, v);
      slot = touched[v] ? std::max(slot, f) : f;
    }
    touched[v] = 1;
  }
  return vol;
}

namespace detail {

/// Eight lattice neighbours of a query and their trilinear weights. Corners
/// outside the lattice get index -1 (zero padding).
struct TrilinearStencil {
  std::array<std::ptrdiff_t, 8> index;
  std::array<double, 8> weight;
};

inline TrilinearStencil trilinear_stencil(const GridSpec& spec, const Vec3& q) {
  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double g = (q[a] - spec.lower[a]) / spec.edge(a) - 0.5;
    const double f = std::floor(g);
    base[a] = static_cast<int>(std::clamp(f, -2.0, double(spec.resolution[a]) + 1.0));
    frac[a] = g - f;
  }
  TrilinearStencil s{};
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = (corner >> 2) & 1, dy = (corner >> 1) & 1, dz = corner & 1;
    const int x = base[0] + dx, y = base[1] + dy, z = base[2] + dz;
    s.weight[corner] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                       (dz ? frac[2] : 1.0 - frac[2]);
    const bool inside = x >= 0 && y >= 0 && z >= 0 && x < spec.resolution[0] &&
                        y < spec.resolution[1] && z < spec.resolution[2];
    s.index[corner] = inside ? static_cast<std::ptrdiff_t>(spec.flat(x, y, z)) : -1;
  }
  return s;
}

}  // namespace detail

/// Trilinear interpolation over voxel centers. Returns N x C values,
/// point-major. Missing neighbours outside the lattice count as zero.
template <class T>
std::vector<T> trilinear_sample(const BasicFeatureVolume<T>& vol, std::span<const Vec3> queries) {
  const int C = vol.channels;
  std::vector<T> out(queries.size() * C, T(0));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    SEMABS_EXPECT(queries[i].allFinite(), "trilinear_sample: non-finite query");
    const auto s = detail::trilinear_stencil(vol.spec, queries[i]);
    T* row = out.data() + i * C;
    for (int k = 0; k < 8; ++k) {
      if (s.index[k] < 0 || s.weight[k] == 0.0) continue;
      const T w = static_cast<T>(s.weight[k]);
      for (int c = 0; c < C; ++c) row[c] += w * vol.at(c, static_cast<std::size_t>(s.index[k]));
    }
  }
  return out;
}

/// Adjoint of trilinear_sample: accumulates d(loss)/d(samples) into `grad`.
template <class T>
void trilinear_sample_backward(std::span<const Vec3> queries, std::span<const T> grad_samples,
                               BasicFeatureVolume<T>& grad) {
  const int C = grad.channels;
  SEMABS_EXPECT(grad_samples.size() == queries.size() * C,
                "trilinear_sample_backward: gradient shape mismatch");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto s = detail::trilinear_stencil(grad.spec, queries[i]);
    const T* row = grad_samples.data() + i * C;
    for (int k = 0; k < 8; ++k) {
      if (s.index[k] < 0 || s.weight[k] == 0.0) continue;
      const T w = static_cast<T>(s.weight[k]);
      for (int c = 0; c < C; ++c) grad.at(c, static_cast<std::size_t>(s.index[k])) += w * row[c];
    }
  }
}

/// |a and b| / |a or b|; two empty grids agree perfectly (1.0).
inline double voxel_iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (!(a.spec == b.spec) || a.data.size() != b.data.size())
    throw ContractViolation("voxel_iou: grids have different specs");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool x = a.data[i] != 0, y = b.data[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Per-voxel argmax over class probability volumes (C = 1 each). Voxels whose
/// best probability is below `threshold` are EMPTY; ties go to the lower index.
inline SemanticGrid semantic_argmax(std::span<const FeatureVolume> per_class, double threshold) {
  if (per_class.empty()) throw ContractViolation("semantic_argmax: need at least one class");
  const GridSpec& spec = per_class.front().spec;
  for (const auto& v : per_class) {
    SEMABS_EXPECT(v.spec == spec, "semantic_argmax: volumes must share a GridSpec");
    SEMABS_EXPECT(v.channels == 1, "semantic_argmax: volumes must have one channel");
  }
  SemanticGrid out(spec);
  for (std::size_t v = 0; v < spec.voxel_count(); ++v) {
    std::int32_t best = 0;
    float best_p = per_class[0].data[v];
    for (std::size_t k = 1; k < per_class.size(); ++k) {
      if (per_class[k].data[v] > best_p) {
        best_p = per_class[k].data[v];
        best = static_cast<std::int32_t>(k);
      }
    }
    out.data[v] = best_p < threshold ? SemanticGrid::kEmpty : best;
  }
  return out;
}

inline OccupancyGrid threshold_volume(const FeatureVolume& prob, double threshold) {
  SEMABS_EXPECT(prob.channels == 1, "threshold_volume: expects one channel");
  OccupancyGrid g(prob.spec);
  for (std::size_t v = 0; v < g.data.size(); ++v) g.data[v] = prob.data[v] >= threshold;
  return g;
}

inline constexpr std::uint32_t kVolumeFormatVersion = 1;

inline std::string encode_volume(const FeatureVolume& vol) {
  io::ByteWriter w;
  w.magic("FVOL");
  w.u32(kVolumeFormatVersion);
  w.u32(static_cast<std::uint32_t>(vol.channels));
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(vol.spec.resolution[a]));
  for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(vol.spec.lower[a]));
  for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(vol.spec.upper[a]));
  w.f32s(vol.data);
  return w.take();
}

/// Bounds are stored as f32, so a decoded GridSpec carries f32-rounded bounds.
inline FeatureVolume decode_volume(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("FVOL");
  auto at = r.offset();
  if (r.u32() != kVolumeFormatVersion) throw FormatError("unsupported FVOL version", at);
  at = r.offset();
  const auto c = r.u32();
  GridSpec spec;
  for (int a = 0; a < 3; ++a) spec.resolution[a] = static_cast<int>(r.u32());
  for (int a = 0; a < 3; ++a) spec.lower[a] = r.f32();
  for (int a = 0; a < 3; ++a) spec.upper[a] = r.f32();
  if (c == 0) throw FormatError("FVOL with zero channels", at);
  for (int a = 0; a < 3; ++a) {
    if (spec.resolution[a] < 1 || !(spec.lower[a] < spec.upper[a]))
      throw FormatError("FVOL with invalid grid spec", at);
  }
  if (static_cast<std::uint64_t>(c) * spec.voxel_count() * 4 != r.remaining())
    throw FormatError("FVOL payload size does not match header", r.offset());
  FeatureVolume vol(spec, static_cast<int>(c));
  r.f32s(vol.data);
  return vol;
}

inline void write_volume(const std::filesystem::path& path, const FeatureVolume& vol) {
  io::write_file_atomic(path, encode_volume(vol));
}
inline FeatureVolume read_volume(const std::filesystem::path& path) {
  return decode_volume(io::read_file(path));
}

}  // namespace semabs
