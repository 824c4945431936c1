// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "semabs/common.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

namespace semabs {

/// Axis-aligned metric box split into a regular lattice of voxels. Bounds are
/// half-open, [lower, upper), so every point in range belongs to exactly one
/// voxel.
struct GridSpec {
  Vec3 lower{-1.0, -1.0, -0.1};
  Vec3 upper{1.0, 1.0, 1.9};
  std::array<int, 3> resolution{32, 32, 32};

  static GridSpec cube(int res) {
    GridSpec g;
    g.resolution = {res, res, res};
    return g;
  }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      SEMABS_EXPECT(lower[a] < upper[a], "GridSpec: lower must be < upper on every axis");
      SEMABS_EXPECT(resolution[a] >= 1, "GridSpec: resolution must be >= 1");
    }
  }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2];
  }
  double edge(int axis) const { return (upper[axis] - lower[axis]) / resolution[axis]; }
  double min_edge() const { return std::min({edge(0), edge(1), edge(2)}); }

  bool contains(const Vec3& p) const {
    for (int a = 0; a < 3; ++a)
      if (!(p[a] >= lower[a] && p[a] < upper[a])) return false;
    return true;
  }

  std::size_t flat(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * resolution[1] + y) * resolution[2] + z;
  }

  /// Voxel containing p. Caller guarantees contains(p).
  std::array<int, 3> voxel_of(const Vec3& p) const {
    std::array<int, 3> v{};
    for (int a = 0; a < 3; ++a) {
      int i = static_cast<int>(std::floor((p[a] - lower[a]) / edge(a)));
      // floating-point rounding can push a point just below upper into index res
      v[a] = std::min(std::max(i, 0), resolution[a] - 1);
    }
    return v;
  }

  Vec3 center(int x, int y, int z) const {
    return {lower[0] + (x + 0.5) * edge(0), lower[1] + (y + 0.5) * edge(1),
            lower[2] + (z + 0.5) * edge(2)};
  }

  /// All voxel centers in flat (x-major, z fastest) order.
  std::vector<Vec3> centers() const {
    std::vector<Vec3> out;
    out.reserve(voxel_count());
    for (int x = 0; x < resolution[0]; ++x)
      for (int y = 0; y < resolution[1]; ++y)
        for (int z = 0; z < resolution[2]; ++z) out.push_back(center(x, y, z));
    return out;
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.lower == b.lower && a.upper == b.upper && a.resolution == b.resolution;
  }
};

}  // namespace semabs
