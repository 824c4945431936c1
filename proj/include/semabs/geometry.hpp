// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Pinhole cameras, depth unprojection and similarity transforms on point
// clouds. Camera frames follow the x-right, y-down, z-forward convention.

#pragma once

#include "semabs/binary_io.hpp"
#include "semabs/common.hpp"
#include "semabs/grid.hpp"

#include <span>
#include <vector>

namespace semabs {

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  void validate() const {
    SEMABS_EXPECT(fx > 0 && fy > 0, "CameraIntrinsics: focal lengths must be positive");
    SEMABS_EXPECT(width > 0 && height > 0, "CameraIntrinsics: image size must be positive");
    SEMABS_EXPECT(cx >= 0 && cx < width && cy >= 0 && cy < height,
                  "CameraIntrinsics: principal point outside image");
  }

  /// Square-pixel camera with the given horizontal field of view.
  static CameraIntrinsics from_fov(int width, int height, double hfov_rad) {
    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 0.5 * width / std::tan(0.5 * hfov_rad);
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    return k;
  }
};

/// World-from-camera rigid pose.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const {
    SEMABS_EXPECT((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6,
                  "CameraPose: rotation not orthonormal");
    SEMABS_EXPECT(std::abs(rotation.determinant() - 1.0) < 1e-6, "CameraPose: det(rotation) != 1");
  }

  Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
  Vec3 to_camera(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }

  /// Camera at `eye` looking at `target`, with `up` the world up direction.
  static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    CameraPose pose;
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = down;
    pose.rotation.col(2) = forward;
    pose.translation = eye;
    return pose;
  }
};

/// Row-major z-depth image in meters; 0 marks pixels with no valid return.
struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> data;

  DepthImage() = default;
  DepthImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  float at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
};

inline constexpr std::uint32_t kDepthFormatVersion = 1;

inline std::string encode_depth(const DepthImage& d) {
  io::ByteWriter w;
  w.magic("DPTH");
  w.u32(kDepthFormatVersion);
  w.u32(static_cast<std::uint32_t>(d.width));
  w.u32(static_cast<std::uint32_t>(d.height));
  w.f32s(d.data);
  return w.take();
}

inline DepthImage decode_depth(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("DPTH");
  const auto at = r.offset();
  if (r.u32() != kDepthFormatVersion) throw FormatError("unsupported DPTH version", at);
  const auto w = r.u32(), h = r.u32();
  if (static_cast<std::uint64_t>(w) * h * 4 != r.remaining())
    throw FormatError("DPTH payload size does not match dimensions", r.offset());
  DepthImage d(static_cast<int>(w), static_cast<int>(h));
  r.f32s(d.data);
  return d;
}

inline void write_depth(const std::filesystem::path& path, const DepthImage& d) {
  io::write_file_atomic(path, encode_depth(d));
}
inline DepthImage read_depth(const std::filesystem::path& path) {
  return decode_depth(io::read_file(path));
}

/// Points with `channels` scalar features each, stored point-major.
struct PointCloud {
  std::vector<Vec3> positions;
  int channels = 1;
  std::vector<float> features;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  float feature(std::size_t i, int c = 0) const { return features[i * channels + c]; }

  void push_back(const Vec3& p, std::span<const float> f) {
    positions.push_back(p);
    features.insert(features.end(), f.begin(), f.end());
  }

  void validate() const {
    SEMABS_EXPECT(channels >= 1, "PointCloud: channels must be >= 1");
    SEMABS_EXPECT(features.size() == positions.size() * channels,
                  "PointCloud: feature count does not match point count");
    for (const auto& p : positions) SEMABS_EXPECT(p.allFinite(), "PointCloud: non-finite position");
    for (float f : features) SEMABS_EXPECT(std::isfinite(f), "PointCloud: non-finite feature");
  }
};

struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  void validate() const {
    SEMABS_EXPECT(scale > 0, "SimilarityTransform: scale must be positive");
    CameraPose{rotation, translation}.validate();
  }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.rotation = rotation.transpose();
    inv.scale = 1.0 / scale;
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
  }

  bool is_identity() const {
    return rotation == Mat3::Identity() && translation == Vec3::Zero() && scale == 1.0;
  }
};

/// Back-projects every valid pixel of `depth` into the world frame.
/// `pixel_features` holds `channels` values per pixel, row-major by pixel.
inline PointCloud unproject_depth(const DepthImage& depth, const CameraIntrinsics& intr,
                                  const CameraPose& pose, std::span<const float> pixel_features,
                                  int channels = 1) {
  intr.validate();
  SEMABS_EXPECT(depth.width == intr.width && depth.height == intr.height,
                "unproject_depth: depth size does not match intrinsics");
  SEMABS_EXPECT(channels >= 1, "unproject_depth: channels must be >= 1");
  SEMABS_EXPECT(pixel_features.size() == depth.data.size() * channels,
                "unproject_depth: feature image size does not match depth");
  PointCloud pc;
  pc.channels = channels;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      if (!(d > 0.0)) continue;
      const Vec3 cam{(u - intr.cx) / intr.fx * d, (v - intr.cy) / intr.fy * d, d};
      const std::size_t pix = static_cast<std::size_t>(v) * depth.width + u;
      pc.push_back(pose.to_world(cam), pixel_features.subspan(pix * channels, channels));
    }
  }
  return pc;
}

inline PointCloud apply_transform(const PointCloud& pc, const SimilarityTransform& t) {
  PointCloud out = pc;
  if (t.is_identity()) return out;
  for (auto& p : out.positions) p = t.apply(p);
  return out;
}

inline std::vector<Vec3> apply_transform(std::span<const Vec3> points, const SimilarityTransform& t) {
  std::vector<Vec3> out(points.begin(), points.end());
  if (t.is_identity()) return out;
  for (auto& p : out) p = t.apply(p);
  return out;
}

/// Keeps points with lower <= p < upper on every axis, preserving order.
inline PointCloud filter_bounds(const PointCloud& pc, const GridSpec& spec) {
  PointCloud out;
  out.channels = pc.channels;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (!spec.contains(pc.positions[i])) continue;
    out.push_back(pc.positions[i],
                  std::span<const float>(pc.features).subspan(i * pc.channels, pc.channels));
  }
  return out;
}

struct AugmentConfig {
  Vec3 translation_range{0.1, 0.1, 0.1};  // +/- meters per axis
  double yaw_range = 2.0 * std::numbers::pi;  // yaw ~ U[0, yaw_range)
  double scale_min = 0.9;
  double scale_max = 1.1;

  static AugmentConfig none() {
    AugmentConfig c;
    c.translation_range = Vec3::Zero();
    c.yaw_range = 0.0;
    c.scale_min = c.scale_max = 1.0;
    return c;
  }
};

inline SimilarityTransform sample_augmentation(SeededRng& rng, const AugmentConfig& cfg) {
  if (!(cfg.scale_min > 0 && cfg.scale_min <= cfg.scale_max))
    throw ContractViolation("sample_augmentation: need 0 < scale_min <= scale_max");
  if (!(cfg.yaw_range >= 0 && cfg.yaw_range <= 2.0 * std::numbers::pi))
    throw ContractViolation("sample_augmentation: yaw_range must lie in [0, 2pi]");
  if ((cfg.translation_range.array() < 0).any())
    throw ContractViolation("sample_augmentation: translation ranges must be >= 0");
  // Always consume the same number of draws so streams stay aligned across configs.
  const double yaw = rng.uniform01() * cfg.yaw_range;
  Vec3 t;
  for (int a = 0; a < 3; ++a) t[a] = rng.uniform(-1.0, 1.0) * cfg.translation_range[a];
  const double s = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * rng.uniform01();
  SimilarityTransform out;
  out.rotation = yaw == 0.0 ? Mat3::Identity() : yaw_rotation(yaw);
  out.translation = t;
  out.scale = s;
  return out;
}

}  // namespace semabs
