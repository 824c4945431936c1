// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

#include "semabs/geometry.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace semabs {
namespace {

CameraIntrinsics small_camera() {
  CameraIntrinsics k;
  k.fx = 50;
  k.fy = 40;
  k.cx = 16;
  k.cy = 12;
  k.width = 32;
  k.height = 24;
  return k;
}

CameraPose random_pose(SeededRng& rng) {
  const Vec3 eye{rng.uniform(-2, 2), rng.uniform(-3, -1), rng.uniform(0.5, 2)};
  const Vec3 target{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0, 0.6)};
  return CameraPose::look_at(eye, target);
}

TEST(Unproject, PrincipalPixelLiesOnOpticalAxis) {
  const auto k = small_camera();
  DepthImage d(k.width, k.height);
  d.at(16, 12) = 1.0f;
  std::vector<float> feat(d.data.size(), 0.0f);
  feat[12 * k.width + 16] = 0.25f;
  const auto pc = unproject_depth(d, k, CameraPose{}, feat);
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_EQ(pc.positions[0], Vec3(0, 0, 1));
  EXPECT_EQ(pc.feature(0), 0.25f);
}

TEST(Unproject, OffAxisPixelByHand) {
  CameraIntrinsics k = small_camera();
  k.fx = 10;
  k.cx = 5;
  k.width = 32;
  DepthImage d(k.width, k.height);
  d.at(15, 12) = 2.0f;  // u = cx + fx
  std::vector<float> feat(d.data.size(), 1.0f);
  const auto pc = unproject_depth(d, k, CameraPose{}, feat);
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_NEAR(pc.positions[0].x(), 2.0, 1e-12);
  EXPECT_NEAR(pc.positions[0].y(), 0.0, 1e-12);
  EXPECT_NEAR(pc.positions[0].z(), 2.0, 1e-12);
}

TEST(Unproject, AllInvalidGivesEmptyCloud) {
  const auto k = small_camera();
  DepthImage d(k.width, k.height);
  std::vector<float> feat(d.data.size(), 1.0f);
  EXPECT_TRUE(unproject_depth(d, k, CameraPose{}, feat).empty());
}

TEST(Unproject, DimensionMismatchIsRejected) {
  const auto k = small_camera();
  DepthImage d(k.width + 1, k.height);
  std::vector<float> feat(d.data.size(), 1.0f);
  EXPECT_THROW(unproject_depth(d, k, CameraPose{}, feat), ContractViolation);
  DepthImage ok(k.width, k.height);
  std::vector<float> short_feat(ok.data.size() - 1, 1.0f);
  EXPECT_THROW(unproject_depth(ok, k, CameraPose{}, short_feat), ContractViolation);
}

TEST(Unproject, RecoversProjectedPoints) {
  // Project a known world point analytically, write its depth into the
  // image, and read it back.
  SeededRng rng(1);
  const auto k = small_camera();
  int checked = 0;
  while (checked < 100) {
    const auto pose = random_pose(rng);
    const Vec3 cam{rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4), rng.uniform(0.5, 4.0)};
    const double u = k.fx * cam.x() / cam.z() + k.cx;
    const double v = k.fy * cam.y() / cam.z() + k.cy;
    // Move the point onto the nearest pixel centre ray so the pixel is exact.
    const int ui = static_cast<int>(std::lround(u)), vi = static_cast<int>(std::lround(v));
    if (ui < 0 || vi < 0 || ui >= k.width || vi >= k.height) continue;
    const Vec3 on_ray{(ui - k.cx) / k.fx * cam.z(), (vi - k.cy) / k.fy * cam.z(), cam.z()};
    const Vec3 world = pose.rotation * on_ray + pose.translation;
    DepthImage d(k.width, k.height);
    d.at(ui, vi) = static_cast<float>(pose.to_camera(world).z());
    std::vector<float> feat(d.data.size(), 0.0f);
    const auto pc = unproject_depth(d, k, pose, feat);
    ASSERT_EQ(pc.size(), 1u);
    EXPECT_LT((pc.positions[0] - world).norm(), 1e-5);
    ++checked;
  }
}

TEST(Transform, IdentityIsBitExact) {
  SeededRng rng(2);
  PointCloud pc;
  for (int i = 0; i < 50; ++i) {
    const float f = static_cast<float>(i);
    pc.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, std::span<const float>(&f, 1));
  }
  const auto out = apply_transform(pc, SimilarityTransform{});
  EXPECT_EQ(out.positions, pc.positions);
  EXPECT_EQ(out.features, pc.features);
}

TEST(Transform, HandExamples) {
  SimilarityTransform t;
  t.translation = {1, 0, 0};
  EXPECT_EQ(t.apply(Vec3::Zero()), Vec3(1, 0, 0));

  SimilarityTransform s;
  s.scale = 2;
  s.rotation = yaw_rotation(std::numbers::pi / 2);
  const Vec3 p = s.apply({1, 0, 0});
  EXPECT_NEAR(p.x(), 0.0, 1e-12);
  EXPECT_NEAR(p.y(), 2.0, 1e-12);
  EXPECT_NEAR(p.z(), 0.0, 1e-12);
}

TEST(Transform, InverseRoundTrip) {
  SeededRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = sample_augmentation(rng, AugmentConfig{});
    const auto inv = t.inverse();
    for (int i = 0; i < 20; ++i) {
      const Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      EXPECT_LT((inv.apply(t.apply(p)) - p).norm(), 1e-6);
    }
  }
}

TEST(Transform, FeaturesUntouched) {
  PointCloud pc;
  const std::array<float, 2> f{0.5f, 0.25f};
  pc.channels = 2;
  pc.push_back({0.1, 0.2, 0.3}, f);
  SimilarityTransform t;
  t.scale = 3;
  EXPECT_EQ(apply_transform(pc, t).features, pc.features);
}

TEST(FilterBounds, MatchesScalarOracle) {
  SeededRng rng(4);
  const GridSpec g;
  PointCloud pc;
  for (int i = 0; i < 1000; ++i) {
    const float f = static_cast<float>(i);
    pc.push_back({rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-0.5, 2.3)},
                 std::span<const float>(&f, 1));
  }
  const auto out = filter_bounds(pc, g);
  std::vector<float> expected;
  for (std::size_t i = 0; i < pc.size(); ++i)
    if (oracle::in_bounds(g, pc.positions[i])) expected.push_back(pc.feature(i));
  EXPECT_EQ(out.features, expected);
  EXPECT_EQ(filter_bounds(out, g).positions, out.positions);
}

TEST(FilterBounds, HalfOpenUpperBound) {
  const GridSpec g;
  PointCloud pc;
  const float f = 1.0f;
  pc.push_back(g.lower, std::span<const float>(&f, 1));
  pc.push_back({0.0, 0.0, g.upper.z()}, std::span<const float>(&f, 1));
  pc.push_back({g.upper.x(), 0.0, 0.5}, std::span<const float>(&f, 1));
  const auto out = filter_bounds(pc, g);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.positions[0], g.lower);
}

TEST(FilterBounds, AllInsideUnchanged) {
  const GridSpec g;
  PointCloud pc;
  const float f = 0.3f;
  for (int i = 0; i < 10; ++i) pc.push_back({0.01 * i, 0.0, 0.5}, std::span<const float>(&f, 1));
  const auto out = filter_bounds(pc, g);
  EXPECT_EQ(out.positions, pc.positions);
  EXPECT_EQ(out.features, pc.features);
}

TEST(Augmentation, CollapsedRangesGiveIdentity) {
  SeededRng rng(5);
  EXPECT_TRUE(sample_augmentation(rng, AugmentConfig::none()).is_identity());
}

TEST(Augmentation, DeterministicPerSeed) {
  SeededRng a(9), b(9);
  const auto ta = sample_augmentation(a, {});
  const auto tb = sample_augmentation(b, {});
  EXPECT_EQ(ta.rotation, tb.rotation);
  EXPECT_EQ(ta.translation, tb.translation);
  EXPECT_EQ(ta.scale, tb.scale);
}

TEST(Augmentation, RangesRespected) {
  SeededRng rng(6);
  const AugmentConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    const auto t = sample_augmentation(rng, cfg);
    t.validate();
    EXPECT_GE(t.scale, cfg.scale_min);
    EXPECT_LE(t.scale, cfg.scale_max);
    for (int a = 0; a < 3; ++a) EXPECT_LE(std::abs(t.translation[a]), cfg.translation_range[a]);
    EXPECT_NEAR(t.rotation(2, 2), 1.0, 1e-12);  // yaw only
  }
}

TEST(Augmentation, YawMeanIsCentred) {
  SeededRng rng(7);
  const int n = 10000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const auto t = sample_augmentation(rng, {});
    double yaw = std::atan2(t.rotation(1, 0), t.rotation(0, 0));
    if (yaw < 0) yaw += 2 * std::numbers::pi;
    sum += yaw;
  }
  const double sigma = 2 * std::numbers::pi / std::sqrt(12.0) / std::sqrt(double(n));
  EXPECT_NEAR(sum / n, std::numbers::pi, 3 * sigma);
}

TEST(Augmentation, InvalidConfigRejected) {
  SeededRng rng(8);
  AugmentConfig cfg;
  cfg.scale_min = 1.2;
  cfg.scale_max = 1.1;
  EXPECT_THROW(sample_augmentation(rng, cfg), ContractViolation);
  cfg.scale_min = 0;
  EXPECT_THROW(sample_augmentation(rng, cfg), ContractViolation);
}

TEST(Camera, InvariantsChecked) {
  auto k = small_camera();
  k.fx = 0;
  EXPECT_THROW(k.validate(), ContractViolation);
  k = small_camera();
  k.cx = k.width;
  EXPECT_THROW(k.validate(), ContractViolation);
  CameraPose p;
  p.rotation(0, 0) = 2;
  EXPECT_THROW(p.validate(), ContractViolation);
  p.rotation = -Mat3::Identity();
  EXPECT_THROW(p.validate(), ContractViolation);
}

TEST(DepthFile, RoundTripAndCorruption) {
  DepthImage d(5, 3);
  for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = 0.1f * static_cast<float>(i);
  const auto bytes = encode_depth(d);
  EXPECT_EQ(bytes.size(), 16u + 4u * 15u);
  const auto back = decode_depth(bytes);
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.data, d.data);

  std::string bad = bytes;
  bad[0] = 'X';
  try {
    decode_depth(bad);
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(decode_depth(bytes.substr(0, bytes.size() - 2)), FormatError);
}

}  // namespace
}  // namespace semabs
