// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Relevancy maps: the only channel through which text labels reach the 3D
// model. Covers the multi-scale crop schedule and its aggregation rule, a
// ground-truth-driven oracle provider, RMAP file I/O and projection to 3D.

#pragma once

#include "semabs/binary_io.hpp"
#include "semabs/geometry.hpp"
#include "semabs/scene.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <tuple>
#include <span>
#include <string>
#include <vector>

namespace semabs {

/// Non-negative per-pixel relevancy for one text label, row-major. Values are
/// raw: never thresholded or renormalized, so magnitude carries confidence.
struct RelevancyMap {
  std::string label;
  int width = 0, height = 0;
  std::vector<float> values;

  RelevancyMap() = default;
  RelevancyMap(std::string l, int w, int h)
      : label(std::move(l)), width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

  float& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  float at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }

  void validate() const {
    SEMABS_EXPECT(width > 0 && height > 0, "RelevancyMap: empty dimensions");
    SEMABS_EXPECT(values.size() == static_cast<std::size_t>(width) * height,
                  "RelevancyMap: value count does not match dimensions");
    for (float v : values)
      SEMABS_EXPECT(std::isfinite(v) && v >= 0.0f, "RelevancyMap: values must be finite and >= 0");
  }
};

// ---------------------------------------------------------------------------
// Multi-scale crop schedule

struct CropWindow {
  int x = 0, y = 0, size = 1;
  friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

struct CropScale {
  int size = 1;
  int stride = 1;
  std::vector<CropWindow> windows;
};

struct CropSchedule {
  int width = 0, height = 0;
  std::vector<CropScale> scales;

  /// Number of windows at `scale` covering each pixel, row-major.
  std::vector<int> coverage(std::size_t scale) const {
    std::vector<int> cov(static_cast<std::size_t>(width) * height, 0);
    for (const auto& w : scales.at(scale).windows)
      for (int v = w.y; v < w.y + w.size; ++v)
        for (int u = w.x; u < w.x + w.size; ++u) ++cov[static_cast<std::size_t>(v) * width + u];
    return cov;
  }
};

namespace detail {

/// 0, stride, 2*stride, ... while the window fits, plus one window flush with
/// the far edge when the last regular window stops short of it.
inline std::vector<int> window_offsets(int extent, int size, int stride) {
  std::vector<int> out;
  for (int p = 0; p + size <= extent; p += stride) out.push_back(p);
  if (out.back() + size < extent) out.push_back(extent - size);
  return out;
}

}  // namespace detail

/// Crop sizes floor(h / divisor) with strides max(1, floor(size * num / den)).
inline CropSchedule make_crop_schedule(int width, int height, std::span<const int> scale_divisors,
                                       int stride_num = 1, int stride_den = 4) {
  SEMABS_EXPECT(width == height && width > 0, "make_crop_schedule: input must be square");
  SEMABS_EXPECT(!scale_divisors.empty(), "make_crop_schedule: need at least one scale");
  SEMABS_EXPECT(stride_num > 0 && stride_den > 0, "make_crop_schedule: stride fraction must be positive");
  CropSchedule sched;
  sched.width = width;
  sched.height = height;
  for (int div : scale_divisors) {
    SEMABS_EXPECT(div >= 1, "make_crop_schedule: divisors must be >= 1");
    CropScale s;
    s.size = height / div;
    if (s.size < 1) throw ContractViolation("make_crop_schedule: crop size below one pixel");
    s.stride = std::max(1, static_cast<int>(static_cast<long long>(s.size) * stride_num / stride_den));
    const auto offs = detail::window_offsets(height, s.size, s.stride);
    for (int y : offs)
      for (int x : offs) s.windows.push_back({x, y, s.size});
    sched.scales.push_back(std::move(s));
  }
  return sched;
}

/// Relevancy computed on one crop window of one (possibly flipped) image
/// variant. `values` is size x size, row-major, in the variant's orientation.
struct WindowRelevancy {
  int scale = 0;
  CropWindow window;
  std::vector<float> values;
  int variant = 0;       // augmentation index
  bool flipped = false;  // variant was horizontally mirrored before extraction
};

/// Per pixel: mean over covering windows within a scale, then mean over
/// scales, then (after un-flipping) mean over augmentation variants. All sums
/// run in double in canonical (variant, scale, y, x) order, so the result does
/// not depend on input order.
inline RelevancyMap aggregate_crops(std::span<const WindowRelevancy> maps, const CropSchedule& schedule,
                                    std::string label = {}) {
  SEMABS_EXPECT(!maps.empty(), "aggregate_crops: no window maps");
  const int W = schedule.width, H = schedule.height;
  const std::size_t npix = static_cast<std::size_t>(W) * H;

  std::vector<const WindowRelevancy*> order;
  for (const auto& m : maps) {
    SEMABS_EXPECT(m.scale >= 0 && static_cast<std::size_t>(m.scale) < schedule.scales.size(),
                  "aggregate_crops: scale index out of range");
    SEMABS_EXPECT(m.window.size == schedule.scales[m.scale].size, "aggregate_crops: window size does not match scale");
    SEMABS_EXPECT(m.window.x >= 0 && m.window.y >= 0 && m.window.x + m.window.size <= W &&
                      m.window.y + m.window.size <= H,
                  "aggregate_crops: window outside image");
    SEMABS_EXPECT(m.values.size() == static_cast<std::size_t>(m.window.size) * m.window.size,
                  "aggregate_crops: map size does not match its window");
    order.push_back(&m);
  }
  std::sort(order.begin(), order.end(), [](const WindowRelevancy* a, const WindowRelevancy* b) {
    return std::tie(a->variant, a->flipped, a->scale, a->window.y, a->window.x) <
           std::tie(b->variant, b->flipped, b->scale, b->window.y, b->window.x);
  });

  std::vector<double> total(npix, 0.0);
  int variants = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const int variant = order[i]->variant;
    const bool flipped = order[i]->flipped;
    std::vector<double> across_scales(npix, 0.0);
    int scales = 0;
    while (i < order.size() && order[i]->variant == variant && order[i]->flipped == flipped) {
      const int scale = order[i]->scale;
      std::vector<double> sum(npix, 0.0);
      std::vector<int> count(npix, 0);
      for (; i < order.size() && order[i]->variant == variant && order[i]->flipped == flipped &&
             order[i]->scale == scale;
           ++i) {
        const auto& m = *order[i];
        const int s = m.window.size;
        for (int v = 0; v < s; ++v)
          for (int u = 0; u < s; ++u) {
            const std::size_t p = static_cast<std::size_t>(m.window.y + v) * W + (m.window.x + u);
            sum[p] += m.values[static_cast<std::size_t>(v) * s + u];
            ++count[p];
          }
      }
      for (std::size_t p = 0; p < npix; ++p) {
        if (count[p] == 0)
          throw ContractViolation("aggregate_crops: pixel not covered at scale " + std::to_string(scale));
        across_scales[p] += sum[p] / count[p];
      }
      ++scales;
    }
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        const int src_u = flipped ? W - 1 - u : u;
        total[static_cast<std::size_t>(v) * W + u] += across_scales[static_cast<std::size_t>(v) * W + src_u] / scales;
      }
    ++variants;
  }
  RelevancyMap out(std::move(label), W, H);
  for (std::size_t p = 0; p < npix; ++p) out.values[p] = static_cast<float>(total[p] / variants);
  return out;
}

// ---------------------------------------------------------------------------
// Providers

/// Everything a provider may consult about one view. The oracle reads the
/// scene and instance mask; file-backed providers use `view_id`.
struct ViewInput {
  std::string view_id;
  int width = 0, height = 0;
  const Scene* scene = nullptr;
  const InstanceMask* mask = nullptr;
  std::uint64_t noise_seed = 0;
};

/// Maps (image, labels) to one relevancy map per label, each the size of the
/// image. Implementations must tolerate concurrent calls.
class RelevancyProvider {
 public:
  virtual ~RelevancyProvider() = default;
  virtual std::vector<RelevancyMap> relevancy(const ViewInput& view, std::span<const std::string> labels) const = 0;
};

struct NoiseConfig {
  double amplitude_min = 0.6;
  double amplitude_max = 1.0;
  double blur_sigma = 1.5;  // pixels; <= 0 disables blur
  double background_max = 0.05;
  bool background_noise = true;

  static NoiseConfig off() {
    NoiseConfig n;
    n.blur_sigma = 0;
    n.background_noise = false;
    return n;
  }
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable blur with zero padding.
inline std::vector<double> gaussian_blur(const std::vector<double>& img, int W, int H, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(img.size(), 0.0), out(img.size(), 0.0);
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      double acc = 0;
      for (int j = -r; j <= r; ++j) {
        const int uu = u + j;
        if (uu >= 0 && uu < W) acc += k[j + r] * img[static_cast<std::size_t>(v) * W + uu];
      }
      tmp[static_cast<std::size_t>(v) * W + u] = acc;
    }
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      double acc = 0;
      for (int j = -r; j <= r; ++j) {
        const int vv = v + j;
        if (vv >= 0 && vv < H) acc += k[j + r] * tmp[static_cast<std::size_t>(vv) * W + u];
      }
      out[static_cast<std::size_t>(v) * W + u] = acc;
    }
  return out;
}

}  // namespace detail

/// Simulated VLM relevancy: each visible instance of the label lights up with
/// a random amplitude, the map is blurred, then a uniform background floor is
/// added. Labels with no visible instance produce only the floor.
inline RelevancyMap oracle_relevancy(const Scene& scene, const InstanceMask& mask, std::string_view label,
                                     const NoiseConfig& noise, SeededRng& rng) {
  SEMABS_EXPECT(mask.width > 0 && mask.height > 0 &&
                    mask.ids.size() == static_cast<std::size_t>(mask.width) * mask.height,
                "oracle_relevancy: malformed instance mask");
  const int W = mask.width, H = mask.height;
  std::map<int, double> amplitude;
  for (const auto& o : scene.objects)
    if (o.matches(label)) amplitude[o.id] = rng.uniform(noise.amplitude_min, noise.amplitude_max);
  std::vector<double> img(mask.ids.size(), 0.0);
  for (std::size_t p = 0; p < img.size(); ++p)
    if (auto it = amplitude.find(mask.ids[p]); it != amplitude.end()) img[p] = it->second;
  if (noise.blur_sigma > 0) img = detail::gaussian_blur(img, W, H, noise.blur_sigma);
  RelevancyMap out(std::string(label), W, H);
  for (std::size_t p = 0; p < img.size(); ++p) {
    double v = img[p];
    if (noise.background_noise) v += rng.uniform(0.0, noise.background_max);
    out.values[p] = static_cast<float>(v);
  }
  return out;
}

/// Resolves a label (or synonym) to the canonical class it names in this
/// scene; labels naming nothing resolve to themselves.
inline std::string canonical_label(const Scene& scene, std::string_view label) {
  for (const auto& o : scene.objects)
    if (o.matches(label)) return o.class_label;
  return std::string(label);
}

/// Oracle-backed provider. Noise for each label is seeded from the view's
/// noise seed and the canonical class, so a synonym yields the identical map.
class OracleProvider final : public RelevancyProvider {
 public:
  explicit OracleProvider(NoiseConfig noise = {}) : noise_(noise) {}

  std::vector<RelevancyMap> relevancy(const ViewInput& view, std::span<const std::string> labels) const override {
    if (!view.scene || !view.mask) throw std::runtime_error("oracle provider: view has no scene/mask");
    std::vector<RelevancyMap> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
      SeededRng rng(SeededRng::mix(view.noise_seed ^ stable_hash(canonical_label(*view.scene, label))));
      auto map = oracle_relevancy(*view.scene, *view.mask, label, noise_, rng);
      map.label = label;
      out.push_back(std::move(map));
    }
    return out;
  }

  const NoiseConfig& noise() const { return noise_; }

 private:
  NoiseConfig noise_;
};

// ---------------------------------------------------------------------------
// RMAP files

inline constexpr std::uint32_t kRmapFormatVersion = 1;

inline std::string encode_rmap(std::span<const RelevancyMap> maps) {
  SEMABS_EXPECT(!maps.empty(), "write_rmap: need at least one map");
  const int W = maps.front().width, H = maps.front().height;
  io::ByteWriter w;
  w.magic("RMAP");
  w.u32(kRmapFormatVersion);
  w.u32(static_cast<std::uint32_t>(H));
  w.u32(static_cast<std::uint32_t>(W));
  w.u32(static_cast<std::uint32_t>(maps.size()));
  for (const auto& m : maps) {
    SEMABS_EXPECT(m.width == W && m.height == H, "write_rmap: maps must share dimensions");
    SEMABS_EXPECT(m.values.size() == static_cast<std::size_t>(W) * H, "write_rmap: map size mismatch");
    w.str(m.label);
    w.f32s(m.values);
  }
  return w.take();
}

inline std::vector<RelevancyMap> decode_rmap(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("RMAP");
  auto at = r.offset();
  if (r.u32() != kRmapFormatVersion) throw FormatError("unsupported RMAP version", at);
  at = r.offset();
  const auto H = r.u32(), W = r.u32();
  if (H == 0 || W == 0) throw FormatError("RMAP with empty dimensions", at);
  at = r.offset();
  const auto K = r.u32();
  if (K == 0) throw FormatError("RMAP with no labels", at);
  const std::uint64_t npix = static_cast<std::uint64_t>(H) * W;
  std::vector<RelevancyMap> out;
  for (std::uint32_t k = 0; k < K; ++k) {
    std::string label = r.str();
    if (r.remaining() < npix * 4) throw FormatError("truncated RMAP record for \"" + label + "\"", r.offset());
    RelevancyMap m(std::move(label), static_cast<int>(W), static_cast<int>(H));
    r.f32s(m.values);
    out.push_back(std::move(m));
  }
  r.expect_end();
  return out;
}

inline void write_rmap(const std::filesystem::path& path, std::span<const RelevancyMap> maps) {
  io::write_file_atomic(path, encode_rmap(maps));
}
inline std::vector<RelevancyMap> read_rmap(const std::filesystem::path& path) {
  return decode_rmap(io::read_file(path));
}

/// Serves maps from `<dir>/<view_id>.rmap`, e.g. as written by an external
/// VLM extractor.
class RmapProvider final : public RelevancyProvider {
 public:
  explicit RmapProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::vector<RelevancyMap> relevancy(const ViewInput& view, std::span<const std::string> labels) const override {
    const auto path = dir_ / (view.view_id + ".rmap");
    const auto maps = read_rmap(path);
    std::vector<RelevancyMap> out;
    for (const auto& label : labels) {
      auto it = std::find_if(maps.begin(), maps.end(), [&](const RelevancyMap& m) { return m.label == label; });
      if (it == maps.end())
        throw std::runtime_error("rmap provider: label \"" + label + "\" missing from " + path.string());
      if (view.width && (it->width != view.width || it->height != view.height))
        throw std::runtime_error("rmap provider: " + path.string() + " dimensions do not match the view");
      out.push_back(*it);
    }
    return out;
  }

 private:
  std::filesystem::path dir_;
};

/// Lifts a relevancy map into a one-channel point cloud using depth.
inline PointCloud project_relevancy(const RelevancyMap& map, const DepthImage& depth,
                                    const CameraIntrinsics& intr, const CameraPose& pose) {
  SEMABS_EXPECT(map.width == depth.width && map.height == depth.height,
                "project_relevancy: relevancy and depth sizes differ");
  return unproject_depth(depth, intr, pose, map.values, 1);
}

}  // namespace semabs
