// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic rooms built from spheres and boxes: generation, analytic depth
// rendering, occupancy ground truth and viewer-centric spatial relation labels.

#pragma once

#include "semabs/binary_io.hpp"
#include "semabs/common.hpp"
#include "semabs/geometry.hpp"
#include "semabs/voxel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace semabs {

/// Closed axis-aligned box.
struct Aabb {
  Vec3 lower = Vec3::Zero();
  Vec3 upper = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= lower.array()).all() && (p.array() <= upper.array()).all();
  }
  bool contains(const Aabb& b) const { return contains(b.lower) && contains(b.upper); }
  Vec3 center() const { return 0.5 * (lower + upper); }
  Vec3 half_extents() const { return 0.5 * (upper - lower); }
  void expand(const Aabb& b) {
    lower = lower.cwiseMin(b.lower);
    upper = upper.cwiseMax(b.upper);
  }
  friend bool operator==(const Aabb&, const Aabb&) = default;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.1;
};

/// Oriented box; `pose` maps box-local coordinates to world.
struct Box {
  CameraPose pose;
  Vec3 half_extents{0.1, 0.1, 0.1};
};

using Primitive = std::variant<Sphere, Box>;

/// Exact signed distance from p to the primitive surface (negative inside).
inline double primitive_sdf(const Primitive& prim, const Vec3& p) {
  if (const auto* s = std::get_if<Sphere>(&prim)) return (p - s->center).norm() - s->radius;
  const auto& b = std::get<Box>(prim);
  const Vec3 q = b.pose.to_camera(p).cwiseAbs() - b.half_extents;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

inline Aabb primitive_bounds(const Primitive& prim) {
  if (const auto* s = std::get_if<Sphere>(&prim))
    return {s->center.array() - s->radius, s->center.array() + s->radius};
  const auto& b = std::get<Box>(prim);
  const Vec3 ext = b.pose.rotation.cwiseAbs() * b.half_extents;
  return {b.pose.translation - ext, b.pose.translation + ext};
}

/// Smallest ray parameter s > 0 with origin + s * dir on the surface.
inline std::optional<double> ray_hit(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  if (const auto* s = std::get_if<Sphere>(&prim)) {
    const Vec3 oc = origin - s->center;
    const double a = dir.squaredNorm();
    const double half_b = oc.dot(dir);
    const double c = oc.squaredNorm() - s->radius * s->radius;
    const double disc = half_b * half_b - a * c;
    if (disc < 0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double t = (-half_b - sq) / a;
    if (t <= 0) t = (-half_b + sq) / a;
    if (t <= 0) return std::nullopt;
    return t;
  }
  const auto& b = std::get<Box>(prim);
  const Vec3 o = b.pose.to_camera(origin);
  const Vec3 d = b.pose.rotation.transpose() * dir;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double h = b.half_extents[a];
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > h) return std::nullopt;
      continue;
    }
    double t1 = (-h - o[a]) / d[a], t2 = (h - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_far <= 0) return std::nullopt;
  return t_near > 0 ? t_near : t_far;
}

struct SceneObject {
  int id = 0;
  std::string class_label;
  std::vector<std::string> synonyms;
  std::vector<Primitive> primitives;
  std::optional<Aabb> on_top_region;
  std::optional<Aabb> inside_region;

  bool matches(std::string_view label) const {
    if (class_label == label) return true;
    return std::find(synonyms.begin(), synonyms.end(), label) != synonyms.end();
  }

  Aabb bounds() const {
    Aabb box = primitive_bounds(primitives.front());
    for (std::size_t i = 1; i < primitives.size(); ++i) box.expand(primitive_bounds(primitives[i]));
    return box;
  }
  Vec3 centroid() const { return bounds().center(); }

  /// Radius of a sphere about centroid() enclosing every primitive.
  double bounding_radius() const {
    const Vec3 c = centroid();
    double r = 0;
    for (const auto& p : primitives) {
      if (const auto* s = std::get_if<Sphere>(&p)) {
        r = std::max(r, (s->center - c).norm() + s->radius);
      } else {
        const auto& b = std::get<Box>(p);
        r = std::max(r, (b.pose.translation - c).norm() + b.half_extents.norm());
      }
    }
    return r;
  }

  double sdf(const Vec3& p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& prim : primitives) d = std::min(d, primitive_sdf(prim, p));
    return d;
  }
};

enum class SplitTag { Train, NovelRoom, NovelSynonym, NovelClass };

inline std::string to_string(SplitTag t) {
  switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::NovelRoom: return "novel_room";
    case SplitTag::NovelSynonym: return "novel_synonym";
    case SplitTag::NovelClass: return "novel_class";
  }
  return "train";
}

inline SplitTag parse_split_tag(std::string_view s) {
  if (s == "train") return SplitTag::Train;
  if (s == "novel_room") return SplitTag::NovelRoom;
  if (s == "novel_synonym") return SplitTag::NovelSynonym;
  if (s == "novel_class") return SplitTag::NovelClass;
  throw ConfigError("unknown split tag: " + std::string(s));
}

struct Scene {
  Aabb room{{-0.85, -0.85, 0.0}, {0.85, 0.85, 1.8}};
  std::vector<SceneObject> objects;
  SplitTag split_tag = SplitTag::Train;

  const SceneObject* find(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }

  /// Distinct canonical class labels, in first-appearance order.
  std::vector<std::string> class_labels() const {
    std::vector<std::string> out;
    for (const auto& o : objects)
      if (std::find(out.begin(), out.end(), o.class_label) == out.end()) out.push_back(o.class_label);
    return out;
  }

  void validate() const {
    std::set<int> ids;
    Aabb tolerant = room;  // placement arithmetic may overshoot by rounding
    tolerant.lower.array() -= 1e-9;
    tolerant.upper.array() += 1e-9;
    for (const auto& o : objects) {
      SEMABS_EXPECT(ids.insert(o.id).second, "Scene: duplicate object id");
      SEMABS_EXPECT(!o.primitives.empty(), "Scene: object without primitives");
      SEMABS_EXPECT(tolerant.contains(o.bounds()), "Scene: object outside room");
    }
  }
};

enum class SpatialRelation { Behind, LeftOf, RightOf, InFrontOf, OnTopOf, Inside };

inline constexpr std::array<SpatialRelation, 6> kAllRelations = {
    SpatialRelation::Behind,    SpatialRelation::LeftOf,  SpatialRelation::RightOf,
    SpatialRelation::InFrontOf, SpatialRelation::OnTopOf, SpatialRelation::Inside};

inline std::string to_string(SpatialRelation r) {
  switch (r) {
    case SpatialRelation::Behind: return "behind";
    case SpatialRelation::LeftOf: return "left of";
    case SpatialRelation::RightOf: return "right of";
    case SpatialRelation::InFrontOf: return "in front of";
    case SpatialRelation::OnTopOf: return "on top of";
    case SpatialRelation::Inside: return "inside";
  }
  return "";
}

inline SpatialRelation parse_relation(std::string_view s) {
  for (auto r : kAllRelations)
    if (to_string(r) == s) return r;
  throw ConfigError("unknown spatial relation: " + std::string(s));
}

struct Description {
  std::string target_label;
  SpatialRelation relation = SpatialRelation::Behind;
  std::string ref_label;

  friend bool operator==(const Description&, const Description&) = default;
};

// ---------------------------------------------------------------------------
// Generation

enum class ShapeFamily { Ball, Block, Pillar, Lamp, Container };

struct ClassSpec {
  std::string label;
  std::vector<std::string> synonyms;
  ShapeFamily family = ShapeFamily::Ball;
  double size_min = 0.12;  // family-specific characteristic half-size, meters
  double size_max = 0.22;
};

/// Ten classes, two per shape family. Classes sharing a family have the
/// same geometry distribution; only the text differs.
inline std::vector<ClassSpec> default_vocabulary() {
  return {
      {"ball", {"sphere toy"}, ShapeFamily::Ball, 0.12, 0.22},
      {"crate", {"wooden box"}, ShapeFamily::Block, 0.12, 0.24},
      {"lamp", {"table lamp"}, ShapeFamily::Lamp, 0.10, 0.14},
      {"cabinet", {"cupboard"}, ShapeFamily::Container, 0.22, 0.30},
      {"vase", {"flower vase"}, ShapeFamily::Pillar, 0.07, 0.11},
      {"globe", {"world globe"}, ShapeFamily::Ball, 0.12, 0.22},
      {"carton", {"cardboard box"}, ShapeFamily::Block, 0.12, 0.24},
      {"trophy", {"award cup"}, ShapeFamily::Lamp, 0.10, 0.14},
      {"safe", {"strongbox"}, ShapeFamily::Container, 0.22, 0.30},
      {"bin", {"trash can"}, ShapeFamily::Pillar, 0.07, 0.11},
  };
}

struct SceneConfig {
  Aabb room{{-0.85, -0.85, 0.0}, {0.85, 0.85, 1.8}};
  int min_objects = 3;
  int max_objects = 5;
  std::vector<ClassSpec> vocabulary = default_vocabulary();
  bool require_container = false;  // guarantees an Inside relation exists
  double p_inside = 0.5;           // chance an object goes into a free container
  double p_on_top = 0.3;           // chance an object goes onto a free flat top
  double clearance = 0.03;
  double wall_thickness = 0.05;
  double region_height = 0.3;  // height of on-top receptacle regions
  int max_retries = 200;
  SplitTag split_tag = SplitTag::Train;
};

namespace detail {

inline Box make_box(const Vec3& center, const Vec3& half, double yaw = 0.0) {
  Box b;
  b.pose.rotation = yaw == 0.0 ? Mat3::Identity() : yaw_rotation(yaw);
  b.pose.translation = center;
  b.half_extents = half;
  return b;
}

/// Object modelled at the origin, resting on z = 0.
struct ProtoObject {
  std::vector<Primitive> primitives;
  double footprint = 0;  // horizontal bounding radius about the z axis
  double height = 0;
  bool flat_top = false;
  double top_half = 0;  // half-size of the inscribed top square
  std::optional<Aabb> interior;
};

inline ProtoObject make_proto(const ClassSpec& cls, SeededRng& rng, const SceneConfig& cfg) {
  ProtoObject p;
  const double s = rng.uniform(cls.size_min, cls.size_max);
  switch (cls.family) {
    case ShapeFamily::Ball: {
      p.primitives.push_back(Sphere{{0, 0, s}, s});
      p.footprint = s;
      p.height = 2 * s;
      break;
    }
    case ShapeFamily::Block: {
      const Vec3 half{s, rng.uniform(0.7, 1.0) * s, rng.uniform(0.6, 1.0) * s};
      const double yaw = rng.uniform(0, std::numbers::pi / 2);
      p.primitives.push_back(make_box({0, 0, half.z()}, half, yaw));
      p.footprint = std::hypot(half.x(), half.y());
      p.height = 2 * half.z();
      p.flat_top = true;
      // largest axis-aligned square inside the rotated top face
      p.top_half = std::min(half.x(), half.y()) / std::sqrt(2.0);
      break;
    }
    case ShapeFamily::Pillar: {
      const Vec3 half{s, s, rng.uniform(2.5, 3.5) * s};
      p.primitives.push_back(make_box({0, 0, half.z()}, half, rng.uniform(0, std::numbers::pi / 2)));
      p.footprint = std::sqrt(2.0) * s;
      p.height = 2 * half.z();
      break;
    }
    case ShapeFamily::Lamp: {
      const double base_h = rng.uniform(1.2, 2.0) * s;
      const double shade = rng.uniform(1.1, 1.4) * s;
      p.primitives.push_back(make_box({0, 0, base_h}, {0.7 * s, 0.7 * s, base_h}));
      p.primitives.push_back(Sphere{{0, 0, 2 * base_h + 0.8 * shade}, shade});
      p.footprint = std::max(shade, 0.7 * s * std::sqrt(2.0));
      p.height = 2 * base_h + 1.8 * shade;
      break;
    }
    case ShapeFamily::Container: {
      const Vec3 half{s, rng.uniform(0.8, 1.0) * s, rng.uniform(0.8, 1.0) * s};
      const double t = cfg.wall_thickness;
      const Vec3 c{0, 0, half.z()};
      // six walls of a closed hollow box
      p.primitives.push_back(make_box(c + Vec3(0, 0, half.z() - t / 2), {half.x(), half.y(), t / 2}));
      p.primitives.push_back(make_box(c - Vec3(0, 0, half.z() - t / 2), {half.x(), half.y(), t / 2}));
      p.primitives.push_back(make_box(c + Vec3(half.x() - t / 2, 0, 0), {t / 2, half.y(), half.z() - t}));
      p.primitives.push_back(make_box(c - Vec3(half.x() - t / 2, 0, 0), {t / 2, half.y(), half.z() - t}));
      p.primitives.push_back(
          make_box(c + Vec3(0, half.y() - t / 2, 0), {half.x() - t, t / 2, half.z() - t}));
      p.primitives.push_back(
          make_box(c - Vec3(0, half.y() - t / 2, 0), {half.x() - t, t / 2, half.z() - t}));
      p.footprint = std::hypot(half.x(), half.y());
      p.height = 2 * half.z();
      p.flat_top = true;
      p.top_half = std::min(half.x(), half.y());
      p.interior = Aabb{c - half + Vec3::Constant(t), c + half - Vec3::Constant(t)};
      break;
    }
  }
  return p;
}

inline Primitive translated(const Primitive& prim, const Vec3& offset) {
  if (const auto* s = std::get_if<Sphere>(&prim)) return Sphere{s->center + offset, s->radius};
  Box b = std::get<Box>(prim);
  b.pose.translation += offset;
  return b;
}

struct Receptacle {
  int object_index;
  Vec3 top_center;  // center of the top face
  double top_half;
  std::optional<Aabb> interior;
  bool top_used = false;
  bool interior_used = false;
};

}  // namespace detail

/// Places objects on the floor, inside containers or on flat tops without
/// interpenetration. Deterministic given the rng state.
inline Scene generate_scene(SeededRng& rng, const SceneConfig& cfg) {
  if (cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects)
    throw ContractViolation("generate_scene: need 1 <= min_objects <= max_objects");
  if (cfg.vocabulary.empty()) throw ContractViolation("generate_scene: empty class vocabulary");
  std::vector<std::size_t> containers;
  for (std::size_t i = 0; i < cfg.vocabulary.size(); ++i)
    if (cfg.vocabulary[i].family == ShapeFamily::Container) containers.push_back(i);
  if (cfg.require_container && containers.empty())
    throw ContractViolation("generate_scene: require_container needs a container class");

  Scene scene;
  scene.room = cfg.room;
  scene.split_tag = cfg.split_tag;
  const int n = cfg.min_objects +
                static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_objects - cfg.min_objects + 1)));

  struct FloorSlot {
    Vec3 center;
    double footprint;
  };
  std::vector<FloorSlot> floor;
  std::vector<detail::Receptacle> receptacles;

  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      const bool force_container = cfg.require_container && i == 0;
      const ClassSpec& cls = force_container
                                 ? cfg.vocabulary[containers[rng.below(containers.size())]]
                                 : cfg.vocabulary[rng.below(cfg.vocabulary.size())];
      detail::ProtoObject proto = detail::make_proto(cls, rng, cfg);
      const double mode = rng.uniform01();
      const double jx = rng.uniform(-1, 1), jy = rng.uniform(-1, 1);

      Vec3 offset;
      detail::Receptacle* host = nullptr;
      bool into_interior = false;
      const bool can_host = cls.family != ShapeFamily::Container;
      if (can_host && mode < cfg.p_inside) {
        for (auto& r : receptacles) {
          if (!r.interior || r.interior_used) continue;
          const Vec3 ih = r.interior->half_extents();
          const double room_xy = std::min(ih.x(), ih.y()) - proto.footprint - cfg.clearance;
          if (room_xy < 0 || proto.height + cfg.clearance > 2 * ih.z()) continue;
          const Vec3 ic = r.interior->center();
          offset = {ic.x() + jx * room_xy, ic.y() + jy * room_xy, r.interior->lower.z() + cfg.clearance / 2};
          host = &r;
          into_interior = true;
          break;
        }
      } else if (can_host && mode < cfg.p_inside + cfg.p_on_top) {
        for (auto& r : receptacles) {
          if (r.top_used) continue;
          const double slack = r.top_half - proto.footprint;
          if (slack < 0) continue;
          offset = {r.top_center.x() + jx * slack, r.top_center.y() + jy * slack,
                    r.top_center.z() + cfg.clearance / 2};
          if (offset.z() + proto.height > cfg.room.upper.z()) continue;
          host = &r;
          break;
        }
      }
      if (!host) {
        const double lo_x = cfg.room.lower.x() + proto.footprint, hi_x = cfg.room.upper.x() - proto.footprint;
        const double lo_y = cfg.room.lower.y() + proto.footprint, hi_y = cfg.room.upper.y() - proto.footprint;
        if (lo_x > hi_x || lo_y > hi_y || proto.height > cfg.room.upper.z() - cfg.room.lower.z()) continue;
        offset = {lo_x + 0.5 * (jx + 1) * (hi_x - lo_x), lo_y + 0.5 * (jy + 1) * (hi_y - lo_y),
                  cfg.room.lower.z()};
        bool clear = true;
        for (const auto& f : floor) {
          const double dxy = std::hypot(f.center.x() - offset.x(), f.center.y() - offset.y());
          if (dxy < f.footprint + proto.footprint + cfg.clearance) {
            clear = false;
            break;
          }
        }
        if (!clear) continue;
      }

      SceneObject obj;
      obj.id = i;
      obj.class_label = cls.label;
      obj.synonyms = cls.synonyms;
      for (const auto& prim : proto.primitives) obj.primitives.push_back(detail::translated(prim, offset));
      if (proto.interior) obj.inside_region = Aabb{proto.interior->lower + offset, proto.interior->upper + offset};
      const Vec3 top_center = offset + Vec3(0, 0, proto.height);
      if (proto.flat_top) {
        const Vec3 half{proto.top_half, proto.top_half, 0};
        Aabb region{top_center - half, top_center + half};
        region.upper.z() = std::min(top_center.z() + cfg.region_height, cfg.room.upper.z());
        obj.on_top_region = region;
      }
      if (host) {
        (into_interior ? host->interior_used : host->top_used) = true;
      } else {
        floor.push_back({offset, proto.footprint});
      }
      // Only floor-standing objects host others, so stacks stay one level deep.
      if (!host && (proto.flat_top || proto.interior))
        receptacles.push_back({static_cast<int>(scene.objects.size()), top_center, proto.top_half,
                               obj.inside_region});
      scene.objects.push_back(std::move(obj));
      placed = true;
    }
    if (!placed)
      throw GenerationError("generate_scene: could not place object " + std::to_string(i) + " after " +
                            std::to_string(cfg.max_retries) + " attempts");
  }
  scene.validate();
  return scene;
}

// ---------------------------------------------------------------------------
// Rendering

struct InstanceMask {
  static constexpr std::int32_t kBackground = -1;
  int width = 0, height = 0;
  std::vector<std::int32_t> ids;

  InstanceMask() = default;
  InstanceMask(int w, int h) : width(w), height(h), ids(static_cast<std::size_t>(w) * h, kBackground) {}

  std::int32_t& at(int u, int v) { return ids[static_cast<std::size_t>(v) * width + u]; }
  std::int32_t at(int u, int v) const { return ids[static_cast<std::size_t>(v) * width + u]; }

  std::size_t pixel_count(std::int32_t id) const {
    return static_cast<std::size_t>(std::count(ids.begin(), ids.end(), id));
  }
  std::set<int> visible_ids() const {
    std::set<int> out;
    for (auto id : ids)
      if (id != kBackground) out.insert(id);
    return out;
  }
};

inline std::string encode_instance_mask(const InstanceMask& m) {
  io::ByteWriter w;
  w.magic("IMSK");
  w.u32(static_cast<std::uint32_t>(m.width));
  w.u32(static_cast<std::uint32_t>(m.height));
  w.i32s(m.ids);
  return w.take();
}

inline InstanceMask decode_instance_mask(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("IMSK");
  const auto w = r.u32(), h = r.u32();
  if (static_cast<std::uint64_t>(w) * h * 4 != r.remaining())
    throw FormatError("IMSK payload size does not match dimensions", r.offset());
  InstanceMask m(static_cast<int>(w), static_cast<int>(h));
  r.i32s(m.ids);
  return m;
}

struct RenderOutput {
  DepthImage depth;
  InstanceMask mask;
};

/// Ray casts every pixel against every primitive. Objects listed in
/// `excluded_ids` are not drawn (used to hide VOOL targets from view).
inline RenderOutput render_depth(const Scene& scene, const CameraIntrinsics& intr, const CameraPose& pose,
                                 std::span<const int> excluded_ids = {}) {
  intr.validate();
  pose.validate();
  RenderOutput out{DepthImage(intr.width, intr.height), InstanceMask(intr.width, intr.height)};
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 dir = pose.rotation * Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      int best_id = InstanceMask::kBackground;
      for (const auto& obj : scene.objects) {
        if (std::find(excluded_ids.begin(), excluded_ids.end(), obj.id) != excluded_ids.end()) continue;
        for (const auto& prim : obj.primitives) {
          if (auto s = ray_hit(prim, pose.translation, dir); s && *s < best) {
            best = *s;
            best_id = obj.id;
          }
        }
      }
      if (best_id != InstanceMask::kBackground) {
        out.depth.at(u, v) = static_cast<float>(best);  // dir has unit camera-z, so s is z-depth
        out.mask.at(u, v) = best_id;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth

/// True where a probe sphere of `probe_radius` at the point touches any
/// primitive of an object matching `class_label` (or one of its synonyms).
inline std::vector<std::uint8_t> occupancy_query(const Scene& scene, std::string_view class_label,
                                                 std::span<const Vec3> points, double probe_radius) {
  SEMABS_EXPECT(probe_radius >= 0, "occupancy_query: probe_radius must be >= 0");
  std::vector<const SceneObject*> matching;
  std::vector<Aabb> reach;
  for (const auto& o : scene.objects) {
    if (!o.matches(class_label)) continue;
    matching.push_back(&o);
    Aabb b = o.bounds();
    b.lower.array() -= probe_radius;
    b.upper.array() += probe_radius;
    reach.push_back(b);
  }
  std::vector<std::uint8_t> out(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < matching.size(); ++k) {
      if (!reach[k].contains(points[i])) continue;
      if (matching[k]->sdf(points[i]) <= probe_radius) {
        out[i] = 1;
        break;
      }
    }
  }
  return out;
}

inline OccupancyGrid occupancy_grid(const Scene& scene, std::string_view class_label, const GridSpec& spec,
                                    std::optional<double> probe_radius = std::nullopt) {
  const auto centers = spec.centers();
  OccupancyGrid g(spec);
  g.data = occupancy_query(scene, class_label, centers, probe_radius.value_or(0.5 * spec.min_edge()));
  return g;
}

struct RelationConfig {
  double kappa = 0.5;                       // gap tolerance relative to r_target + r_ref
  double cone_half_angle = std::numbers::pi / 4;
  double default_target_radius = 0.15;      // used when the target class is absent
  std::optional<std::set<int>> visible_ids;  // reference instances allowed; all when unset
};

/// Horizontal, unit view-centric direction for a directional relation.
inline Vec3 view_direction(const CameraPose& pose, SpatialRelation rel) {
  Vec3 right = pose.rotation.col(0), forward = pose.rotation.col(2);
  right.z() = 0;
  forward.z() = 0;
  right.normalize();
  forward.normalize();
  switch (rel) {
    case SpatialRelation::LeftOf: return -right;
    case SpatialRelation::RightOf: return right;
    case SpatialRelation::InFrontOf: return -forward;
    case SpatialRelation::Behind: return forward;
    default: throw ContractViolation("view_direction: not a directional relation");
  }
}

inline bool is_directional(SpatialRelation r) {
  return r != SpatialRelation::OnTopOf && r != SpatialRelation::Inside;
}

/// Mean bounding radius of the target class's instances in the scene.
inline double target_class_radius(const Scene& scene, std::string_view target_label, double fallback) {
  double sum = 0;
  int n = 0;
  for (const auto& o : scene.objects) {
    if (!o.matches(target_label)) continue;
    sum += o.bounding_radius();
    ++n;
  }
  return n ? sum / n : fallback;
}

/// Points consistent with the description: the union, over every visible
/// reference instance, of its receptacle region (OnTopOf / Inside) or of a
/// view-centric cone capped by a size-relative gap (directional relations).
inline std::vector<std::uint8_t> label_spatial_relation(const Scene& scene, const CameraPose& pose,
                                                        const Description& desc,
                                                        std::span<const Vec3> points,
                                                        const RelationConfig& cfg = {}) {
  std::vector<std::uint8_t> out(points.size(), 0);
  const bool directional = is_directional(desc.relation);
  const Vec3 dir = directional ? view_direction(pose, desc.relation) : Vec3::Zero();
  const double cos_min = std::cos(cfg.cone_half_angle);
  const double r_t = target_class_radius(scene, desc.target_label, cfg.default_target_radius);
  for (const auto& ref : scene.objects) {
    if (!ref.matches(desc.ref_label)) continue;
    if (cfg.visible_ids && !cfg.visible_ids->contains(ref.id)) continue;
    if (!directional) {
      const auto& region = desc.relation == SpatialRelation::Inside ? ref.inside_region : ref.on_top_region;
      if (!region) continue;
      for (std::size_t i = 0; i < points.size(); ++i)
        if (region->contains(points[i])) out[i] = 1;
      continue;
    }
    const Vec3 c = ref.centroid();
    const double reach = r_t + ref.bounding_radius();
    const double max_dist = (1.0 + cfg.kappa) * reach;  // gap <= kappa * reach
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 d = points[i] - c;
      const double len = d.norm();
      if (len == 0.0 || len > max_dist) continue;
      if (d.dot(dir) >= cos_min * len) out[i] = 1;
    }
  }
  return out;
}

struct GeneratedDescription {
  Description desc;
  OccupancyGrid positives;
  int target_id = -1;
  bool target_hidden = false;
};

struct DescriptionConfig {
  GridSpec eval_spec = GridSpec::cube(32);
  RelationConfig relation;    // visible_ids restricts references (and marks hidden targets)
  double hidden_fraction = 0.3;  // share of draws taken from hidden-target candidates
};

/// Samples k truthful descriptions: each names a real target instance that
/// satisfies the relation with some visible reference of another class.
/// Relations are drawn uniformly among those with candidates, which keeps
/// rare relations (Inside, OnTopOf) represented.
inline std::vector<GeneratedDescription> generate_descriptions(const Scene& scene, const CameraPose& pose,
                                                               SeededRng& rng, int k,
                                                               const DescriptionConfig& cfg = {}) {
  SEMABS_EXPECT(k >= 1, "generate_descriptions: k must be >= 1");
  const auto centers = cfg.eval_spec.centers();
  struct Candidate {
    Description desc;
    int target_id;
    bool hidden;
  };
  std::array<std::vector<Candidate>, 6> by_relation;
  std::array<std::vector<Candidate>, 6> hidden_by_relation;
  const auto visible = [&](int id) { return !cfg.relation.visible_ids || cfg.relation.visible_ids->contains(id); };

  for (const auto& target : scene.objects) {
    const Vec3 tc = target.centroid();
    const std::array<Vec3, 1> probe{tc};
    std::set<std::string> ref_classes;
    for (const auto& ref : scene.objects)
      if (ref.class_label != target.class_label && visible(ref.id)) ref_classes.insert(ref.class_label);
    for (const auto& ref_label : ref_classes) {
      for (std::size_t r = 0; r < kAllRelations.size(); ++r) {
        Description d{target.class_label, kAllRelations[r], ref_label};
        if (!label_spatial_relation(scene, pose, d, probe, cfg.relation)[0]) continue;
        const bool hidden = !visible(target.id);
        (hidden ? hidden_by_relation : by_relation)[r].push_back({d, target.id, hidden});
      }
    }
  }

  const auto pick = [&](std::array<std::vector<Candidate>, 6>& pool) -> std::optional<Candidate> {
    std::vector<std::size_t> live;
    for (std::size_t r = 0; r < pool.size(); ++r)
      if (!pool[r].empty()) live.push_back(r);
    if (live.empty()) return std::nullopt;
    auto& bucket = pool[live[rng.below(live.size())]];
    return bucket[rng.below(bucket.size())];
  };

  std::vector<GeneratedDescription> out;
  int failures = 0;
  while (static_cast<int>(out.size()) < k) {
    std::optional<Candidate> c;
    if (rng.bernoulli(cfg.hidden_fraction)) c = pick(hidden_by_relation);
    if (!c) c = pick(by_relation);
    if (!c) c = pick(hidden_by_relation);
    if (!c) throw GenerationError("generate_descriptions: scene has no valid relation");
    GeneratedDescription g;
    g.desc = c->desc;
    g.target_id = c->target_id;
    g.target_hidden = c->hidden;
    g.positives = OccupancyGrid(cfg.eval_spec);
    g.positives.data = label_spatial_relation(scene, pose, g.desc, centers, cfg.relation);
    if (g.positives.count() == 0) {
      // the target's own centroid satisfied the rule but no lattice point does
      if (++failures > 64 * k) throw GenerationError("generate_descriptions: no description has positives");
      continue;
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Views

struct ViewConfig {
  CameraIntrinsics intrinsics = CameraIntrinsics::from_fov(96, 96, 70.0 * std::numbers::pi / 180.0);
  Vec3 eye{0.0, -2.4, 1.45};
  Vec3 target{0.0, 0.0, 0.35};
  double eye_jitter = 0.1;                             // meters, per axis
  double yaw_jitter = 10.0 * std::numbers::pi / 180.0;  // about the target's vertical axis
};

inline CameraPose sample_view_pose(SeededRng& rng, const ViewConfig& cfg) {
  const double yaw = rng.uniform(-1, 1) * cfg.yaw_jitter;
  Vec3 eye = cfg.eye;
  for (int a = 0; a < 3; ++a) eye[a] += rng.uniform(-1, 1) * cfg.eye_jitter;
  eye = cfg.target + yaw_rotation(yaw) * (eye - cfg.target);
  return CameraPose::look_at(eye, cfg.target);
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
inline nlohmann::json aabb_json(const std::optional<Aabb>& b) {
  if (!b) return nullptr;
  return {{"lower", vec_json(b->lower)}, {"upper", vec_json(b->upper)}};
}
inline std::optional<Aabb> json_aabb(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return Aabb{json_vec(j.at("lower")), json_vec(j.at("upper"))};
}

}  // namespace detail

inline nlohmann::json scene_to_json(const Scene& scene) {
  using nlohmann::json;
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json prims = json::array();
    for (const auto& p : o.primitives) {
      if (const auto* s = std::get_if<Sphere>(&p)) {
        prims.push_back({{"type", "sphere"}, {"center", detail::vec_json(s->center)}, {"radius", s->radius}});
      } else {
        const auto& b = std::get<Box>(p);
        json rot = json::array();
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) rot.push_back(b.pose.rotation(r, c));
        prims.push_back({{"type", "box"},
                         {"rotation", rot},
                         {"translation", detail::vec_json(b.pose.translation)},
                         {"half_extents", detail::vec_json(b.half_extents)}});
      }
    }
    objects.push_back({{"id", o.id},
                       {"class", o.class_label},
                       {"synonyms", o.synonyms},
                       {"primitives", prims},
                       {"on_top_region", detail::aabb_json(o.on_top_region)},
                       {"inside_region", detail::aabb_json(o.inside_region)}});
  }
  return {{"room", detail::aabb_json(scene.room)}, {"objects", objects}, {"split_tag", to_string(scene.split_tag)}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene scene;
    scene.room = *detail::json_aabb(j.at("room"));
    scene.split_tag = parse_split_tag(j.at("split_tag").get<std::string>());
    for (const auto& jo : j.at("objects")) {
      SceneObject o;
      o.id = jo.at("id").get<int>();
      o.class_label = jo.at("class").get<std::string>();
      o.synonyms = jo.at("synonyms").get<std::vector<std::string>>();
      for (const auto& jp : jo.at("primitives")) {
        const auto type = jp.at("type").get<std::string>();
        if (type == "sphere") {
          o.primitives.push_back(Sphere{detail::json_vec(jp.at("center")), jp.at("radius").get<double>()});
        } else if (type == "box") {
          Box b;
          const auto& rot = jp.at("rotation");
          if (rot.size() != 9) throw ConfigError("box rotation must have 9 entries");
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) b.pose.rotation(r, c) = rot[r * 3 + c].get<double>();
          b.pose.translation = detail::json_vec(jp.at("translation"));
          b.half_extents = detail::json_vec(jp.at("half_extents"));
          o.primitives.push_back(b);
        } else {
          throw ConfigError("unknown primitive type: " + type);
        }
      }
      o.on_top_region = detail::json_aabb(jo.at("on_top_region"));
      o.inside_region = detail::json_aabb(jo.at("inside_region"));
      scene.objects.push_back(std::move(o));
    }
    scene.validate();
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scene document: ") + e.what());
  }
}

}  // namespace semabs
