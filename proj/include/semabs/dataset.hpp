// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// One synthetic observation per scene: the scene, a camera, the rendered
// depth and instance mask, and a pool of truthful VOOL descriptions. Also the
// on-disk layout used by the command-line tools.

#pragma once

#include "semabs/relevancy.hpp"
#include "semabs/scene.hpp"
#include "semabs/voxel.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace semabs {

struct ViewRecord {
  std::string id;
  Scene scene;
  CameraIntrinsics intrinsics;
  CameraPose pose;
  DepthImage depth;
  InstanceMask mask;
  std::uint64_t noise_seed = 0;
  std::vector<int> hidden_ids;  // objects removed from the rendering
  std::vector<GeneratedDescription> descriptions;

  ViewInput input() const { return {id, intrinsics.width, intrinsics.height, &scene, &mask, noise_seed}; }

  /// Relation config whose references are restricted to what the camera sees.
  RelationConfig relation_config(RelationConfig base = {}) const {
    base.visible_ids = mask.visible_ids();
    return base;
  }
};

struct DatasetConfig {
  SceneConfig scene;
  ViewConfig view;
  DescriptionConfig descriptions;
  int descriptions_per_view = 6;
  double hide_probability = 0.5;  // chance one object is left out of the rendering
  int max_attempts = 32;
};

namespace detail {

/// True if some other object rests on or inside `host`.
inline bool hosts_another(const Scene& scene, const SceneObject& host) {
  for (const auto& o : scene.objects) {
    if (o.id == host.id) continue;
    const Vec3 c = o.centroid();
    if ((host.inside_region && host.inside_region->contains(c)) ||
        (host.on_top_region && host.on_top_region->contains(c)))
      return true;
  }
  return false;
}

}  // namespace detail

/// Deterministic in (seed, cfg). Scenes that admit no valid description are
/// regenerated from the same stream.
inline ViewRecord make_view_record(std::string id, std::uint64_t seed, const DatasetConfig& cfg) {
  SeededRng rng(seed);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    ViewRecord rec;
    rec.id = id;
    rec.scene = generate_scene(rng, cfg.scene);
    rec.intrinsics = cfg.view.intrinsics;
    rec.pose = sample_view_pose(rng, cfg.view);
    if (rng.bernoulli(cfg.hide_probability)) {
      std::vector<int> candidates;
      for (const auto& o : rec.scene.objects)
        if (!detail::hosts_another(rec.scene, o)) candidates.push_back(o.id);
      if (!candidates.empty()) rec.hidden_ids.push_back(candidates[rng.below(candidates.size())]);
    }
    auto rendered = render_depth(rec.scene, rec.intrinsics, rec.pose, rec.hidden_ids);
    rec.depth = std::move(rendered.depth);
    rec.mask = std::move(rendered.mask);
    rec.noise_seed = rng.next_u64();
    if (rec.mask.visible_ids().empty()) continue;
    DescriptionConfig dcfg = cfg.descriptions;
    dcfg.relation = rec.relation_config(dcfg.relation);
    try {
      rec.descriptions = generate_descriptions(rec.scene, rec.pose, rng, cfg.descriptions_per_view, dcfg);
    } catch (const GenerationError&) {
      continue;
    }
    return rec;
  }
  throw GenerationError("make_view_record: no usable scene for " + id);
}

inline std::string view_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%05d", index);
  return buf;
}

/// count views with ids view_{first}.. and per-view seeds derived from `seed`.
inline std::vector<ViewRecord> generate_dataset(int count, std::uint64_t seed, const DatasetConfig& cfg,
                                                int first = 0) {
  SEMABS_EXPECT(count >= 0, "generate_dataset: count must be >= 0");
  std::vector<ViewRecord> out;
  out.reserve(count);
  for (int i = first; i < first + count; ++i)
    out.push_back(make_view_record(view_id(i), SeededRng::mix(seed ^ SeededRng::mix(i)), cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Disk layout: <root>/<id>/{scene.json, view.json, depth.dpth, mask.imsk,
// occupancy/<class>.fvol, relations/<k>.fvol}

namespace detail {

inline nlohmann::json pose_json(const CameraPose& p) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
  return {{"rotation", rot}, {"translation", vec_json(p.translation)}};
}

inline CameraPose json_pose(const nlohmann::json& j) {
  CameraPose p;
  const auto& rot = j.at("rotation");
  if (rot.size() != 9) throw ConfigError("pose rotation must have 9 entries");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[r * 3 + c].get<double>();
  p.translation = json_vec(j.at("translation"));
  p.validate();
  return p;
}

inline FeatureVolume occupancy_volume(const OccupancyGrid& g) {
  FeatureVolume v(g.spec, 1);
  for (std::size_t i = 0; i < g.data.size(); ++i) v.data[i] = g.data[i] ? 1.0f : 0.0f;
  return v;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  io::write_file_atomic(path, text);
}

}  // namespace detail

inline nlohmann::json view_to_json(const ViewRecord& rec) {
  nlohmann::json descs = nlohmann::json::array();
  for (const auto& d : rec.descriptions)
    descs.push_back({{"target", d.desc.target_label},
                     {"relation", to_string(d.desc.relation)},
                     {"reference", d.desc.ref_label},
                     {"target_id", d.target_id},
                     {"target_hidden", d.target_hidden}});
  const auto& k = rec.intrinsics;
  return {{"id", rec.id},
          {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width},
                          {"height", k.height}}},
          {"pose", detail::pose_json(rec.pose)},
          {"noise_seed", rec.noise_seed},
          {"hidden_ids", rec.hidden_ids},
          {"descriptions", descs}};
}

/// Writes every file of one view into <root>/<id>/ (each file atomically).
inline void write_view_record(const std::filesystem::path& root, const ViewRecord& rec,
                              const GridSpec& eval_spec = GridSpec::cube(32)) {
  const auto dir = root / rec.id;
  detail::write_text_atomic(dir / "scene.json", scene_to_json(rec.scene).dump(2) + "\n");
  detail::write_text_atomic(dir / "view.json", view_to_json(rec).dump(2) + "\n");
  write_depth(dir / "depth.dpth", rec.depth);
  io::write_file_atomic(dir / "mask.imsk", encode_instance_mask(rec.mask));
  for (const auto& label : rec.scene.class_labels())
    write_volume(dir / "occupancy" / (label + ".fvol"), detail::occupancy_volume(occupancy_grid(rec.scene, label, eval_spec)));
  for (std::size_t k = 0; k < rec.descriptions.size(); ++k)
    write_volume(dir / "relations" / (std::to_string(k) + ".fvol"),
                 detail::occupancy_volume(rec.descriptions[k].positives));
}

/// Reads a view written by write_view_record. Relation positives are taken
/// from the stored volumes.
inline ViewRecord read_view_record(const std::filesystem::path& dir) {
  ViewRecord rec;
  try {
    rec.scene = scene_from_json(nlohmann::json::parse(io::read_file(dir / "scene.json")));
    const auto j = nlohmann::json::parse(io::read_file(dir / "view.json"));
    rec.id = j.at("id").get<std::string>();
    const auto& k = j.at("intrinsics");
    rec.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                      k.at("cy").get<double>(), k.at("width").get<int>(), k.at("height").get<int>()};
    rec.intrinsics.validate();
    rec.pose = detail::json_pose(j.at("pose"));
    rec.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    rec.hidden_ids = j.at("hidden_ids").get<std::vector<int>>();
    rec.depth = read_depth(dir / "depth.dpth");
    rec.mask = decode_instance_mask(io::read_file(dir / "mask.imsk"));
    const auto& descs = j.at("descriptions");
    for (std::size_t i = 0; i < descs.size(); ++i) {
      const auto& d = descs[i];
      GeneratedDescription g;
      g.desc = {d.at("target").get<std::string>(), parse_relation(d.at("relation").get<std::string>()),
                d.at("reference").get<std::string>()};
      g.target_id = d.at("target_id").get<int>();
      g.target_hidden = d.at("target_hidden").get<bool>();
      const auto vol = read_volume(dir / "relations" / (std::to_string(i) + ".fvol"));
      g.positives = OccupancyGrid(vol.spec);
      for (std::size_t v = 0; v < vol.voxels(); ++v) g.positives.data[v] = vol.data[v] > 0.5f;
      rec.descriptions.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed view document in " + dir.string() + ": " + e.what());
  }
  if (rec.depth.width != rec.intrinsics.width || rec.depth.height != rec.intrinsics.height ||
      rec.mask.width != rec.intrinsics.width || rec.mask.height != rec.intrinsics.height)
    throw ConfigError("view " + rec.id + ": image sizes do not match intrinsics");
  return rec;
}

/// All view directories under root, in lexicographic id order.
inline std::vector<ViewRecord> read_dataset(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw ConfigError("dataset directory not found: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "view.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<ViewRecord> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(read_view_record(d));
  return out;
}

}  // namespace semabs
