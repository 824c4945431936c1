// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Inference pipelines. OVSSC runs the 3D module once per label and takes a
// per-voxel argmax; VOOL encodes the target and reference relevancy volumes
// and scores their concatenated features against a relation embedding.

#pragma once

#include "semabs/checkpoint.hpp"
#include "semabs/relevancy.hpp"
#include "semabs/voxel.hpp"

#include <fstream>
#include <stdexcept>

namespace semabs {

inline constexpr double kDefaultThreshold = 0.5;

struct Model {
  UNetConfig unet;
  GridSpec grid;
  Params<float> params;

  static Model from(const Checkpoint& ck) { return {ck.unet, ck.grid, ck.params}; }
};

/// One RGB-D observation as the pipelines see it.
struct Observation {
  const DepthImage* depth = nullptr;
  CameraIntrinsics intrinsics;
  CameraPose pose;
  ViewInput view;
};

struct OvsscResult {
  std::vector<FeatureVolume> per_class_prob;
  SemanticGrid semantic;
};

struct VoolResult {
  FeatureVolume prob;
  OccupancyGrid occupancy;
};

/// project -> filter -> scatter_max.
inline FeatureVolume relevancy_volume(const RelevancyMap& map, const Observation& obs, const GridSpec& grid) {
  return scatter_max<float>(filter_bounds(project_relevancy(map, *obs.depth, obs.intrinsics, obs.pose), grid), grid);
}

namespace detail {

inline std::vector<RelevancyMap> fetch(const RelevancyProvider& provider, const Observation& obs,
                                       std::span<const std::string> labels) {
  try {
    auto maps = provider.relevancy(obs.view, labels);
    if (maps.size() != labels.size()) throw std::runtime_error("provider returned wrong number of maps");
    return maps;
  } catch (const std::exception& e) {
    std::string joined;
    for (const auto& l : labels) joined += (joined.empty() ? "" : ", ") + l;
    throw std::runtime_error("relevancy provider failed for view '" + obs.view.view_id + "' labels [" + joined +
                             "]: " + e.what());
  }
}

inline FeatureVolume to_volume(const GridSpec& spec, const std::vector<float>& values) {
  FeatureVolume v(spec, 1);
  v.data = values;
  return v;
}

}  // namespace detail

/// Occupancy probabilities of one relevancy volume at arbitrary points.
inline std::vector<float> occupancy_at(const FeatureVolume& rvox, const Model& model, std::span<const Vec3> points) {
  const auto z = encode(rvox, model.params, model.unet);
  return decode_occupancy<float>(trilinear_sample(z, points), model.params);
}

inline OvsscResult ovssc_infer(const Observation& obs, std::span<const std::string> labels,
                               const RelevancyProvider& provider, const Model& model, const GridSpec& eval_spec,
                               double threshold = kDefaultThreshold) {
  SEMABS_EXPECT(!labels.empty(), "ovssc_infer: need at least one label");
  const auto maps = detail::fetch(provider, obs, labels);
  const auto queries = eval_spec.centers();
  OvsscResult out;
  for (const auto& map : maps)
    out.per_class_prob.push_back(
        detail::to_volume(eval_spec, occupancy_at(relevancy_volume(map, obs, model.grid), model, queries)));
  out.semantic = semantic_argmax(out.per_class_prob, threshold);
  return out;
}

/// Raw relation logits at points for a (target, reference) volume pair.
inline std::vector<float> relation_logits(const FeatureVolume& target_vox, const FeatureVolume& ref_vox,
                                          SpatialRelation rel, const Model& model, std::span<const Vec3> points) {
  const auto zt = encode(target_vox, model.params, model.unet);
  const auto zr = encode(ref_vox, model.params, model.unet);
  const auto ft = trilinear_sample(zt, points);
  const auto fr = trilinear_sample(zr, points);
  return spatial_similarity<float>(concat_features<float>(ft, fr, model.unet.out_channels), rel, model.params);
}

inline VoolResult vool_infer(const Observation& obs, const Description& desc, const RelevancyProvider& provider,
                             const Model& model, const GridSpec& eval_spec, double threshold = kDefaultThreshold) {
  const std::array<std::string, 2> labels{desc.target_label, desc.ref_label};
  const auto maps = detail::fetch(provider, obs, labels);
  const auto queries = eval_spec.centers();
  auto logits = relation_logits(relevancy_volume(maps[0], obs, model.grid), relevancy_volume(maps[1], obs, model.grid),
                                desc.relation, model, queries);
  for (auto& v : logits) v = logistic(v);
  VoolResult out;
  out.prob = detail::to_volume(eval_spec, logits);
  out.occupancy = threshold_volume(out.prob, threshold);
  return out;
}

// ---------------------------------------------------------------------------
// PLY export

/// ASCII PLY with float x, y, z and a scalar "quality" per vertex.
inline std::string ply_text(std::span<const Vec3> points, std::span<const float> quality) {
  SEMABS_EXPECT(points.size() == quality.size(), "ply: points and quality differ in length");
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\nelement vertex " << points.size()
     << "\nproperty float x\nproperty float y\nproperty float z\nproperty float quality\nend_header\n";
  os.precision(9);
  for (std::size_t i = 0; i < points.size(); ++i)
    os << static_cast<float>(points[i].x()) << ' ' << static_cast<float>(points[i].y()) << ' '
       << static_cast<float>(points[i].z()) << ' ' << quality[i] << '\n';
  return os.str();
}

/// Voxel centres whose probability reaches the threshold.
inline std::string ply_from_volume(const FeatureVolume& prob, double threshold) {
  SEMABS_EXPECT(prob.channels == 1, "ply_from_volume: expects one channel");
  const auto centers = prob.spec.centers();
  std::vector<Vec3> pts;
  std::vector<float> q;
  for (std::size_t v = 0; v < centers.size(); ++v)
    if (prob.data[v] >= threshold) {
      pts.push_back(centers[v]);
      q.push_back(prob.data[v]);
    }
  return ply_text(pts, q);
}

/// Non-empty voxels of a semantic grid; quality is the winning probability.
inline std::string ply_from_semantic(const OvsscResult& r) {
  const auto centers = r.semantic.spec.centers();
  std::vector<Vec3> pts;
  std::vector<float> q;
  for (std::size_t v = 0; v < centers.size(); ++v) {
    const auto k = r.semantic.data[v];
    if (k == SemanticGrid::kEmpty) continue;
    pts.push_back(centers[v]);
    q.push_back(r.per_class_prob[k].data[v]);
  }
  return ply_text(pts, q);
}

}  // namespace semabs
