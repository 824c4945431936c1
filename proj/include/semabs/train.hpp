// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Batch sampling, BCE loss and the OVSSC / VOOL training loops.
//
// Randomness: the epoch permutation is a pure function of (seed, epoch); all
// per-batch draws come from a master stream that is stored in checkpoints.
// Together with the step counter this makes resumed runs bit-identical to
// uninterrupted ones.

#pragma once

#include "semabs/checkpoint.hpp"
#include "semabs/dataset.hpp"
#include "semabs/parallel.hpp"
#include "semabs/tasks.hpp"

#include <chrono>
#include <functional>
#include <nlohmann/json.hpp>

namespace semabs {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { Ovssc, Vool };

inline std::string to_string(Task t) { return t == Task::Ovssc ? "ovssc" : "vool"; }
inline Task parse_task(std::string_view s) {
  if (s == "ovssc") return Task::Ovssc;
  if (s == "vool") return Task::Vool;
  throw ConfigError("unknown task: " + std::string(s) + " (expected ovssc or vool)");
}

struct TrainConfig {
  Task task = Task::Ovssc;
  int batch_scenes = 2;   // B
  int per_scene = 3;      // K: classes (OVSSC) or descriptions (VOOL)
  int cloud_points = 4096;  // N
  int query_points = 8192;  // M
  double near_surface_fraction = 0.5;
  double near_surface_edges = 2.0;
  int epochs = 15;
  std::uint64_t seed = 0;
  UNetConfig unet{3, 8, 1, 16};
  GridSpec grid;
  AdamWConfig adam;
  ScheduleConfig schedule{5e-4, 0.0, 0, 2};  // t0 == 0 means one epoch
  AugmentConfig augment;
  double pos_weight = 1.0;
  std::uint64_t checkpoint_every = 0;  // steps; 0 = final only

  /// Desk defaults for a task. VOOL relations are viewer-centric, so its
  /// augmentation keeps yaw fixed.
  static TrainConfig desk(Task task) {
    TrainConfig c;
    c.task = task;
    if (task == Task::Vool) c.augment.yaw_range = 0.0;
    return c;
  }

  void validate() const {
    if (batch_scenes < 1 || per_scene < 1 || cloud_points < 1 || query_points < 1 || epochs < 1)
      throw ConfigError("TrainConfig: counts must be >= 1");
    if (!(near_surface_fraction >= 0 && near_surface_fraction <= 1) || near_surface_edges <= 0)
      throw ConfigError("TrainConfig: bad near-surface sampling parameters");
    if (pos_weight <= 0) throw ConfigError("TrainConfig: pos_weight must be > 0");
    try {
      unet.validate_for(grid);
      adam.validate();
      ScheduleConfig s = schedule;
      if (s.t0 == 0) s.t0 = 1;
      s.validate();
      AugmentConfig a = augment;
      SeededRng probe(0);
      sample_augmentation(probe, a);
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("TrainConfig: ") + e.what());
    }
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"task", to_string(c.task)},
          {"B", c.batch_scenes},
          {"K", c.per_scene},
          {"N", c.cloud_points},
          {"M", c.query_points},
          {"near_surface_fraction", c.near_surface_fraction},
          {"near_surface_edges", c.near_surface_edges},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"unet", {{"levels", c.unet.levels}, {"base_channels", c.unet.base_channels},
                    {"in_channels", c.unet.in_channels}, {"out_channels", c.unet.out_channels}}},
          {"grid", {{"lower", detail::vec_json(c.grid.lower)}, {"upper", detail::vec_json(c.grid.upper)},
                    {"resolution", c.grid.resolution}}},
          {"adamw", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps},
                     {"weight_decay", c.adam.weight_decay}}},
          {"schedule", {{"lr_max", c.schedule.lr_max}, {"lr_min", c.schedule.lr_min}, {"t0", c.schedule.t0},
                        {"mult", c.schedule.mult}}},
          {"augment", {{"translation_range", detail::vec_json(c.augment.translation_range)},
                       {"yaw_range", c.augment.yaw_range}, {"scale_min", c.augment.scale_min},
                       {"scale_max", c.augment.scale_max}}},
          {"pos_weight", c.pos_weight},
          {"checkpoint_every", c.checkpoint_every}};
}

/// Keys absent from `j` keep the values of `base`; unknown keys are errors.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  static const std::set<std::string> known{"task", "B", "K", "N", "M", "near_surface_fraction",
                                           "near_surface_edges", "epochs", "seed", "unet", "grid", "adamw",
                                           "schedule", "augment", "pos_weight", "checkpoint_every"};
  try {
    if (!j.is_object()) throw ConfigError("training config must be an object");
    for (const auto& [k, v] : j.items())
      if (!known.contains(k)) throw ConfigError("unknown training config key: " + k);
    TrainConfig c = base;
    if (j.contains("task")) {
      const Task t = parse_task(j["task"].get<std::string>());
      if (t != c.task) {
        c.task = t;
        c.augment.yaw_range = TrainConfig::desk(t).augment.yaw_range;
      }
    }
    const auto get = [&](const nlohmann::json& o, const char* key, auto& dst) {
      if (o.contains(key)) dst = o[key].get<std::decay_t<decltype(dst)>>();
    };
    get(j, "B", c.batch_scenes);
    get(j, "K", c.per_scene);
    get(j, "N", c.cloud_points);
    get(j, "M", c.query_points);
    get(j, "near_surface_fraction", c.near_surface_fraction);
    get(j, "near_surface_edges", c.near_surface_edges);
    get(j, "epochs", c.epochs);
    get(j, "seed", c.seed);
    get(j, "pos_weight", c.pos_weight);
    get(j, "checkpoint_every", c.checkpoint_every);
    if (j.contains("unet")) {
      const auto& u = j["unet"];
      get(u, "levels", c.unet.levels);
      get(u, "base_channels", c.unet.base_channels);
      get(u, "in_channels", c.unet.in_channels);
      get(u, "out_channels", c.unet.out_channels);
    }
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("lower")) c.grid.lower = detail::json_vec(g["lower"]);
      if (g.contains("upper")) c.grid.upper = detail::json_vec(g["upper"]);
      get(g, "resolution", c.grid.resolution);
    }
    if (j.contains("adamw")) {
      const auto& a = j["adamw"];
      get(a, "beta1", c.adam.beta1);
      get(a, "beta2", c.adam.beta2);
      get(a, "eps", c.adam.eps);
      get(a, "weight_decay", c.adam.weight_decay);
    }
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      get(s, "lr_max", c.schedule.lr_max);
      get(s, "lr_min", c.schedule.lr_min);
      get(s, "t0", c.schedule.t0);
      get(s, "mult", c.schedule.mult);
    }
    if (j.contains("augment")) {
      const auto& a = j["augment"];
      if (a.contains("translation_range")) c.augment.translation_range = detail::json_vec(a["translation_range"]);
      get(a, "yaw_range", c.augment.yaw_range);
      get(a, "scale_min", c.augment.scale_min);
      get(a, "scale_max", c.augment.scale_max);
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Loss

struct BceResult {
  double loss = 0;
  std::vector<double> grad_logits;
};

/// Mean binary cross-entropy of probabilities against boolean targets, with
/// the exact gradient w.r.t. the logits that produced the probabilities.
/// Positive terms are weighted by pos_weight.
template <class T>
BceResult bce_loss(std::span<const T> probs, std::span<const std::uint8_t> targets, double pos_weight = 1.0) {
  SEMABS_EXPECT(probs.size() == targets.size() && !probs.empty(), "bce_loss: size mismatch or empty input");
  BceResult r;
  r.grad_logits.resize(probs.size());
  const double n = static_cast<double>(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    SEMABS_EXPECT(p > 0.0 && p < 1.0, "bce_loss: probabilities must lie strictly inside (0, 1)");
    const double w = targets[i] ? pos_weight : 1.0;
    r.loss -= w * (targets[i] ? std::log(p) : std::log1p(-p));
    r.grad_logits[i] = w * (p - (targets[i] ? 1.0 : 0.0)) / n;
  }
  r.loss /= n;
  return r;
}

/// Same loss evaluated from logits (numerically stable softplus form).
template <class T>
BceResult bce_from_logits(std::span<const T> logits, std::span<const std::uint8_t> targets, double pos_weight = 1.0) {
  SEMABS_EXPECT(logits.size() == targets.size() && !logits.empty(), "bce_loss: size mismatch or empty input");
  BceResult r;
  r.grad_logits.resize(logits.size());
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double w = targets[i] ? pos_weight : 1.0;
    // -log(sigmoid(z)) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    const double s = targets[i] ? -z : z;
    r.loss += w * (std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))));
    r.grad_logits[i] = w * (logistic(z) - (targets[i] ? 1.0 : 0.0)) / n;
  }
  r.loss /= n;
  return r;
}

// ---------------------------------------------------------------------------
// Batches

struct SceneSample {
  std::size_t view = 0;               // index into the dataset
  std::vector<std::string> labels;    // distinct labels to encode
  std::vector<PointCloud> clouds;     // per label: subsampled, augmented, filtered
  std::vector<Description> descriptions;  // VOOL only
  std::vector<std::pair<int, int>> roles;  // VOOL: (target, reference) label indices
  SimilarityTransform transform;
  std::vector<Vec3> queries_world;
  std::vector<Vec3> queries;  // augmented
  std::vector<std::uint8_t> near_surface;
  std::vector<std::vector<std::uint8_t>> targets;  // per label (OVSSC) or per description (VOOL)
};

struct BatchSample {
  std::vector<SceneSample> scenes;
};

/// Uniform subsample to exactly n points. Clouds smaller than n keep every
/// point once and are topped up with draws with replacement.
inline PointCloud subsample(const PointCloud& pc, int n, SeededRng& rng) {
  PointCloud out;
  out.channels = pc.channels;
  if (pc.empty()) return out;
  std::vector<std::size_t> pick;
  pick.reserve(n);
  if (pc.size() >= static_cast<std::size_t>(n)) {
    std::vector<std::size_t> idx(pc.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    pick.assign(idx.begin(), idx.begin() + n);
  } else {
    for (std::size_t i = 0; i < pc.size(); ++i) pick.push_back(i);
    while (pick.size() < static_cast<std::size_t>(n)) pick.push_back(rng.below(pc.size()));
  }
  out.positions.reserve(n);
  out.features.reserve(static_cast<std::size_t>(n) * pc.channels);
  for (auto i : pick) {
    out.positions.push_back(pc.positions[i]);
    for (int c = 0; c < pc.channels; ++c) out.features.push_back(pc.feature(i, c));
  }
  return out;
}

/// M query points: round(M * fraction) within `reach` of some object surface,
/// the rest uniform in the grid bounds. Returns the near-surface flags too.
inline std::pair<std::vector<Vec3>, std::vector<std::uint8_t>> sample_queries(const Scene& scene, const GridSpec& grid,
                                                                            int m, double near_fraction,
                                                                            double reach, SeededRng& rng) {
  const int near = static_cast<int>(std::lround(m * near_fraction));
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> flag;
  pts.reserve(m);
  flag.reserve(m);
  const auto uniform_point = [&] {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(grid.lower[a], grid.upper[a]);
    return p;
  };
  for (int i = 0; i < near; ++i) {
    if (scene.objects.empty()) {
      pts.push_back(uniform_point());
      flag.push_back(0);
      continue;
    }
    const auto& obj = scene.objects[rng.below(scene.objects.size())];
    Aabb box = obj.bounds();
    box.lower.array() -= reach;
    box.upper.array() += reach;
    Vec3 p = obj.centroid();
    for (int tries = 0; tries < 64; ++tries) {
      Vec3 c;
      for (int a = 0; a < 3; ++a) c[a] = rng.uniform(box.lower[a], box.upper[a]);
      if (std::abs(obj.sdf(c)) <= reach) {
        p = c;
        break;
      }
    }
    pts.push_back(p);
    flag.push_back(1);
  }
  for (int i = near; i < m; ++i) {
    pts.push_back(uniform_point());
    flag.push_back(0);
  }
  return {std::move(pts), std::move(flag)};
}

namespace detail {

inline std::vector<std::size_t> choose(std::size_t n, std::size_t k, SeededRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

inline int label_slot(std::vector<std::string>& labels, const std::string& l) {
  auto it = std::find(labels.begin(), labels.end(), l);
  if (it != labels.end()) return static_cast<int>(it - labels.begin());
  labels.push_back(l);
  return static_cast<int>(labels.size() - 1);
}

}  // namespace detail

/// Draws one batch for the given views. OVSSC picks K distinct classes of
/// each scene; VOOL picks K of the view's descriptions.
inline BatchSample sample_batch(std::span<const ViewRecord> dataset, std::span<const std::size_t> views,
                                const TrainConfig& cfg, const RelevancyProvider& provider, SeededRng& rng) {
  SEMABS_EXPECT(!dataset.empty(), "sample_batch: empty dataset");
  BatchSample batch;
  for (const auto vi : views) {
    SEMABS_EXPECT(vi < dataset.size(), "sample_batch: view index out of range");
    const auto& rec = dataset[vi];
    SceneSample s;
    s.view = vi;
    if (cfg.task == Task::Ovssc) {
      const auto classes = rec.scene.class_labels();
      for (auto k : detail::choose(classes.size(), cfg.per_scene, rng)) s.labels.push_back(classes[k]);
    } else {
      for (auto k : detail::choose(rec.descriptions.size(), cfg.per_scene, rng)) {
        const auto& d = rec.descriptions[k].desc;
        s.descriptions.push_back(d);
        s.roles.emplace_back(detail::label_slot(s.labels, d.target_label), detail::label_slot(s.labels, d.ref_label));
      }
    }
    s.transform = sample_augmentation(rng, cfg.augment);
    std::tie(s.queries_world, s.near_surface) =
        sample_queries(rec.scene, cfg.grid, cfg.query_points, cfg.near_surface_fraction,
                       cfg.near_surface_edges * cfg.grid.min_edge(), rng);
    s.queries = apply_transform(s.queries_world, s.transform);

    const Observation obs{&rec.depth, rec.intrinsics, rec.pose, rec.input()};
    const auto maps = detail::fetch(provider, obs, s.labels);
    for (const auto& map : maps) {
      const auto cloud = subsample(project_relevancy(map, rec.depth, rec.intrinsics, rec.pose), cfg.cloud_points, rng);
      s.clouds.push_back(filter_bounds(apply_transform(cloud, s.transform), cfg.grid));
    }
    if (cfg.task == Task::Ovssc) {
      for (const auto& l : s.labels)
        s.targets.push_back(occupancy_query(rec.scene, l, s.queries_world, 0.5 * cfg.grid.min_edge()));
    } else {
      const auto rel_cfg = rec.relation_config();
      for (const auto& d : s.descriptions)
        s.targets.push_back(label_spatial_relation(rec.scene, rec.pose, d, s.queries_world, rel_cfg));
    }
    batch.scenes.push_back(std::move(s));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Loss and gradient for one batch

namespace detail {

/// Loss and gradient of one OVSSC (scene, label) term, already scaled.
inline double ovssc_term(const SceneSample& s, std::size_t k, const Params<float>& params, const TrainConfig& cfg,
                         double scale, Params<float>& grads) {
  EncodeTape<float> tape;
  const auto z = encode(scatter_max<float>(s.clouds[k], cfg.grid), params, cfg.unet, &tape);
  const auto feats = trilinear_sample(z, s.queries);
  DecodeCache<float> cache;
  const auto logits = decode_logits<float>(feats, params, &cache);
  const auto bce = bce_from_logits<float>(logits, s.targets[k], cfg.pos_weight);
  std::vector<float> dlog(logits.size());
  for (std::size_t i = 0; i < dlog.size(); ++i) dlog[i] = static_cast<float>(bce.grad_logits[i] * scale);
  const auto dfeat = decode_backward<float>(feats, dlog, params, cache, grads);
  BasicFeatureVolume<float> dz(z.spec, z.channels);
  trilinear_sample_backward<float>(s.queries, dfeat, dz);
  encode_backward(dz, params, cfg.unet, tape, grads);
  return bce.loss * scale;
}

/// All VOOL terms of one scene: every distinct label is encoded once and dZ
/// is accumulated over the descriptions that use it.
inline double vool_scene(const SceneSample& s, const Params<float>& params, const TrainConfig& cfg, double scale,
                         Params<float>& grads) {
  const int D = cfg.unet.out_channels;
  std::vector<EncodeTape<float>> tapes(s.labels.size());
  std::vector<BasicFeatureVolume<float>> dzs;
  std::vector<std::vector<float>> feats;
  for (std::size_t k = 0; k < s.labels.size(); ++k) {
    const auto z = encode(scatter_max<float>(s.clouds[k], cfg.grid), params, cfg.unet, &tapes[k]);
    dzs.emplace_back(z.spec, z.channels);
    feats.push_back(trilinear_sample(z, s.queries));
  }
  double total = 0;
  for (std::size_t d = 0; d < s.descriptions.size(); ++d) {
    const auto [ti, ri] = s.roles[d];
    const auto pair = concat_features<float>(feats[ti], feats[ri], D);
    const auto logits = spatial_similarity<float>(pair, s.descriptions[d].relation, params);
    const auto bce = bce_from_logits<float>(logits, s.targets[d], cfg.pos_weight);
    total += bce.loss * scale;
    std::vector<float> dlog(logits.size());
    for (std::size_t i = 0; i < dlog.size(); ++i) dlog[i] = static_cast<float>(bce.grad_logits[i] * scale);
    const auto dpair = spatial_similarity_backward<float>(pair, s.descriptions[d].relation, dlog, params, grads);
    const std::size_t n = s.queries.size();
    std::vector<float> dt(n * D), dr(n * D);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(dpair.data() + i * 2 * D, D, dt.data() + i * D);
      std::copy_n(dpair.data() + i * 2 * D + D, D, dr.data() + i * D);
    }
    trilinear_sample_backward<float>(s.queries, dt, dzs[ti]);
    trilinear_sample_backward<float>(s.queries, dr, dzs[ri]);
  }
  for (std::size_t k = 0; k < s.labels.size(); ++k) encode_backward(dzs[k], params, cfg.unet, tapes[k], grads);
  return total;
}

}  // namespace detail

/// Mean loss over all (scene, label) or (scene, description) terms, with the
/// gradient written into `grads`. Work units run in parallel, each into its
/// own gradient buffer; buffers are summed in a fixed order, so the result
/// does not depend on the thread count.
inline double batch_loss_and_grad(const BatchSample& batch, const Params<float>& params, const TrainConfig& cfg,
                                  Params<float>& grads) {
  std::size_t terms = 0;
  for (const auto& s : batch.scenes) terms += s.targets.size();
  SEMABS_EXPECT(terms > 0, "batch_loss_and_grad: batch has no supervision terms");
  const double scale = 1.0 / static_cast<double>(terms);

  std::vector<std::pair<std::size_t, std::size_t>> units;  // (scene, label) or (scene, 0)
  for (std::size_t si = 0; si < batch.scenes.size(); ++si) {
    if (cfg.task == Task::Ovssc)
      for (std::size_t k = 0; k < batch.scenes[si].labels.size(); ++k) units.emplace_back(si, k);
    else
      units.emplace_back(si, 0);
  }
  std::vector<Params<float>> partial(units.size());
  std::vector<double> losses(units.size(), 0.0);
  parallel_for(units.size(), [&](std::size_t u) {
    partial[u] = params.zeros_like();
    const auto& s = batch.scenes[units[u].first];
    losses[u] = cfg.task == Task::Ovssc ? detail::ovssc_term(s, units[u].second, params, cfg, scale, partial[u])
                                        : detail::vool_scene(s, params, cfg, scale, partial[u]);
  });
  grads.set_zero();
  double total = 0;
  for (std::size_t u = 0; u < units.size(); ++u) {
    total += losses[u];
    auto& dst = grads.tensors();
    const auto& src = partial[u].tensors();
    for (std::size_t t = 0; t < dst.size(); ++t)
      for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t].value[i] += src[t].value[i];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Loop

struct StepRecord {
  std::uint64_t step = 0;
  double lr = 0;
  double loss = 0;
  double wall_ms = 0;
};

inline nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}, {"wall_ms", r.wall_ms}};
}

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::optional<std::uint64_t> stop_at_step;  // stop (with a checkpoint) once this many steps are done
};

inline std::uint64_t steps_per_epoch(std::size_t views, int batch_scenes) {
  return (views + batch_scenes - 1) / batch_scenes;
}

inline ScheduleConfig effective_schedule(const TrainConfig& cfg, std::size_t views) {
  ScheduleConfig s = cfg.schedule;
  if (s.t0 == 0) s.t0 = steps_per_epoch(views, cfg.batch_scenes);
  return s;
}

/// View order for one epoch; a pure function of (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  SeededRng rng(SeededRng::mix(seed ^ SeededRng::mix(epoch ^ 0x6f72646572ULL)));
  return detail::choose(n, n, rng);
}

inline Checkpoint initial_checkpoint(const TrainConfig& cfg) {
  Checkpoint ck;
  ck.task = to_string(cfg.task);
  ck.unet = cfg.unet;
  ck.grid = cfg.grid;
  ck.params = init_model_params<float>(cfg.unet, SeededRng::mix(cfg.seed ^ 0x696e6974ULL));
  ck.adam = AdamState<float>::like(ck.params);
  ck.step = 0;
  ck.rng_state = SeededRng(SeededRng::mix(cfg.seed)).serialize();
  ck.meta = train_config_to_json(cfg).dump();
  return ck;
}

/// Trains for cfg.epochs over `dataset`, starting from `resume` when given.
/// Checkpoints are delivered through hooks (every cfg.checkpoint_every steps
/// and at the end); the final state is returned.
inline Checkpoint train(std::span<const ViewRecord> dataset, const TrainConfig& cfg, const RelevancyProvider& provider,
                        const Checkpoint* resume = nullptr, const TrainHooks& hooks = {}) {
  cfg.validate();
  SEMABS_EXPECT(!dataset.empty(), "train: empty dataset");
  retain_heap_memory();
  Checkpoint ck = resume ? *resume : initial_checkpoint(cfg);
  if (ck.task != to_string(cfg.task) || !(ck.unet == cfg.unet) || !(ck.grid == cfg.grid))
    throw ConfigError("resume checkpoint does not match the training config");
  SeededRng master;
  master.deserialize(ck.rng_state);
  const std::uint64_t spe = steps_per_epoch(dataset.size(), cfg.batch_scenes);
  const std::uint64_t total = spe * static_cast<std::uint64_t>(cfg.epochs);
  const ScheduleConfig schedule = effective_schedule(cfg, dataset.size());
  auto grads = ck.params.zeros_like();

  std::vector<std::size_t> order;
  std::uint64_t order_epoch = std::numeric_limits<std::uint64_t>::max();
  while (ck.step < total) {
    if (hooks.stop_at_step && ck.step >= *hooks.stop_at_step) break;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t epoch = ck.step / spe, pos = ck.step % spe;
    if (epoch != order_epoch) {
      order = epoch_order(dataset.size(), cfg.seed, epoch);
      order_epoch = epoch;
    }
    const std::size_t begin = pos * cfg.batch_scenes;
    const std::size_t end = std::min(order.size(), begin + cfg.batch_scenes);
    const std::span<const std::size_t> views(order.data() + begin, end - begin);

    SeededRng batch_rng = master.fork(ck.step);
    const auto batch = sample_batch(dataset, views, cfg, provider, batch_rng);
    const double lr = lr_at(ck.step, schedule);
    const double loss = batch_loss_and_grad(batch, ck.params, cfg, grads);
    if (!std::isfinite(loss)) {
      std::string ids;
      for (auto v : views) ids += (ids.empty() ? "" : ",") + dataset[v].id;
      throw TrainingError("non-finite loss at step " + std::to_string(ck.step) + " (lr " + std::to_string(lr) +
                          ", batch " + std::to_string(pos) + " of epoch " + std::to_string(epoch) + ": " + ids + ")");
    }
    adamw_step(ck.params, grads, ck.adam, lr, cfg.adam);
    ++ck.step;
    ck.rng_state = master.serialize();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (hooks.on_step) hooks.on_step({ck.step - 1, lr, loss, ms});
    if (hooks.on_checkpoint && cfg.checkpoint_every && ck.step % cfg.checkpoint_every == 0 && ck.step < total)
      hooks.on_checkpoint(ck);
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(ck);
  return ck;
}

}  // namespace semabs
