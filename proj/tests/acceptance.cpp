// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails. `acceptance 1 4 9` runs a subset.
//
// Criteria 5 to 7 train desk-scale models and take most of the time
// (about an hour in total on one core).

#include "semabs/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

#ifndef SEMABS_CLI_PATH
#error "SEMABS_CLI_PATH must name the semabs binary"
#endif

namespace semabs {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double x, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// ---------------------------------------------------------------------------
// Pinned tolerances and budgets

constexpr int kOracleInstances = 100;
constexpr double kInterpTol = 1e-6;
constexpr double kKernelBudgetS = 60;
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetS = 300;
constexpr double kSurfaceTol = 1e-4;
constexpr int kLabelerScenes = 200;
constexpr double kOvsscMinIou = 0.40;
constexpr double kOvsscMinGain = 3.0;
constexpr double kGeneralizationRelTol = 0.15;
constexpr double kVoolMinIou = 0.30;
constexpr double kVoolMaxCross = 0.1;
constexpr double kVoolMinHiddenIou = 0.20;
constexpr double kTrainBudgetS = 3600;

// Desk-scale learning recipe shared by criteria 5 to 7.
constexpr int kTrainScenes = 60;
constexpr int kTestScenes = 15;
// Epoch counts end a warm-restart cycle (1 + 2 + 4 + 8 + 16).
constexpr int kEpochs = 15;
constexpr int kVoolEpochs = 31;
constexpr double kLrMax = 3e-3;
// Unweighted BCE leaves OVSSC probabilities hovering just under the 0.5
// empty threshold for some seeds; weighting positives keeps them above it.
constexpr double kOvsscPosWeight = 2.0;

// ---------------------------------------------------------------------------
// 1. Kernel oracles

// Uniform integer in [lo, hi].
int pick(SeededRng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(hi - lo + 1)); }

GridSpec random_grid(SeededRng& rng) {
  GridSpec g;
  for (int a = 0; a < 3; ++a) {
    g.lower[a] = rng.uniform(-1.0, 0.0);
    g.upper[a] = g.lower[a] + rng.uniform(0.5, 2.0);
    g.resolution[a] = pick(rng, 1, 9);
  }
  return g;
}

PointCloud random_cloud(const GridSpec& g, int n, int channels, double overshoot, SeededRng& rng) {
  PointCloud pc;
  pc.channels = channels;
  std::vector<float> f(channels);
  for (int i = 0; i < n; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const double pad = overshoot * (g.upper[a] - g.lower[a]);
      p[a] = rng.uniform(g.lower[a] - pad, g.upper[a] + pad);
    }
    for (auto& x : f) x = static_cast<float>(rng.uniform(-1, 1));
    pc.push_back(p, f);
  }
  return pc;
}

Outcome kernel_oracles() {
  Outcome o;
  const auto t0 = Clock::now();
  SeededRng rng(101);
  int scatter_bad = 0, filter_bad = 0, iou_bad = 0, argmax_bad = 0;
  double interp_err = 0;
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    const GridSpec g = random_grid(rng);
    const int channels = pick(rng, 1, 3);

    const auto inside = random_cloud(g, 300, channels, 0.0, rng);
    scatter_bad += scatter_max(inside, g).data != oracle::scatter_max(inside, g).data;

    const auto mixed = random_cloud(g, 300, channels, 0.3, rng);
    const auto kept = filter_bounds(mixed, g);
    PointCloud expect;
    expect.channels = channels;
    for (std::size_t i = 0; i < mixed.size(); ++i)
      if (oracle::in_bounds(g, mixed.positions[i]))
        expect.push_back(mixed.positions[i],
                         std::span<const float>(mixed.features).subspan(i * channels, channels));
    filter_bad += kept.positions != expect.positions || kept.features != expect.features;

    FeatureVolume vol(g, channels);
    for (auto& v : vol.data) v = static_cast<float>(rng.uniform(-1, 1));
    std::vector<Vec3> qs;
    for (int i = 0; i < 50; ++i) {
      Vec3 q;
      for (int a = 0; a < 3; ++a) q[a] = rng.uniform(g.lower[a] - 0.2, g.upper[a] + 0.2);
      qs.push_back(q);
    }
    const auto got = trilinear_sample(vol, qs);
    for (std::size_t i = 0; i < qs.size(); ++i)
      for (int c = 0; c < channels; ++c)
        interp_err = std::max(interp_err, std::abs(got[i * channels + c] - oracle::trilinear(vol, qs[i], c)));

    OccupancyGrid a(g), b(g);
    const double pa = rng.uniform01(), pb = rng.uniform01();
    for (std::size_t v = 0; v < a.data.size(); ++v) {
      a.data[v] = rng.bernoulli(pa);
      b.data[v] = rng.bernoulli(pb);
    }
    iou_bad += voxel_iou(a, b) != oracle::iou(a, b);

    // Quantised probabilities force ties and threshold hits.
    const int K = pick(rng, 1, 5);
    std::vector<FeatureVolume> probs(K, FeatureVolume(g, 1));
    for (auto& p : probs)
      for (auto& x : p.data) x = static_cast<float>(pick(rng, 0, 8)) / 8.0f;
    const double thr = static_cast<double>(pick(rng, 0, 8)) / 8.0;
    argmax_bad += semantic_argmax(probs, thr).data != oracle::semantic_argmax(probs, thr);
  }
  const double t = seconds_since(t0);
  o.detail << kOracleInstances << " instances each; mismatches scatter_max " << scatter_bad << ", filter_bounds "
           << filter_bad << ", voxel_iou " << iou_bad << ", semantic_argmax " << argmax_bad
           << "; max trilinear error " << interp_err << "; " << fmt(t, 2) << " s";
  o.require(scatter_bad == 0 && filter_bad == 0 && iou_bad == 0 && argmax_bad == 0, "discrete ops exact");
  o.require(interp_err < kInterpTol, "interpolation < 1e-6");
  o.require(t < kKernelBudgetS, "runtime < 60 s");
  return o;
}

// ---------------------------------------------------------------------------
// 2. Gradients

using testing::directional_fd;
using testing::dot;
using testing::flatten;
using testing::random_unit;
using testing::rel_error;
using testing::unflatten;

double weighted_sum(const std::vector<double>& a, const std::vector<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * w[i];
  return s;
}

// ReLU kinks make larger steps unreliable along random directions.
constexpr double kFdStep = 1e-5;

Outcome gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  SeededRng rng(202);
  double worst_encode = 0, worst_decode = 0, worst_spatial = 0, worst_bce = 0;
  const GridSpec toy = GridSpec::cube(8);

  for (int levels = 1; levels <= 3; ++levels) {
    const UNetConfig cfg{levels, 4, 1, 4};
    const auto params = init_model_params<double>(cfg, 10 + levels);
    const auto in = testing::random_volume(toy, 1, rng);
    std::vector<double> w(4 * toy.voxel_count());
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    EncodeTape<double> tape;
    const auto z = encode(in, params, cfg, &tape);
    BasicFeatureVolume<double> dz(z.spec, z.channels);
    dz.data = w;
    auto grads = params.zeros_like();
    const auto dx = encode_backward(dz, params, cfg, tape, grads, true);
    const auto x0 = flatten(params);
    for (int k = 0; k < 2; ++k) {
      const auto v = random_unit(x0.size(), rng);
      const auto f = [&](const std::vector<double>& x) {
        auto p = params;
        unflatten(x, p);
        return weighted_sum(encode(in, p, cfg).data, w);
      };
      worst_encode = std::max(worst_encode, rel_error(directional_fd(f, x0, v, kFdStep), dot(flatten(grads), v)));
    }
    const auto u = random_unit(in.data.size(), rng);
    const auto fi = [&](const std::vector<double>& x) {
      auto vol = in;
      vol.data = x;
      return weighted_sum(encode(vol, params, cfg).data, w);
    };
    worst_encode = std::max(worst_encode, rel_error(directional_fd(fi, in.data, u, kFdStep), dot(dx->data, u)));
  }

  // Decoder, including the trilinear read-out from a D = 4 volume.
  {
    const UNetConfig cfg{2, 4, 1, 4};
    const auto params = init_model_params<double>(cfg, 31);
    const auto zvol = testing::random_volume(toy, 4, rng, -1.5, 1.5);
    std::vector<Vec3> qs;
    for (int i = 0; i < 40; ++i) qs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.1, 1.9)});
    std::vector<double> w(qs.size());
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    const auto feats = trilinear_sample(zvol, qs);
    DecodeCache<double> cache;
    decode_logits<double>(feats, params, &cache);
    auto grads = params.zeros_like();
    const auto dfeat = decode_backward<double>(feats, w, params, cache, grads);
    BasicFeatureVolume<double> dvol(toy, 4);
    trilinear_sample_backward<double>(qs, dfeat, dvol);
    const auto x0 = flatten(params);
    const auto v = random_unit(x0.size(), rng);
    const auto fp = [&](const std::vector<double>& x) {
      auto p = params;
      unflatten(x, p);
      return weighted_sum(decode_logits<double>(feats, p), w);
    };
    worst_decode = std::max(worst_decode, rel_error(directional_fd(fp, x0, v, kFdStep), dot(flatten(grads), v)));
    const auto u = random_unit(zvol.data.size(), rng);
    const auto fz = [&](const std::vector<double>& x) {
      auto vol = zvol;
      vol.data = x;
      return weighted_sum(decode_logits<double>(trilinear_sample(vol, qs), params), w);
    };
    worst_decode = std::max(worst_decode, rel_error(directional_fd(fz, zvol.data, u, kFdStep), dot(dvol.data, u)));
  }

  {
    const UNetConfig cfg{2, 4, 1, 4};
    const auto params = init_model_params<double>(cfg, 41);
    const int W = 8, N = 30;
    std::vector<double> feats(N * W), w(N);
    for (auto& f : feats) f = rng.uniform(-1.0, 1.0);
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    for (auto rel : kAllRelations) {
      auto grads = params.zeros_like();
      const auto dfeat = spatial_similarity_backward<double>(feats, rel, w, params, grads);
      const auto x0 = flatten(params);
      const auto v = random_unit(x0.size(), rng);
      const auto fp = [&](const std::vector<double>& x) {
        auto p = params;
        unflatten(x, p);
        return weighted_sum(spatial_similarity<double>(feats, rel, p), w);
      };
      worst_spatial = std::max(worst_spatial, rel_error(directional_fd(fp, x0, v, kFdStep), dot(flatten(grads), v)));
      const auto u = random_unit(feats.size(), rng);
      const auto ff = [&](const std::vector<double>& x) {
        return weighted_sum(spatial_similarity<double>(x, rel, params), w);
      };
      worst_spatial = std::max(worst_spatial, rel_error(directional_fd(ff, feats, u, kFdStep), dot(dfeat, u)));
    }
  }

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> z(64);
    std::vector<std::uint8_t> t(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = rng.uniform(-4, 4);
      t[i] = rng.bernoulli(0.3);
    }
    const double pw = rng.uniform(1.0, 3.0);
    const auto probs = [](const std::vector<double>& zz) {
      std::vector<double> p(zz.size());
      for (std::size_t i = 0; i < zz.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-zz[i]));
      return p;
    };
    const auto loss = [&](const std::vector<double>& zz) { return bce_loss<double>(probs(zz), t, pw).loss; };
    const auto g = bce_loss<double>(probs(z), t, pw).grad_logits;
    const auto dir = random_unit(z.size(), rng);
    worst_bce = std::max(worst_bce, rel_error(directional_fd(loss, z, dir, 1e-6), dot(g, dir)));
  }

  const double t = seconds_since(t0);
  o.detail << "max relative error encode " << worst_encode << ", decode " << worst_decode << ", spatial "
           << worst_spatial << ", bce " << worst_bce << "; " << fmt(t, 2) << " s";
  o.require(std::max({worst_encode, worst_decode, worst_spatial, worst_bce}) < kGradTol, "relative error < 1e-4");
  o.require(t < kGradBudgetS, "runtime < 5 min");
  return o;
}

// ---------------------------------------------------------------------------
// 3. Render / unproject round trip

Outcome geometry_round_trip() {
  Outcome o;
  SeededRng rng(303);
  const ViewConfig view;
  double worst = 0;
  std::size_t points = 0;
  for (int s = 0; s < 100; ++s) {
    const auto scene = generate_scene(rng, SceneConfig{});
    const auto pose = sample_view_pose(rng, view);
    const auto r = render_depth(scene, view.intrinsics, pose);
    std::vector<float> ids(r.mask.ids.begin(), r.mask.ids.end());
    const auto cloud = unproject_depth(r.depth, view.intrinsics, pose, ids);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto* obj = scene.find(static_cast<int>(cloud.feature(i)));
      if (!obj) {
        o.require(false, "point without an owning object");
        continue;
      }
      worst = std::max(worst, std::abs(obj->sdf(cloud.positions[i])));
    }
    points += cloud.size();
  }
  o.detail << "100 scenes, " << points << " points; max surface residual " << worst << " m";
  o.require(points > 0, "points rendered");
  o.require(worst < kSurfaceTol, "residual < 1e-4 m");
  return o;
}

// ---------------------------------------------------------------------------
// 4. Ground-truth labeler

Outcome labeler() {
  Outcome o;
  SeededRng rng(404);
  const GridSpec g = GridSpec::cube(16);
  auto pts = g.centers();
  for (int i = 0; i < 2000; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.1, 1.9)});
  // Half the scenes draw from a two-class vocabulary so that references
  // repeat and descriptions cover several instances.
  SceneConfig crowded;
  crowded.vocabulary = {default_vocabulary()[0], default_vocabulary()[3]};
  crowded.min_objects = 4;
  crowded.max_objects = 5;
  SceneConfig mixed;
  mixed.require_container = true;

  std::size_t checked = 0, undecided = 0, mismatched = 0, overlaps = 0, multi = 0, union_bad = 0;
  for (int s = 0; s < kLabelerScenes; ++s) {
    const auto scene = generate_scene(rng, s % 2 ? crowded : mixed);
    const auto pose = sample_view_pose(rng, ViewConfig{});
    std::set<std::string> classes;
    for (const auto& obj : scene.objects) classes.insert(obj.class_label);
    for (const auto& target : classes)
      for (const auto& ref : classes)
        for (auto rel : kAllRelations) {
          const Description d{target, rel, ref};
          const auto got = label_spatial_relation(scene, pose, d, pts);
          for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto e = oracle::relation(scene, pose, d, pts[i]);
            ++checked;
            if (!e) ++undecided;
            else mismatched += (got[i] != 0) != *e;
          }
          // Exact union over reference instances.
          std::vector<std::uint8_t> uni(pts.size(), 0);
          int instances = 0;
          for (const auto& obj : scene.objects) {
            if (obj.class_label != ref) continue;
            ++instances;
            RelationConfig one;
            one.visible_ids = std::set<int>{obj.id};
            const auto part = label_spatial_relation(scene, pose, d, pts, one);
            for (std::size_t i = 0; i < pts.size(); ++i) uni[i] |= part[i];
            if (rel == SpatialRelation::LeftOf) {
              const auto other =
                  label_spatial_relation(scene, pose, {target, SpatialRelation::RightOf, ref}, pts, one);
              for (std::size_t i = 0; i < pts.size(); ++i) overlaps += part[i] && other[i];
            }
          }
          if (instances > 1) {
            ++multi;
            union_bad += uni != got;
          }
        }
  }
  o.detail << kLabelerScenes << " scenes, " << checked << " point checks (" << undecided
           << " within 1e-9 of a boundary, skipped), " << mismatched << " mismatches; left/right overlaps "
           << overlaps << "; " << multi << " multi-reference descriptions, " << union_bad << " inexact unions";
  o.require(mismatched == 0, "100% agreement");
  o.require(undecided * 1000 < checked, "boundary cases rare");
  o.require(overlaps == 0, "left/right disjoint");
  o.require(multi > 0 && union_bad == 0, "exact unions");
  return o;
}

// ---------------------------------------------------------------------------
// Desk-scale training shared by 5 to 7

struct Trained {
  Checkpoint ck;
  double train_s = 0;
};

Trained train_model(std::span<const ViewRecord> data, Task task, std::uint64_t seed) {
  TrainConfig cfg = TrainConfig::desk(task);
  cfg.epochs = task == Task::Vool ? kVoolEpochs : kEpochs;
  cfg.pos_weight = task == Task::Ovssc ? kOvsscPosWeight : 1.0;
  cfg.schedule.lr_max = kLrMax;
  cfg.seed = seed;
  const auto t0 = Clock::now();
  auto ck = train(data, cfg, OracleProvider{});
  return {std::move(ck), seconds_since(t0)};
}

Split whole(std::span<const ViewRecord> data, SplitTag tag = SplitTag::NovelRoom) {
  Split s;
  s.tag = tag;
  for (std::size_t i = 0; i < data.size(); ++i) s.views.push_back(i);
  return s;
}

double ovssc_iou(const Checkpoint& ck, std::span<const ViewRecord> data) {
  const Model m = Model::from(ck);
  const OracleProvider provider;
  return eval_ovssc(ModelOvsscPredictor(m, provider), data, whole(data)).mean;
}

// ---------------------------------------------------------------------------
// 5. OVSSC learning, two seeds

Outcome ovssc_learning() {
  Outcome o;
  for (std::uint64_t seed : {1, 2}) {
    const DatasetConfig dc;
    const auto train_set = generate_dataset(kTrainScenes, 500 + seed, dc);
    const auto test_set = generate_dataset(kTestScenes, 600 + seed, dc, 1000);
    TrainConfig cfg = TrainConfig::desk(Task::Ovssc);
    cfg.seed = seed;
    const double untrained = ovssc_iou(initial_checkpoint(cfg), test_set);
    const auto t = train_model(train_set, Task::Ovssc, seed);
    const double trained = ovssc_iou(t.ck, test_set);
    o.detail << (seed == 1 ? "" : "; ") << "seed " << seed << ": held-out mIoU " << fmt(trained) << " vs untrained "
             << fmt(untrained) << ", " << fmt(t.train_s, 0) << " s";
    const std::string tag = "seed " + std::to_string(seed);
    o.require(trained >= kOvsscMinIou, tag + " mIoU >= 0.40");
    o.require(trained >= kOvsscMinGain * untrained, tag + " >= 3x untrained");
    o.require(t.train_s <= kTrainBudgetS, tag + " runtime <= 60 min");
  }
  return o;
}

// ---------------------------------------------------------------------------
// 6. Held-out vocabulary half

Outcome vocabulary_generalization() {
  Outcome o;
  // The vocabulary lists five shape families twice; each half holds one
  // class per family, so the halves differ only in their labels.
  const auto vocab = default_vocabulary();
  const std::vector<ClassSpec> seen(vocab.begin(), vocab.begin() + 5), held(vocab.begin() + 5, vocab.end());
  DatasetConfig seen_cfg, held_cfg;
  seen_cfg.scene.vocabulary = seen;
  held_cfg.scene.vocabulary = held;
  const auto train_set = generate_dataset(kTrainScenes, 701, seen_cfg);
  const auto seen_test = generate_dataset(2 * kTestScenes, 702, seen_cfg, 1000);
  const auto held_test = generate_dataset(2 * kTestScenes, 703, held_cfg, 2000);
  const auto t = train_model(train_set, Task::Ovssc, 3);
  const double s = ovssc_iou(t.ck, seen_test), h = ovssc_iou(t.ck, held_test);
  const double rel = std::abs(h - s) / s;
  o.detail << "trained on {";
  for (std::size_t i = 0; i < seen.size(); ++i) o.detail << (i ? "," : "") << seen[i].label;
  o.detail << "}; seen-class mIoU " << fmt(s) << ", held-out-class mIoU " << fmt(h) << ", relative gap "
           << fmt(rel);
  o.require(rel <= kGeneralizationRelTol, "within 15% relative");
  return o;
}

// ---------------------------------------------------------------------------
// 7. VOOL learning

Outcome vool_learning() {
  Outcome o;
  // Every scene holds a container so that Inside is represented.
  DatasetConfig dc;
  dc.scene.require_container = true;
  const auto train_set = generate_dataset(kTrainScenes, 801, dc);
  const auto test_set = generate_dataset(kTestScenes, 802, dc, 1000);
  const auto t = train_model(train_set, Task::Vool, 4);
  const Model m = Model::from(t.ck);
  const OracleProvider provider;
  const auto rep = eval_vool(ModelVoolPredictor(m, provider), test_set, whole(test_set));
  o.detail << "per-relation";
  for (const auto& [k, v] : rep.per_key) o.detail << " " << k << "=" << fmt(v);
  o.detail << "; mean " << fmt(rep.mean) << "; hidden";
  for (const auto& [k, v] : rep.hidden_per_key) o.detail << " " << k << "=" << fmt(v);
  o.detail << ", hidden mean " << fmt(rep.hidden_mean) << "; left/right cross-IoU "
           << fmt(rep.left_right_cross_iou.value_or(1.0), 4) << "; " << fmt(t.train_s, 0) << " s";
  o.require(rep.per_key.size() == kAllRelations.size(), "all six relations evaluated");
  o.require(rep.mean >= kVoolMinIou, "mean >= 0.30");
  o.require(rep.left_right_cross_iou && *rep.left_right_cross_iou < kVoolMaxCross, "cross-IoU < 0.1");
  o.require(!rep.hidden_per_key.empty() && rep.hidden_mean >= kVoolMinHiddenIou, "hidden mean >= 0.20");
  o.require(t.train_s <= kTrainBudgetS, "runtime <= 60 min");
  return o;
}

// ---------------------------------------------------------------------------
// 8. Determinism through the command-line pipeline

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEMABS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_tree(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, root).string() + "\n" + io::read_file(f);
  return all;
}

Outcome determinism() {
  Outcome o;
  testing::TempDir dir("accept");
  const auto pipeline = [&](const std::string& name) {
    const fs::path root = dir.path() / name;
    const auto data = (root / "data").string();
    bool ok = run_cli("gen --out " + data + " --count 24 --seed 21") == 0;
    ok = ok && run_cli("train --task ovssc --data " + data + " --out " + (root / "train").string() +
                       " --epochs 5 --seed 3 --checkpoint-every 6") == 0;
    ok = ok && run_cli("eval --task ovssc --data " + data + " --checkpoint " + (root / "train" / "model.sabs").string() +
                       " --out " + (root / "eval").string()) == 0;
    return ok;
  };
  const bool ran = pipeline("a") && pipeline("b");
  o.require(ran, "pipeline ran");
  if (!ran) return o;
  const auto a = dir.path() / "a", b = dir.path() / "b";
  const bool data_same = read_tree(a / "data") == read_tree(b / "data");
  const bool ck_same = read_tree(a / "train" / "checkpoints") == read_tree(b / "train" / "checkpoints") &&
                       io::read_file(a / "train" / "model.sabs") == io::read_file(b / "train" / "model.sabs");
  const bool rep_same = read_tree(a / "eval") == read_tree(b / "eval");

  std::vector<fs::path> cks;
  for (const auto& e : fs::directory_iterator(a / "train" / "checkpoints")) cks.push_back(e.path());
  std::sort(cks.begin(), cks.end());
  const auto resumed = dir.path() / "resumed";
  const bool resume_ran = cks.size() >= 2 && run_cli("train --task ovssc --data " + (a / "data").string() + " --out " +
                                                     resumed.string() + " --epochs 5 --seed 3 --resume " +
                                                     cks.front().string()) == 0;
  const bool resume_same =
      resume_ran && io::read_file(resumed / "model.sabs") == io::read_file(a / "train" / "model.sabs");
  const auto total = load_checkpoint(a / "train" / "model.sabs").step;
  o.detail << "two runs: data " << (data_same ? "identical" : "DIFFER") << ", checkpoints "
           << (ck_same ? "identical" : "DIFFER") << ", reports " << (rep_same ? "identical" : "DIFFER")
           << "; resume from step " << (cks.empty() ? 0 : load_checkpoint(cks.front()).step) << " of " << total
           << ": " << (resume_same ? "identical" : "DIFFER");
  o.require(data_same && ck_same && rep_same, "bit-identical reruns");
  o.require(resume_same, "resume matches");
  return o;
}

// ---------------------------------------------------------------------------
// 9. Crop schedule

Outcome crop_schedule() {
  Outcome o;
  const std::array<int, 4> divisors{1, 2, 3, 4};
  const auto s = make_crop_schedule(896, 896, divisors);
  std::vector<int> sizes, strides;
  bool covered = true, contained = true;
  for (const auto& scale : s.scales) {
    sizes.push_back(scale.size);
    strides.push_back(scale.stride);
    std::vector<std::uint8_t> hit(896 * 896, 0);
    for (const auto& w : scale.windows) {
      contained = contained && w.x >= 0 && w.y >= 0 && w.x + w.size <= 896 && w.y + w.size <= 896 &&
                  w.size == scale.size;
      for (int y = std::max(w.y, 0); y < std::min(w.y + w.size, 896); ++y)
        for (int x = std::max(w.x, 0); x < std::min(w.x + w.size, 896); ++x) hit[y * 896 + x] = 1;
    }
    covered = covered && std::all_of(hit.begin(), hit.end(), [](std::uint8_t h) { return h != 0; });
  }
  o.detail << "sizes {";
  for (std::size_t i = 0; i < sizes.size(); ++i) o.detail << (i ? "," : "") << sizes[i];
  o.detail << "} strides {";
  for (std::size_t i = 0; i < strides.size(); ++i) o.detail << (i ? "," : "") << strides[i];
  o.detail << "}; every pixel covered at every scale: " << (covered ? "yes" : "no");
  o.require(sizes == std::vector<int>{896, 448, 298, 224}, "sizes");
  o.require(strides == std::vector<int>{224, 112, 74, 56}, "strides");
  o.require(covered && contained, "coverage");
  return o;
}

}  // namespace
}  // namespace semabs

int main(int argc, char** argv) {
  using namespace semabs;
  CLI::App app("semabs acceptance criteria");
  std::vector<int> only;
  app.add_option("criteria", only, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::array<std::pair<const char*, Outcome (*)()>, 9> criteria{{
      {"kernel oracles", kernel_oracles},
      {"gradient checks", gradients},
      {"render/unproject round trip", geometry_round_trip},
      {"relation labeler", labeler},
      {"OVSSC desk-scale learning", ovssc_learning},
      {"held-out vocabulary half", vocabulary_generalization},
      {"VOOL desk-scale learning", vool_learning},
      {"determinism and resume", determinism},
      {"crop schedule", crop_schedule},
  }};
  int failed = 0;
  for (int c : only) {
    const auto& [name, fn] = criteria[c - 1];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c << ". " << name << ": " << o.detail.str() << std::endl;
  }
  return failed ? 1 : 0;
}
