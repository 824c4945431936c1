// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Split construction and IoU evaluation for both tasks.

#pragma once

#include "semabs/dataset.hpp"
#include "semabs/parallel.hpp"
#include "semabs/tasks.hpp"
#include "semabs/train.hpp"

#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace semabs {

// ---------------------------------------------------------------------------
// Splits

struct SplitConfig {
  std::vector<std::string> heldout_classes;  // never seen in training
  double novel_room_fraction = 0.2;          // of the scenes free of held-out classes
  bool require_nonempty = true;              // train, novel_room and novel_class must all get views
};

struct Split {
  SplitTag tag = SplitTag::Train;
  std::vector<std::size_t> views;  // indices into the dataset
  bool use_synonyms = false;       // query labels rewritten to synonyms
  std::set<std::string> classes;   // classes scored in this split (canonical)
};

struct Splits {
  Split train, novel_room, novel_synonym, novel_class;

  const Split& get(SplitTag t) const {
    switch (t) {
      case SplitTag::Train: return train;
      case SplitTag::NovelRoom: return novel_room;
      case SplitTag::NovelSynonym: return novel_synonym;
      case SplitTag::NovelClass: return novel_class;
    }
    return train;
  }
};

/// train / novel_room partition the scenes without held-out classes;
/// novel_synonym reuses novel_room's scenes with synonym labels; novel_class
/// holds every scene that contains a held-out class.
inline Splits make_splits(std::span<const ViewRecord> views, const SplitConfig& cfg, SeededRng& rng) {
  if (cfg.require_nonempty && cfg.heldout_classes.empty()) throw ConfigError("make_splits: need at least one held-out class");
  if (!(cfg.novel_room_fraction > 0 && cfg.novel_room_fraction < 1))
    throw ConfigError("make_splits: novel_room_fraction must lie in (0, 1)");
  const std::set<std::string> heldout(cfg.heldout_classes.begin(), cfg.heldout_classes.end());
  std::set<std::string> all_classes;
  for (const auto& v : views)
    for (const auto& c : v.scene.class_labels()) all_classes.insert(c);
  std::set<std::string> seen;
  for (const auto& c : all_classes)
    if (!heldout.contains(c)) seen.insert(c);
  if (cfg.require_nonempty && seen.empty()) throw ConfigError("make_splits: held-out classes leave no class for training");

  Splits s;
  s.train.tag = SplitTag::Train;
  s.novel_room.tag = SplitTag::NovelRoom;
  s.novel_synonym.tag = SplitTag::NovelSynonym;
  s.novel_synonym.use_synonyms = true;
  s.novel_class.tag = SplitTag::NovelClass;
  std::vector<std::size_t> clean;
  for (std::size_t i = 0; i < views.size(); ++i) {
    bool has_heldout = false;
    for (const auto& c : views[i].scene.class_labels()) has_heldout |= heldout.contains(c);
    (has_heldout ? s.novel_class.views : clean).push_back(i);
  }
  const auto n_room = static_cast<std::size_t>(std::lround(cfg.novel_room_fraction * clean.size()));
  const auto picked = detail::choose(clean.size(), n_room, rng);
  std::set<std::size_t> room_pos(picked.begin(), picked.end());
  for (std::size_t k = 0; k < clean.size(); ++k) (room_pos.contains(k) ? s.novel_room : s.train).views.push_back(clean[k]);
  s.novel_synonym.views = s.novel_room.views;
  s.train.classes = s.novel_room.classes = s.novel_synonym.classes = seen;
  for (const auto& c : all_classes)
    if (heldout.contains(c)) s.novel_class.classes.insert(c);
  for (const Split* sp : {&s.train, &s.novel_room, &s.novel_class})
    if (cfg.require_nonempty && sp->views.empty()) throw ConfigError("make_splits: split " + to_string(sp->tag) + " would be empty");
  return s;
}

/// Query label for a class under a split: the class itself, or its first
/// synonym when the split rewrites labels.
inline std::string query_label(const Scene& scene, const std::string& cls, bool use_synonyms) {
  if (!use_synonyms) return cls;
  for (const auto& o : scene.objects)
    if (o.class_label == cls && !o.synonyms.empty()) return o.synonyms.front();
  return cls;
}

// ---------------------------------------------------------------------------
// Predictors

class OvsscPredictor {
 public:
  virtual ~OvsscPredictor() = default;
  virtual OvsscResult predict(const ViewRecord& view, std::span<const std::string> labels, const GridSpec& eval_spec,
                              double threshold) const = 0;
};

class VoolPredictor {
 public:
  virtual ~VoolPredictor() = default;
  virtual VoolResult predict(const ViewRecord& view, const Description& desc, const GridSpec& eval_spec,
                             double threshold) const = 0;
};

inline Observation observation_of(const ViewRecord& v) { return {&v.depth, v.intrinsics, v.pose, v.input()}; }

class ModelOvsscPredictor final : public OvsscPredictor {
 public:
  ModelOvsscPredictor(const Model& model, const RelevancyProvider& provider) : model_(model), provider_(provider) {}
  OvsscResult predict(const ViewRecord& view, std::span<const std::string> labels, const GridSpec& eval_spec,
                      double threshold) const override {
    return ovssc_infer(observation_of(view), labels, provider_, model_, eval_spec, threshold);
  }

 private:
  const Model& model_;
  const RelevancyProvider& provider_;
};

class ModelVoolPredictor final : public VoolPredictor {
 public:
  ModelVoolPredictor(const Model& model, const RelevancyProvider& provider) : model_(model), provider_(provider) {}
  VoolResult predict(const ViewRecord& view, const Description& desc, const GridSpec& eval_spec,
                     double threshold) const override {
    return vool_infer(observation_of(view), desc, provider_, model_, eval_spec, threshold);
  }

 private:
  const Model& model_;
  const RelevancyProvider& provider_;
};

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  Task task = Task::Ovssc;
  SplitTag split = SplitTag::Train;
  double threshold = kDefaultThreshold;
  std::size_t scenes = 0;
  std::map<std::string, double> per_key;  // class (OVSSC) or relation (VOOL)
  std::map<std::string, std::size_t> counts;
  double mean = 0;
  // OVSSC
  std::vector<std::string> confusion_labels;  // K classes then "EMPTY"; rows = truth, cols = prediction
  std::vector<std::vector<std::uint64_t>> confusion;
  // VOOL
  std::map<std::string, double> hidden_per_key;
  std::map<std::string, std::size_t> hidden_counts;
  double hidden_mean = 0;
  std::optional<double> left_right_cross_iou;
};

namespace detail {

inline double mean_of(const std::map<std::string, double>& m) {
  if (m.empty()) return 0.0;
  double s = 0;
  for (const auto& [k, v] : m) s += v;
  return s / static_cast<double>(m.size());
}

/// Reference semantics: each voxel takes the first label (in query order)
/// whose ground-truth occupancy covers it, the same tie rule as argmax.
inline SemanticGrid truth_semantic(const Scene& scene, std::span<const std::string> classes, const GridSpec& spec) {
  SemanticGrid g(spec);
  for (std::size_t k = classes.size(); k-- > 0;) {
    const auto occ = occupancy_grid(scene, classes[k], spec);
    for (std::size_t v = 0; v < occ.data.size(); ++v)
      if (occ.data[v]) g.data[v] = static_cast<std::int32_t>(k);
  }
  return g;
}

}  // namespace detail

/// Per class: IoU of the predicted class mask against the reference semantic
/// mask, averaged over the split's scenes that contain the class; the report
/// mean is the macro average over classes. Every label of a scene takes part
/// in the argmax, but only classes in split.classes are scored.
inline EvalReport eval_ovssc(const OvsscPredictor& predictor, std::span<const ViewRecord> dataset, const Split& split,
                             double threshold = kDefaultThreshold, const GridSpec& eval_spec = GridSpec::cube(32)) {
  SEMABS_EXPECT(!split.views.empty(), "eval_ovssc: empty split");
  std::vector<std::string> keys(split.classes.begin(), split.classes.end());
  if (keys.empty()) {
    std::set<std::string> all;
    for (auto vi : split.views)
      for (const auto& c : dataset[vi].scene.class_labels()) all.insert(c);
    keys.assign(all.begin(), all.end());
  }
  const std::size_t K = keys.size();
  const auto key_index = [&](const std::string& c) -> std::optional<std::size_t> {
    auto it = std::lower_bound(keys.begin(), keys.end(), c);
    if (it == keys.end() || *it != c) return std::nullopt;
    return static_cast<std::size_t>(it - keys.begin());
  };

  struct PerView {
    std::vector<std::pair<std::string, double>> ious;
    std::vector<std::vector<std::uint64_t>> confusion;
  };
  std::vector<PerView> results(split.views.size());
  parallel_for(split.views.size(), [&](std::size_t i) {
    const auto& view = dataset[split.views[i]];
    const auto classes = view.scene.class_labels();
    std::vector<std::string> labels;
    for (const auto& c : classes) labels.push_back(query_label(view.scene, c, split.use_synonyms));
    const auto pred = predictor.predict(view, labels, eval_spec, threshold);
    const auto truth = detail::truth_semantic(view.scene, classes, eval_spec);
    PerView& r = results[i];
    r.confusion.assign(K + 1, std::vector<std::uint64_t>(K + 1, 0));
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (!key_index(classes[k])) continue;
      const auto label = static_cast<std::int32_t>(k);
      r.ious.emplace_back(classes[k], voxel_iou(pred.semantic.mask(label), truth.mask(label)));
    }
    const auto global = [&](std::int32_t local) -> std::size_t {
      if (local == SemanticGrid::kEmpty) return K;
      return key_index(classes[local]).value_or(K);
    };
    for (std::size_t v = 0; v < truth.data.size(); ++v) {
      if (truth.data[v] == SemanticGrid::kEmpty && pred.semantic.data[v] == SemanticGrid::kEmpty) continue;
      ++r.confusion[global(truth.data[v])][global(pred.semantic.data[v])];
    }
  });

  EvalReport rep;
  rep.task = Task::Ovssc;
  rep.split = split.tag;
  rep.threshold = threshold;
  rep.scenes = split.views.size();
  rep.confusion_labels = keys;
  rep.confusion_labels.push_back("EMPTY");
  rep.confusion.assign(K + 1, std::vector<std::uint64_t>(K + 1, 0));
  std::map<std::string, double> sums;
  for (const auto& r : results) {
    for (const auto& [c, iou] : r.ious) {
      sums[c] += iou;
      ++rep.counts[c];
    }
    for (std::size_t a = 0; a <= K; ++a)
      for (std::size_t b = 0; b <= K; ++b) rep.confusion[a][b] += r.confusion[a][b];
  }
  for (const auto& [c, s] : sums) rep.per_key[c] = s / static_cast<double>(rep.counts[c]);
  rep.mean = detail::mean_of(rep.per_key);
  return rep;
}

inline SpatialRelation opposite_horizontal(SpatialRelation r) {
  return r == SpatialRelation::LeftOf ? SpatialRelation::RightOf : SpatialRelation::LeftOf;
}

/// Per description IoU against the labelled positives, averaged per relation;
/// the mean is over relations present. Hidden-target descriptions are also
/// aggregated separately. For LeftOf / RightOf descriptions the opposite
/// relation is predicted too and the cross-IoU of the two predictions
/// (over pairs with a non-empty union) is reported.
inline EvalReport eval_vool(const VoolPredictor& predictor, std::span<const ViewRecord> dataset, const Split& split,
                            double threshold = kDefaultThreshold, bool measure_left_right = true) {
  SEMABS_EXPECT(!split.views.empty(), "eval_vool: empty split");
  struct Item {
    std::string relation;
    double iou;
    bool hidden;
    std::optional<double> cross;
  };
  std::vector<std::vector<Item>> results(split.views.size());
  parallel_for(split.views.size(), [&](std::size_t i) {
    const auto& view = dataset[split.views[i]];
    for (const auto& g : view.descriptions) {
      const bool mentions = split.classes.empty() || split.classes.contains(g.desc.target_label) ||
                            split.classes.contains(g.desc.ref_label);
      if (!mentions) continue;
      Description q = g.desc;
      q.target_label = query_label(view.scene, q.target_label, split.use_synonyms);
      q.ref_label = query_label(view.scene, q.ref_label, split.use_synonyms);
      const auto pred = predictor.predict(view, q, g.positives.spec, threshold);
      Item item{to_string(g.desc.relation), voxel_iou(pred.occupancy, g.positives), g.target_hidden, std::nullopt};
      if (measure_left_right &&
          (g.desc.relation == SpatialRelation::LeftOf || g.desc.relation == SpatialRelation::RightOf)) {
        Description flipped = q;
        flipped.relation = opposite_horizontal(q.relation);
        const auto other = predictor.predict(view, flipped, g.positives.spec, threshold);
        if (pred.occupancy.count() + other.occupancy.count() > 0) item.cross = voxel_iou(pred.occupancy, other.occupancy);
      }
      results[i].push_back(item);
    }
  });

  EvalReport rep;
  rep.task = Task::Vool;
  rep.split = split.tag;
  rep.threshold = threshold;
  rep.scenes = split.views.size();
  std::map<std::string, double> sums, hidden_sums;
  double cross_sum = 0;
  std::size_t cross_n = 0;
  for (const auto& items : results)
    for (const auto& it : items) {
      sums[it.relation] += it.iou;
      ++rep.counts[it.relation];
      if (it.hidden) {
        hidden_sums[it.relation] += it.iou;
        ++rep.hidden_counts[it.relation];
      }
      if (it.cross) {
        cross_sum += *it.cross;
        ++cross_n;
      }
    }
  for (const auto& [k, s] : sums) rep.per_key[k] = s / static_cast<double>(rep.counts[k]);
  for (const auto& [k, s] : hidden_sums) rep.hidden_per_key[k] = s / static_cast<double>(rep.hidden_counts[k]);
  rep.mean = detail::mean_of(rep.per_key);
  rep.hidden_mean = detail::mean_of(rep.hidden_per_key);
  if (cross_n) rep.left_right_cross_iou = cross_sum / static_cast<double>(cross_n);
  return rep;
}

// ---------------------------------------------------------------------------
// Report files

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j{{"task", to_string(r.task)},
                   {"split", to_string(r.split)},
                   {"threshold", r.threshold},
                   {"scenes", r.scenes},
                   {"per_key", r.per_key},
                   {"counts", r.counts},
                   {"mean", r.mean}};
  if (r.task == Task::Ovssc) {
    j["confusion_labels"] = r.confusion_labels;
    j["confusion"] = r.confusion;
  } else {
    j["hidden_per_key"] = r.hidden_per_key;
    j["hidden_counts"] = r.hidden_counts;
    j["hidden_mean"] = r.hidden_mean;
    j["left_right_cross_iou"] = r.left_right_cross_iou ? nlohmann::json(*r.left_right_cross_iou) : nlohmann::json();
  }
  return j;
}

/// key,iou,count rows followed by a "mean" row.
inline std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "key,iou,count\n";
  for (const auto& [k, v] : r.per_key) os << k << ',' << v << ',' << r.counts.at(k) << '\n';
  os << "mean," << r.mean << ',' << r.per_key.size() << '\n';
  return os.str();
}

inline std::string confusion_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "truth\\pred";
  for (const auto& l : r.confusion_labels) os << ',' << l;
  os << '\n';
  for (std::size_t a = 0; a < r.confusion.size(); ++a) {
    os << r.confusion_labels[a];
    for (auto c : r.confusion[a]) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

}  // namespace semabs
