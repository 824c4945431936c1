// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// semabs: gen / relevancy / train / eval / export.
//
// Every command writes into an output directory that also receives a
// manifest.json recording the full argument vector, the effective
// configuration and the build version. Exit codes: 0 ok, 1 runtime failure,
// 2 usage or configuration error.

#include "semabs/eval.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>

#ifndef SEMABS_VERSION
#define SEMABS_VERSION "0.1.0-unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace semabs::cli {
namespace {

/// Thrown for anything the user can fix by changing flags or inputs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> g_argv;

json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("file not found: " + path.string());
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw UsageError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

void write_manifest(const fs::path& out, const std::string& command, const std::string& config_path,
                    std::optional<std::uint64_t> seed, const json& effective) {
  json m{{"command", command},
         {"argv", g_argv},
         {"config", config_path.empty() ? json() : json(config_path)},
         {"seed", seed ? json(*seed) : json()},
         {"version", SEMABS_VERSION},
         {"output", out.string()},
         {"effective_config", effective}};
  write_json(out / "manifest.json", m);
}

template <class F>
void reject_unknown(const json& j, std::initializer_list<const char*> keys, F&& where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) == keys.end())
      throw ConfigError(std::string(where) + ": unknown key " + k);
}

// ---------------------------------------------------------------------------
// Relevancy providers

NoiseConfig parse_noise(const std::string& spec) {
  if (spec.empty() || spec == "default") return {};
  if (spec == "off") return NoiseConfig::off();
  const json j = read_json_file(spec);
  reject_unknown(j, {"amplitude_min", "amplitude_max", "blur_sigma", "background_max", "background_noise"},
                 "noise config");
  NoiseConfig n;
  n.amplitude_min = j.value("amplitude_min", n.amplitude_min);
  n.amplitude_max = j.value("amplitude_max", n.amplitude_max);
  n.blur_sigma = j.value("blur_sigma", n.blur_sigma);
  n.background_max = j.value("background_max", n.background_max);
  n.background_noise = j.value("background_noise", n.background_noise);
  if (!(n.amplitude_min >= 0 && n.amplitude_min <= n.amplitude_max) || n.background_max < 0)
    throw ConfigError("noise config: need 0 <= amplitude_min <= amplitude_max and background_max >= 0");
  return n;
}

json noise_json(const NoiseConfig& n) {
  return {{"amplitude_min", n.amplitude_min}, {"amplitude_max", n.amplitude_max}, {"blur_sigma", n.blur_sigma},
          {"background_max", n.background_max}, {"background_noise", n.background_noise}};
}

struct ProviderFlags {
  std::string kind = "oracle";
  std::string rmap_dir;
  std::string noise = "default";

  void add(CLI::App* app) {
    app->add_option("--provider", kind, "relevancy source")->check(CLI::IsMember({"oracle", "rmap"}));
    app->add_option("--rmap-dir", rmap_dir, "directory of <view_id>.rmap files (provider rmap)");
    app->add_option("--noise", noise, "oracle noise: default, off, or a JSON file");
  }

  std::unique_ptr<RelevancyProvider> make() const {
    if (kind == "rmap") {
      if (rmap_dir.empty()) throw UsageError("--provider rmap needs --rmap-dir");
      if (!fs::is_directory(rmap_dir)) throw UsageError("rmap directory not found: " + rmap_dir);
      return std::make_unique<RmapProvider>(rmap_dir);
    }
    return std::make_unique<OracleProvider>(parse_noise(noise));
  }

  json to_json() const {
    json j{{"provider", kind}};
    if (kind == "rmap") j["rmap_dir"] = rmap_dir;
    else j["noise"] = noise_json(parse_noise(noise));
    return j;
  }
};

// ---------------------------------------------------------------------------
// Datasets and splits

struct GenConfig {
  int count = 60;
  std::uint64_t seed = 0;
  int first_index = 0;
  DatasetConfig dataset;
  SplitConfig split{{"globe", "trophy"}, 0.2, false};
};

GenConfig gen_config_from_json(const json& j) {
  reject_unknown(j,
                 {"count", "seed", "first_index", "vocabulary", "min_objects", "max_objects", "descriptions_per_view",
                  "hide_probability", "hidden_fraction", "eval_resolution", "heldout_classes",
                  "novel_room_fraction"},
                 "gen config");
  GenConfig c;
  try {
    c.count = j.value("count", c.count);
    c.seed = j.value("seed", c.seed);
    c.first_index = j.value("first_index", c.first_index);
    auto& sc = c.dataset.scene;
    if (j.contains("vocabulary")) {
      const auto names = j["vocabulary"].get<std::vector<std::string>>();
      std::vector<ClassSpec> vocab;
      for (const auto& name : names) {
        const auto all = default_vocabulary();
        auto it = std::find_if(all.begin(), all.end(), [&](const ClassSpec& s) { return s.label == name; });
        if (it == all.end()) throw ConfigError("gen config: unknown class " + name);
        vocab.push_back(*it);
      }
      if (vocab.empty()) throw ConfigError("gen config: vocabulary is empty");
      sc.vocabulary = vocab;
    }
    sc.min_objects = j.value("min_objects", sc.min_objects);
    sc.max_objects = j.value("max_objects", sc.max_objects);
    c.dataset.descriptions_per_view = j.value("descriptions_per_view", c.dataset.descriptions_per_view);
    c.dataset.hide_probability = j.value("hide_probability", c.dataset.hide_probability);
    c.dataset.descriptions.hidden_fraction = j.value("hidden_fraction", c.dataset.descriptions.hidden_fraction);
    if (j.contains("eval_resolution")) {
      const int res = j["eval_resolution"].get<int>();
      if (res < 1) throw ConfigError("gen config: eval_resolution must be >= 1");
      c.dataset.descriptions.eval_spec.resolution = {res, res, res};
    }
    if (j.contains("heldout_classes")) c.split.heldout_classes = j["heldout_classes"].get<std::vector<std::string>>();
    c.split.novel_room_fraction = j.value("novel_room_fraction", c.split.novel_room_fraction);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gen config: ") + e.what());
  }
  const auto& sc = c.dataset.scene;
  if (sc.min_objects < 1 || sc.min_objects > sc.max_objects)
    throw ConfigError("gen config: need 1 <= min_objects <= max_objects");
  if (c.dataset.descriptions_per_view < 1) throw ConfigError("gen config: descriptions_per_view must be >= 1");
  return c;
}

json gen_config_to_json(const GenConfig& c) {
  std::vector<std::string> vocab;
  for (const auto& s : c.dataset.scene.vocabulary) vocab.push_back(s.label);
  return {{"count", c.count},
          {"seed", c.seed},
          {"first_index", c.first_index},
          {"vocabulary", vocab},
          {"min_objects", c.dataset.scene.min_objects},
          {"max_objects", c.dataset.scene.max_objects},
          {"descriptions_per_view", c.dataset.descriptions_per_view},
          {"hide_probability", c.dataset.hide_probability},
          {"hidden_fraction", c.dataset.descriptions.hidden_fraction},
          {"eval_resolution", c.dataset.descriptions.eval_spec.resolution[0]},
          {"heldout_classes", c.split.heldout_classes},
          {"novel_room_fraction", c.split.novel_room_fraction}};
}

json splits_json(const Splits& s, std::span<const ViewRecord> views, const SplitConfig& cfg) {
  json out{{"heldout_classes", cfg.heldout_classes}, {"splits", json::object()}};
  for (auto tag : {SplitTag::Train, SplitTag::NovelRoom, SplitTag::NovelSynonym, SplitTag::NovelClass}) {
    const Split& sp = s.get(tag);
    std::vector<std::string> ids;
    for (auto v : sp.views) ids.push_back(views[v].id);
    out["splits"][to_string(tag)] = {{"views", ids},
                                     {"classes", std::vector<std::string>(sp.classes.begin(), sp.classes.end())},
                                     {"use_synonyms", sp.use_synonyms}};
  }
  return out;
}

std::vector<ViewRecord> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw UsageError("dataset directory not found: " + root.string());
  auto views = read_dataset(root);
  if (views.empty()) throw UsageError("no views under " + root.string());
  return views;
}

/// The named split from <data>/splits.json; every view when the file is
/// absent and the split is "train".
Split load_split(const fs::path& root, std::span<const ViewRecord> views, SplitTag tag) {
  Split sp;
  sp.tag = tag;
  const auto path = root / "splits.json";
  if (!fs::exists(path)) {
    if (tag != SplitTag::Train) throw UsageError("splits.json missing under " + root.string());
    for (std::size_t i = 0; i < views.size(); ++i) sp.views.push_back(i);
    return sp;
  }
  const json j = read_json_file(path);
  try {
    const auto& e = j.at("splits").at(to_string(tag));
    for (const auto& id : e.at("views").get<std::vector<std::string>>()) {
      auto it = std::find_if(views.begin(), views.end(), [&](const ViewRecord& v) { return v.id == id; });
      if (it == views.end()) throw UsageError("splits.json names unknown view " + id);
      sp.views.push_back(static_cast<std::size_t>(it - views.begin()));
    }
    for (const auto& c : e.at("classes").get<std::vector<std::string>>()) sp.classes.insert(c);
    sp.use_synonyms = e.at("use_synonyms").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed splits.json: " + std::string(e.what()));
  }
  if (sp.views.empty()) throw UsageError("split " + to_string(tag) + " has no views");
  return sp;
}

const ViewRecord& find_view(std::span<const ViewRecord> views, const std::string& id) {
  for (const auto& v : views)
    if (v.id == id) return v;
  throw UsageError("no view named " + id);
}

Checkpoint load_checkpoint_checked(const std::string& path, std::optional<Task> task) {
  if (path.empty()) throw UsageError("--checkpoint is required");
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  auto ck = load_checkpoint(path);
  if (task && ck.task != to_string(*task))
    throw UsageError("checkpoint " + path + " was trained for task " + ck.task);
  return ck;
}

// ---------------------------------------------------------------------------
// Commands

struct GenFlags {
  std::string out, config;
  std::optional<int> count;
  std::optional<std::uint64_t> seed;
};

int cmd_gen(const GenFlags& f) {
  GenConfig cfg = f.config.empty() ? GenConfig{} : gen_config_from_json(read_json_file(f.config));
  if (f.count) cfg.count = *f.count;
  if (f.seed) cfg.seed = *f.seed;
  if (cfg.count < 1) throw UsageError("--count must be >= 1");
  const fs::path out = f.out;
  const fs::path staging = out / ".staging";
  fs::create_directories(staging);
  std::vector<ViewRecord> views;
  for (int i = cfg.first_index; i < cfg.first_index + cfg.count; ++i) {
    auto rec = make_view_record(view_id(i), SeededRng::mix(cfg.seed ^ SeededRng::mix(i)), cfg.dataset);
    fs::remove_all(staging / rec.id);
    write_view_record(staging, rec, cfg.dataset.descriptions.eval_spec);
    fs::remove_all(out / rec.id);
    fs::rename(staging / rec.id, out / rec.id);
    views.push_back(std::move(rec));
  }
  fs::remove_all(staging);
  SeededRng split_rng(SeededRng::mix(cfg.seed ^ 0x73706c6974ULL));
  const auto splits = make_splits(views, cfg.split, split_rng);
  write_json(out / "splits.json", splits_json(splits, views, cfg.split));
  write_manifest(out, "gen", f.config, cfg.seed, gen_config_to_json(cfg));
  std::cout << "wrote " << views.size() << " views to " << out.string() << "\n";
  return 0;
}

struct RelevancyFlags {
  std::string data, out;
  ProviderFlags provider;
  bool with_synonyms = false;
};

int cmd_relevancy(const RelevancyFlags& f) {
  const auto views = load_dataset(f.data);
  const auto provider = f.provider.make();
  const fs::path out = f.out;
  fs::create_directories(out);
  for (const auto& v : views) {
    std::vector<std::string> labels = v.scene.class_labels();
    if (f.with_synonyms)
      for (const auto& o : v.scene.objects)
        for (const auto& s : o.synonyms)
          if (std::find(labels.begin(), labels.end(), s) == labels.end()) labels.push_back(s);
    const auto maps = detail::fetch(*provider, observation_of(v), labels);
    write_rmap(out / (v.id + ".rmap"), maps);
  }
  json eff = f.provider.to_json();
  eff["data"] = f.data;
  eff["with_synonyms"] = f.with_synonyms;
  write_manifest(out, "relevancy", "", std::nullopt, eff);
  std::cout << "wrote relevancy for " << views.size() << " views to " << out.string() << "\n";
  return 0;
}

struct TrainFlags {
  std::string task, data, out, config, resume, split = "train";
  std::optional<std::uint64_t> seed, checkpoint_every;
  std::optional<int> epochs;
  std::optional<double> lr_max;
  ProviderFlags provider;
};

int cmd_train(const TrainFlags& f) {
  const Task task = parse_task(f.task);
  TrainConfig cfg = TrainConfig::desk(task);
  if (!f.config.empty()) {
    json j = read_json_file(f.config);
    if (j.is_object() && j.contains("task") && j["task"] != f.task)
      throw UsageError("config task " + j["task"].dump() + " disagrees with --task " + f.task);
    cfg = train_config_from_json(j, cfg);
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.lr_max) cfg.schedule.lr_max = *f.lr_max;
  if (f.checkpoint_every) cfg.checkpoint_every = *f.checkpoint_every;
  cfg.validate();

  const auto all = load_dataset(f.data);
  const Split split = load_split(f.data, all, parse_split_tag(f.split));
  std::vector<ViewRecord> views;
  for (auto i : split.views) views.push_back(all[i]);
  const auto provider = f.provider.make();

  std::optional<Checkpoint> resume;
  if (!f.resume.empty()) resume = load_checkpoint_checked(f.resume, task);

  const fs::path out = f.out;
  fs::create_directories(out / "checkpoints");
  json eff = train_config_to_json(cfg);
  eff["data"] = f.data;
  eff["split"] = f.split;
  eff["resume"] = f.resume.empty() ? json() : json(f.resume);
  eff["relevancy"] = f.provider.to_json();
  write_json(out / "config.json", train_config_to_json(cfg));
  write_manifest(out, "train", f.config, cfg.seed, eff);

  std::ofstream metrics(out / "metrics.ndjson", resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + (out / "metrics.ndjson").string());
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) { metrics << to_json(r).dump() << '\n' << std::flush; };
  hooks.on_checkpoint = [&](const Checkpoint& ck) {
    char name[48];
    std::snprintf(name, sizeof name, "step_%08llu.sabs", static_cast<unsigned long long>(ck.step));
    save_checkpoint(out / "checkpoints" / name, ck);
  };
  const auto final_ck = train(views, cfg, *provider, resume ? &*resume : nullptr, hooks);
  save_checkpoint(out / "model.sabs", final_ck);
  std::cout << "trained " << final_ck.step << " steps; model at " << (out / "model.sabs").string() << "\n";
  return 0;
}

struct EvalFlags {
  std::string task, data, out, checkpoint, split = "novel_room";
  double threshold = kDefaultThreshold;
  ProviderFlags provider;
};

int cmd_eval(const EvalFlags& f) {
  const Task task = parse_task(f.task);
  if (!(f.threshold > 0 && f.threshold < 1)) throw UsageError("--threshold must lie in (0, 1)");
  const auto ck = load_checkpoint_checked(f.checkpoint, task);
  const auto views = load_dataset(f.data);
  const Split split = load_split(f.data, views, parse_split_tag(f.split));
  const auto provider = f.provider.make();
  const Model model = Model::from(ck);
  const fs::path out = f.out;
  fs::create_directories(out);
  EvalReport rep;
  if (task == Task::Ovssc) {
    ModelOvsscPredictor p(model, *provider);
    rep = eval_ovssc(p, views, split, f.threshold);
    io::write_file_atomic(out / "confusion.csv", confusion_csv(rep));
  } else {
    ModelVoolPredictor p(model, *provider);
    rep = eval_vool(p, views, split, f.threshold);
  }
  write_json(out / "report.json", report_to_json(rep));
  io::write_file_atomic(out / "report.csv", report_csv(rep));
  json eff{{"task", f.task},       {"data", f.data},           {"split", f.split},
           {"checkpoint", f.checkpoint}, {"threshold", f.threshold}, {"relevancy", f.provider.to_json()}};
  write_manifest(out, "eval", "", std::nullopt, eff);
  std::cout << to_string(task) << " " << f.split << " mean IoU " << rep.mean << "\n";
  return 0;
}

struct ExportFlags {
  std::string what, data, view, out, checkpoint, label, format = "ply";
  std::string target, relation, reference;
  int description = 0;
  double threshold = kDefaultThreshold;
  ProviderFlags provider;
};

int cmd_export(const ExportFlags& f) {
  if (f.format != "ply") throw UsageError("unsupported --format " + f.format);
  if (!(f.threshold > 0 && f.threshold < 1)) throw UsageError("--threshold must lie in (0, 1)");
  const auto views = load_dataset(f.data);
  const ViewRecord& view = find_view(views, f.view);
  const auto provider = f.provider.make();
  const Observation obs = observation_of(view);
  std::string ply;
  json eff{{"what", f.what}, {"data", f.data}, {"view", f.view}, {"format", f.format},
           {"relevancy", f.provider.to_json()}};
  if (f.what == "relevancy-cloud") {
    if (f.label.empty()) throw UsageError("--what relevancy-cloud needs --label");
    const std::array<std::string, 1> labels{f.label};
    const auto maps = detail::fetch(*provider, obs, labels);
    const auto cloud = project_relevancy(maps[0], view.depth, view.intrinsics, view.pose);
    ply = ply_text(cloud.positions, cloud.features);
    eff["label"] = f.label;
  } else if (f.what == "semantic") {
    const auto ck = load_checkpoint_checked(f.checkpoint, Task::Ovssc);
    const Model model = Model::from(ck);
    const auto labels = view.scene.class_labels();
    const auto r = ovssc_infer(obs, labels, *provider, model, GridSpec::cube(32), f.threshold);
    ply = ply_from_semantic(r);
    eff["checkpoint"] = f.checkpoint;
    eff["threshold"] = f.threshold;
    eff["labels"] = labels;
  } else if (f.what == "vool") {
    const auto ck = load_checkpoint_checked(f.checkpoint, Task::Vool);
    const Model model = Model::from(ck);
    Description desc;
    if (!f.target.empty() || !f.reference.empty() || !f.relation.empty()) {
      if (f.target.empty() || f.reference.empty() || f.relation.empty())
        throw UsageError("--target, --relation and --reference go together");
      desc = {f.target, parse_relation(f.relation), f.reference};
    } else {
      if (f.description < 0 || f.description >= static_cast<int>(view.descriptions.size()))
        throw UsageError("--description out of range for view " + view.id);
      desc = view.descriptions[f.description].desc;
    }
    const auto r = vool_infer(obs, desc, *provider, model, GridSpec::cube(32), f.threshold);
    ply = ply_from_volume(r.prob, f.threshold);
    eff["checkpoint"] = f.checkpoint;
    eff["threshold"] = f.threshold;
    eff["description"] = {{"target", desc.target_label},
                          {"relation", to_string(desc.relation)},
                          {"reference", desc.ref_label}};
  } else {
    throw UsageError("unknown --what " + f.what);
  }
  const fs::path out = f.out;
  fs::create_directories(out);
  std::string stem = f.what + "_" + view.id;
  io::write_file_atomic(out / (stem + ".ply"), ply);
  write_manifest(out, "export", "", std::nullopt, eff);
  std::cout << "wrote " << (out / (stem + ".ply")).string() << "\n";
  return 0;
}

int run(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"Relevancy-driven 3D scene completion and object localization on synthetic scenes", "semabs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SEMABS_VERSION);

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "generate synthetic scenes, views and ground truth");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--count", gen.count, "number of views");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--config", gen.config, "JSON generation config");

  RelevancyFlags rel;
  auto* r = app.add_subcommand("relevancy", "write one RMAP file per view");
  r->add_option("--data", rel.data, "dataset directory")->required();
  r->add_option("--out", rel.out, "output directory")->required();
  r->add_flag("--with-synonyms", rel.with_synonyms, "also emit maps for synonym labels");
  rel.provider.add(r);

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "train the 3D module");
  t->add_option("--task", tr.task, "ovssc or vool")->required();
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_option("--config", tr.config, "JSON training config");
  t->add_option("--resume", tr.resume, "checkpoint to continue from");
  t->add_option("--split", tr.split, "split to train on");
  t->add_option("--seed", tr.seed, "training seed");
  t->add_option("--epochs", tr.epochs, "number of epochs");
  t->add_option("--lr-max", tr.lr_max, "peak learning rate");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "steps between checkpoints (0: final only)");
  tr.provider.add(t);

  EvalFlags ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  e->add_option("--task", ev.task, "ovssc or vool")->required();
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  e->add_option("--out", ev.out, "output directory")->required();
  e->add_option("--split", ev.split, "train, novel_room, novel_synonym or novel_class");
  e->add_option("--threshold", ev.threshold, "empty threshold");
  ev.provider.add(e);

  ExportFlags ex;
  auto* x = app.add_subcommand("export", "export predictions or relevancy clouds as PLY");
  x->add_option("--what", ex.what, "semantic, vool or relevancy-cloud")
      ->required()
      ->check(CLI::IsMember({"semantic", "vool", "relevancy-cloud"}));
  x->add_option("--data", ex.data, "dataset directory")->required();
  x->add_option("--view", ex.view, "view id")->required();
  x->add_option("--out", ex.out, "output directory")->required();
  x->add_option("--format", ex.format, "output format (ply)");
  x->add_option("--checkpoint", ex.checkpoint, "model checkpoint (semantic, vool)");
  x->add_option("--label", ex.label, "label (relevancy-cloud)");
  x->add_option("--description", ex.description, "index of the view's description (vool)");
  x->add_option("--target", ex.target, "target label (vool)");
  x->add_option("--relation", ex.relation, "relation (vool)");
  x->add_option("--reference", ex.reference, "reference label (vool)");
  x->add_option("--threshold", ex.threshold, "occupancy threshold");
  ex.provider.add(x);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  if (*g) return cmd_gen(gen);
  if (*r) return cmd_relevancy(rel);
  if (*t) return cmd_train(tr);
  if (*e) return cmd_eval(ev);
  return cmd_export(ex);
}

}  // namespace
}  // namespace semabs::cli

int main(int argc, char** argv) {
  using namespace semabs;
  retain_heap_memory();
  try {
    return cli::run(argc, argv);
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
