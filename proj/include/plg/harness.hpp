// Dataset management, end-to-end pipeline orchestration and the evaluation
// measures: per-scenario prediction records, E_i subset scoring, diffusion
// depth selection and line-oriented report files.
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plg/completion.hpp"
#include "plg/graspkb.hpp"
#include "plg/localshape.hpp"
#include "plg/manifold.hpp"
#include "plg/parts.hpp"

namespace plg::harness {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Ground truth
//
// The tables below are authored by hand against the affordance table and the
// dominant rows of the grasp model. Scenario ground truth is derived from
// these tables only — never by querying the knowledge base — so a KB edit
// that shifts affordances shows up as an eval regression instead of silently
// moving the ground truth along with it. A test cross-checks the affordance
// table against the KB.

inline bool gt_affords(Category c, Task t, Containment fill) {
  const bool tool = is_tool_category(c);
  const bool full = fill == Containment::full;
  const bool canister = c == Category::can || c == Category::bottle;
  const bool kitchen = c == Category::pot || c == Category::pan;
  switch (t) {
    case Task::pass:
      return !(c == Category::pan && full);
    case Task::ppOn:
      return true;
    case Task::ppInSideways:
      return tool;
    case Task::pourOut:
      return !tool && full && !kitchen;
    case Task::pourIn:
      return !tool && !full && !canister;
    case Task::ppInUpright:
      return !tool;
    case Task::ppInUpsidedown:
      return !tool && !full;
  }
  return false;
}

inline std::vector<Task> gt_task_set(Category c, Containment fill) {
  std::vector<Task> out;
  for (Task t : all_tasks())
    if (gt_affords(c, t, fill)) out.push_back(t);
  return out;
}

// Parts the object genuinely has, by construction of the synthetic shapes.
inline std::vector<PartLabel> gt_part_set(Category c) {
  if (is_tool_category(c))
    return {PartLabel::handle, PartLabel::usable_area};
  std::vector<PartLabel> v = {PartLabel::top, PartLabel::middle,
                              PartLabel::bottom};
  if (default_spec(c).handle_count > 0) v.push_back(PartLabel::handle);
  return v;
}

// Acceptable pre-grasp parts per category and task, assuming the canonical
// resting pose (containers upright, tools on their side).
inline std::vector<PartLabel> gt_pregrasp_set(Category c, Task t,
                                              Containment fill) {
  using PL = PartLabel;
  const bool full = fill == Containment::full;
  if (is_tool_category(c)) {
    if (t == Task::pass) return {PL::usable_area, PL::handle};
    return {PL::handle, PL::usable_area};
  }
  const bool canister = c == Category::can || c == Category::bottle;
  const bool kitchen = c == Category::pot || c == Category::pan;
  switch (t) {
    case Task::pass:
      if (kitchen) return {PL::middle, PL::handle};
      if (canister) return full ? std::vector<PL>{PL::middle}
                                : std::vector<PL>{PL::top, PL::middle};
      return full ? std::vector<PL>{PL::middle}
                  : std::vector<PL>{PL::top, PL::middle};
    case Task::ppOn:
      if (kitchen) return {PL::middle, PL::handle};
      if (canister) return {PL::top, PL::middle};
      return full ? std::vector<PL>{PL::middle}
                  : std::vector<PL>{PL::top, PL::middle};
    case Task::ppInUpright:
    case Task::ppInUpsidedown:
      if (kitchen) return {PL::middle, PL::handle};
      if (canister) return {PL::middle, PL::bottom};
      return {PL::middle, PL::bottom};
    case Task::pourIn:
      return kitchen ? std::vector<PL>{PL::middle, PL::handle}
                     : std::vector<PL>{PL::middle};
    case Task::pourOut:
      return {PL::middle};
    case Task::ppInSideways:
      return {PL::middle};
  }
  return {PL::middle};
}

// ---------------------------------------------------------------------------
// Scenarios and datasets

struct Scenario {
  std::string id;
  std::string cloud_file;  // empty while the dataset lives in memory
  Category gt_category = Category::cup;
  Pose gt_pose = Pose::upright;
  Containment gt_containment = Containment::empty;
  std::vector<PartLabel> gt_parts;  // unique, enum order
  std::vector<Task> gt_tasks;
  std::map<Task, std::vector<PartLabel>> gt_pregrasp;
  Task eval_task = Task::pass;  // task used when the task is given
  DetectionMode mode = DetectionMode::semi;
};

struct Dataset {
  std::vector<Scenario> scenarios;
  std::vector<PointCloud> clouds;  // parallel to scenarios
};

struct DatasetOptions {
  int scenarios = 100;
  std::uint64_t seed = 1;
  DetectionMode mode = DetectionMode::semi;
  bool degrade = false;  // half view + sensor noise
  double pitch = 0.005;
};

namespace detail {

// Category mix for one 25-scenario cycle. Handled kitchenware dominates, as
// it does in household object sets; every category appears.
inline const std::array<Category, 25>& scenario_mix() {
  static const std::array<Category, 25> mix = {
      Category::cup,     Category::pot,    Category::cup,
      Category::glass,   Category::hammer, Category::cup,
      Category::pan,     Category::bowl,   Category::knife,
      Category::pot,     Category::cup,    Category::can,
      Category::screwdriver, Category::pot, Category::bottle,
      Category::cup,     Category::pan,    Category::glass,
      Category::cooking_tool, Category::bowl, Category::knife,
      Category::can,     Category::hammer, Category::bottle,
      Category::screwdriver};
  return mix;
}

inline void sort_labels(std::vector<PartLabel>& v) {
  std::sort(v.begin(), v.end(),
            [](PartLabel a, PartLabel b) { return int(a) < int(b); });
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

inline Dataset make_dataset(const DatasetOptions& opt = {}) {
  if (opt.scenarios < 1) throw InputError("dataset needs at least 1 scenario");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> scale(0.88, 1.12);
  std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> elev(0.25, 0.6);

  Dataset ds;
  std::map<Category, int> per_cat;
  for (int i = 0; i < opt.scenarios; ++i) {
    Category cat = detail::scenario_mix()[i % 25];
    int nth = per_cat[cat]++;

    SyntheticSpec spec = default_spec(cat);
    for (int a = 0; a < 3; ++a) spec.dims(a) *= scale(rng);
    bool container = !is_tool_category(cat);
    spec.contains = container && nth % 2 == 1 ? Containment::full
                                              : Containment::empty;
    spec.pitch = opt.pitch;
    if (opt.degrade) {
      spec.noise_sigma = 0.0015;
      double az = angle(rng), el = elev(rng);
      spec.view_dir =
          Vec3(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el),
               std::sin(el));
    }

    std::ostringstream id;
    id << "s" << std::setw(3) << std::setfill('0') << i << "_"
       << to_string(cat);

    PointCloud cloud = generate_object(spec, opt.seed * 1000 + i);
    cloud.meta.id = id.str();

    Scenario sc;
    sc.id = id.str();
    sc.gt_category = cat;
    sc.gt_pose = spec.pose;
    sc.gt_containment = spec.contains;
    sc.gt_parts = gt_part_set(cat);
    detail::sort_labels(sc.gt_parts);
    sc.gt_tasks = gt_task_set(cat, spec.contains);
    for (Task t : sc.gt_tasks) {
      std::vector<PartLabel> parts = gt_pregrasp_set(cat, t, spec.contains);
      // keep only parts the object actually has
      std::vector<PartLabel> kept;
      for (PartLabel l : parts)
        if (std::find(sc.gt_parts.begin(), sc.gt_parts.end(), l) !=
            sc.gt_parts.end())
          kept.push_back(l);
      if (kept.empty()) kept.push_back(PartLabel::middle);
      sc.gt_pregrasp[t] = kept;
    }
    sc.eval_task = sc.gt_tasks.front();
    for (Task t : sc.gt_tasks)
      if (t == Task::pass) sc.eval_task = t;
    sc.mode = opt.mode;

    ds.scenarios.push_back(std::move(sc));
    ds.clouds.push_back(std::move(cloud));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset persistence: one cloud file per scenario plus a manifest with the
// ground truth, one JSON record per line.

inline void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw InputError("cannot write manifest in " + dir);
  for (std::size_t i = 0; i < ds.scenarios.size(); ++i) {
    const Scenario& sc = ds.scenarios[i];
    std::string file = sc.id + ".cloud";
    save_cloud(ds.clouds[i], (fs::path(dir) / file).string());
    json j;
    j["id"] = sc.id;
    j["cloud"] = file;
    j["category"] = to_string(sc.gt_category);
    j["pose"] = to_string(sc.gt_pose);
    j["containment"] = to_string(sc.gt_containment);
    j["mode"] = to_string(sc.mode);
    j["parts"] = json::array();
    for (PartLabel l : sc.gt_parts) j["parts"].push_back(to_string(l));
    j["tasks"] = json::array();
    for (Task t : sc.gt_tasks) j["tasks"].push_back(task_id(t));
    j["eval_task"] = task_id(sc.eval_task);
    json pg = json::object();
    for (const auto& [t, parts] : sc.gt_pregrasp) {
      json arr = json::array();
      for (PartLabel l : parts) arr.push_back(to_string(l));
      pg[task_id(t)] = std::move(arr);
    }
    j["pregrasp"] = std::move(pg);
    manifest << j.dump() << "\n";
  }
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw InputError("cannot open manifest in " + dir);
  Dataset ds;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw InputError(dir + "/manifest.jsonl:" + std::to_string(lineno) +
                     ": " + what);
  };
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(e.what());
    }
    Scenario sc;
    try {
      sc.id = j.at("id").get<std::string>();
      sc.cloud_file =
          (fs::path(dir) / j.at("cloud").get<std::string>()).string();
      auto cat = category_from(j.at("category").get<std::string>());
      auto pose = pose_from(j.at("pose").get<std::string>());
      if (!cat || !pose) fail("bad category or pose");
      sc.gt_category = *cat;
      sc.gt_pose = *pose;
      sc.gt_containment = j.at("containment").get<std::string>() == "full"
                              ? Containment::full
                              : Containment::empty;
      std::string mode = j.at("mode").get<std::string>();
      sc.mode = mode == "semi"   ? DetectionMode::semi
                : mode == "real" ? DetectionMode::real
                                 : DetectionMode::noisy;
      for (const auto& s : j.at("parts")) {
        auto l = part_label_from(s.get<std::string>());
        if (!l) fail("bad part label");
        sc.gt_parts.push_back(*l);
      }
      for (const auto& s : j.at("tasks")) {
        auto t = task_from(s.get<std::string>());
        if (!t) fail("bad task");
        sc.gt_tasks.push_back(*t);
      }
      auto et = task_from(j.at("eval_task").get<std::string>());
      if (!et) fail("bad eval task");
      sc.eval_task = *et;
      for (const auto& [key, arr] : j.at("pregrasp").items()) {
        auto t = task_from(key);
        if (!t) fail("bad pregrasp task key");
        std::vector<PartLabel> parts;
        for (const auto& s : arr) {
          auto l = part_label_from(s.get<std::string>());
          if (!l) fail("bad pregrasp part");
          parts.push_back(*l);
        }
        sc.gt_pregrasp[*t] = std::move(parts);
      }
    } catch (const json::exception& e) {
      fail(e.what());
    }
    ds.clouds.push_back(load_cloud(sc.cloud_file));
    ds.scenarios.push_back(std::move(sc));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Graph database for the category prior

inline PointCloud downsample(const PointCloud& cloud,
                             std::size_t max_points) {
  if (max_points == 0 || cloud.size() <= max_points) return cloud;
  PointCloud out;
  out.table = cloud.table;
  out.meta = cloud.meta;
  double stride = double(cloud.size()) / double(max_points);
  for (std::size_t k = 0; k < max_points; ++k)
    out.pts.push_back(cloud.pts[std::size_t(double(k) * stride)]);
  return out;
}

inline std::vector<ObjectGraph> database_graphs(const Dataset& ds,
                                                int max_nodes = 300,
                                                int k = 4) {
  std::vector<ObjectGraph> graphs;
  graphs.reserve(ds.clouds.size());
  for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
    ObjectGraph g = build_knn_graph(downsample(ds.clouds[i], max_nodes), k);
    g.id = ds.scenarios[i].id;
    g.category = ds.scenarios[i].gt_category;
    graphs.push_back(std::move(g));
  }
  return graphs;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  kb::KnowledgeBase kb = kb::KnowledgeBase::load();
  kb::Theory theory = kb::Theory::specific;
  bool task_given = false;  // use the scenario's eval task
  enum class Prior { uniform, manifold } prior = Prior::uniform;
  // non-owning; required when prior == manifold
  const std::vector<ObjectGraph>* database = nullptr;
  KernelParams kernel;
  // non-owning; grasp-point ranking is skipped when absent
  const TrainedClassifier* classifier = nullptr;
  int graph_nodes = 300;
  double volume_depth = kDefaultVolumeDepth;
};

struct PredictionRecord {
  std::string scenario_id;
  bool failed = false;
  std::string error;

  SceneDescription scene;  // symbolic observation handed to the KB
  std::optional<Pose> pose_estimate;
  std::vector<PartLabel> detected_parts;  // unique, enum order
  CategoryDistribution prior{};           // prior fed to the category query
  bool prior_set = false;

  kb::CategoryResult category;
  kb::TaskResult task;
  kb::PregraspResult pregrasp;

  // grasp-point ranking inside the chosen part, (hypothesis index, P)
  std::vector<std::pair<int, double>> grasp_ranking;
  bool has_reachable_grasp = false;

  double completion_ms = 0.0;
  double total_ms = 0.0;
};

inline PredictionRecord run_pipeline(const PointCloud& cloud,
                                     const Scenario& sc,
                                     const PipelineConfig& cfg) {
  using clock = std::chrono::steady_clock;
  PredictionRecord rec;
  rec.scenario_id = sc.id;
  auto t0 = clock::now();
  auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  try {
    auto c0 = clock::now();
    CompletionResult res = complete_cloud(cloud);
    rec.completion_ms = ms(c0, clock::now());
    rec.pose_estimate = res.pose_estimate.pose;

    PartSegmentation seg = segment_parts(res);
    rec.scene = detection_confidences(seg, res, sc.mode);
    for (const auto& [label, p] : rec.scene.parts)
      rec.detected_parts.push_back(label);
    detail::sort_labels(rec.detected_parts);

    if (cfg.prior == PipelineConfig::Prior::manifold) {
      if (!cfg.database)
        throw InputError("pipeline: manifold prior needs a graph database");
      PointCloud qc;
      qc.table = res.completed.table;
      qc.meta = res.completed.meta;
      std::vector<PartLabel> labels;
      std::size_t n = res.completed.size();
      std::size_t want = std::min<std::size_t>(n, cfg.graph_nodes);
      double stride = double(n) / double(want);
      for (std::size_t k = 0; k < want; ++k) {
        std::size_t idx = std::size_t(double(k) * stride);
        qc.pts.push_back(res.completed.pts[idx]);
        labels.push_back(seg.assignment[idx]);
      }
      ObjectGraph query = build_knn_graph(qc, labels, cfg.kernel.k_nn);
      rec.prior = category_prior(query, *cfg.database, cfg.kernel);
      rec.prior_set = true;
      rec.scene.category_prior = rec.prior;
    }
    if (cfg.task_given) rec.scene.given_task = sc.eval_task;

    rec.category = kb::query_category(rec.scene, cfg.kb, cfg.theory);
    rec.task = kb::query_task(rec.scene, cfg.kb, cfg.theory);

    std::vector<PreGraspHypothesis> hyps = pre_grasp_hypotheses(seg);
    std::vector<PartLabel> reachable;
    for (const auto& h : hyps)
      if (h.reachable) reachable.push_back(h.part);
    detail::sort_labels(reachable);

    Task query_task = cfg.task_given ? sc.eval_task
                                     : rec.task.argmax.value_or(Task::pass);
    rec.pregrasp = kb::query_pregrasp(rec.scene, cfg.kb, query_task,
                                      cfg.theory, reachable);

    if (cfg.classifier && rec.pregrasp.feasible && rec.pregrasp.argmax) {
      std::vector<PreGraspHypothesis> chosen;
      std::vector<int> orig;
      for (std::size_t i = 0; i < hyps.size(); ++i)
        if (hyps[i].part == *rec.pregrasp.argmax && hyps[i].reachable) {
          chosen.push_back(hyps[i]);
          orig.push_back(int(i));
        }
      if (!chosen.empty()) {
        auto ranked = rank_grasps(*cfg.classifier, res.completed, chosen,
                                  cfg.volume_depth);
        rec.has_reachable_grasp = true;
        for (const auto& g : ranked)
          rec.grasp_ranking.emplace_back(orig[g.hypothesis_index],
                                         g.probability);
      }
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.total_ms = ms(t0, clock::now());
  return rec;
}

inline std::vector<PredictionRecord> run_all(const Dataset& ds,
                                             const PipelineConfig& cfg) {
  if (ds.clouds.size() != ds.scenarios.size())
    throw InputError("dataset clouds and scenarios are misaligned");
  std::vector<PredictionRecord> out;
  out.reserve(ds.scenarios.size());
  for (std::size_t i = 0; i < ds.scenarios.size(); ++i)
    out.push_back(run_pipeline(ds.clouds[i], ds.scenarios[i], cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalSetting {
  int i = 0;  // E_i: |Pr| = |Gt| - i, floored at 1
};

enum class TaskMode { given, inferred };

inline const char* to_string(TaskMode m) {
  return m == TaskMode::given ? "given" : "inferred";
}

struct Accuracy {
  int successes = 0;
  int tries = 0;
  double percent() const {
    return tries > 0 ? 100.0 * successes / tries : 0.0;
  }
};

struct ScenarioOutcome {
  std::string id;
  bool failed = false;
  bool category_ok = false;
  bool pose_ok = false;
  bool parts_ok = false;
  bool task_ok = false;
  bool pregrasp_ok = false;
  bool execution_counted = false;
};

struct Report {
  EvalSetting setting;
  TaskMode task_mode = TaskMode::inferred;
  Accuracy category, pose, parts, task, pregrasp, execution;
  int clamp_warnings = 0;
  std::vector<ScenarioOutcome> outcomes;
  std::map<std::string, std::string> config;  // echo of the run parameters
  std::uint64_t seed = 0;
};

namespace detail {

// indices of the k largest values; ties broken toward the lower index so
// results do not depend on sort internals
inline std::vector<int> top_indices(const std::vector<double>& vals, int k) {
  std::vector<int> idx(vals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (vals[a] != vals[b]) return vals[a] > vals[b];
    return a < b;
  });
  idx.resize(std::min<std::size_t>(idx.size(), std::size_t(k)));
  return idx;
}

}  // namespace detail

inline Report evaluate(const std::vector<PredictionRecord>& records,
                       const std::vector<Scenario>& scenarios,
                       EvalSetting setting,
                       TaskMode task_mode = TaskMode::inferred,
                       std::map<std::string, std::string> config = {},
                       std::uint64_t seed = 0) {
  if (records.size() != scenarios.size())
    throw InputError("evaluate: records do not align with scenarios");
  if (setting.i < 0) throw InputError("evaluate: negative setting index");

  Report rep;
  rep.setting = setting;
  rep.task_mode = task_mode;
  rep.config = std::move(config);
  rep.seed = seed;

  for (std::size_t s = 0; s < records.size(); ++s) {
    const PredictionRecord& r = records[s];
    const Scenario& sc = scenarios[s];
    ScenarioOutcome oc;
    oc.id = sc.id;
    oc.failed = r.failed;

    rep.category.tries++;
    rep.pose.tries++;
    rep.parts.tries++;
    rep.task.tries++;
    rep.pregrasp.tries++;

    if (!r.failed) {
      // a tied argmax counts as a false positive, never a success
      oc.category_ok = !r.category.tie && r.category.argmax &&
                       *r.category.argmax == sc.gt_category;
      oc.pose_ok = r.pose_estimate && *r.pose_estimate == sc.gt_pose;
      oc.parts_ok = r.detected_parts == sc.gt_parts;

      {
        int k = int(sc.gt_tasks.size()) - setting.i;
        if (k < 1) {
          k = 1;
          if (setting.i >= int(sc.gt_tasks.size())) rep.clamp_warnings++;
        }
        std::vector<double> probs(r.task.probs.begin(), r.task.probs.end());
        bool ok = true;
        for (int ti : detail::top_indices(probs, k))
          if (std::find(sc.gt_tasks.begin(), sc.gt_tasks.end(), Task(ti)) ==
              sc.gt_tasks.end())
            ok = false;
        oc.task_ok = ok;
      }

      {
        // inferred mode scores against the predicted task; a missing or
        // unlisted prediction is an automatic miss
        std::optional<Task> t;
        if (task_mode == TaskMode::given)
          t = sc.eval_task;
        else if (r.task.argmax)
          t = *r.task.argmax;
        auto it = t ? sc.gt_pregrasp.find(*t) : sc.gt_pregrasp.end();
        if (it != sc.gt_pregrasp.end() && r.pregrasp.feasible &&
            !r.pregrasp.probs.empty()) {
          const auto& gt = it->second;
          int k = int(gt.size()) - setting.i;
          if (k < 1) {
            k = 1;
            if (setting.i >= int(gt.size())) rep.clamp_warnings++;
          }
          std::vector<double> probs;
          for (const auto& [label, p] : r.pregrasp.probs)
            probs.push_back(p);
          bool ok = true;
          for (int pi : detail::top_indices(probs, k)) {
            PartLabel l = r.pregrasp.probs[pi].first;
            if (std::find(gt.begin(), gt.end(), l) == gt.end()) ok = false;
          }
          oc.pregrasp_ok = ok;
        }
      }

      oc.execution_counted = r.has_reachable_grasp;
      if (oc.execution_counted) {
        rep.execution.tries++;
        if (oc.pregrasp_ok) rep.execution.successes++;
      }
    }

    rep.category.successes += oc.category_ok;
    rep.pose.successes += oc.pose_ok;
    rep.parts.successes += oc.parts_ok;
    rep.task.successes += oc.task_ok;
    rep.pregrasp.successes += oc.pregrasp_ok;
    rep.outcomes.push_back(std::move(oc));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Diffusion depth selection

struct SelectTResult {
  int T = 15;
  std::vector<double> accuracy;  // leave-one-out accuracy per T
  bool degenerate = false;       // nothing separated; fell back to max T
};

inline SelectTResult select_T(const std::vector<ObjectGraph>& database,
                              int max_T = 15,
                              const KernelParams& base = {}) {
  if (database.empty()) throw InputError("select_T: empty database");
  std::map<std::string, Category> categories;
  std::set<Category> distinct;
  for (const auto& g : database) {
    if (!g.category)
      throw InputError("select_T: graph '" + g.id + "' has no category");
    if (!categories.emplace(g.id, *g.category).second)
      throw InputError("select_T: duplicate graph id '" + g.id + "'");
    distinct.insert(*g.category);
  }
  if (distinct.size() < 2)
    throw InputError("select_T: need at least two categories");

  KernelParams params = base;
  params.T_iters = max_T;
  auto prefixes = propagation_kernel_prefixes(database, params);

  SelectTResult out;
  double best = -1.0;
  for (int t = 0; t <= max_T; ++t) {
    int hits = 0;
    for (const auto& g : database) {
      CategoryPrior prior =
          prior_from_kernel(prefixes[t], g.id, categories, params.top_n);
      int arg = -1;
      bool tie = false;
      for (int c = 0; c < kNumCategories; ++c) {
        if (arg < 0 || prior[c] > prior[arg] + 1e-12) {
          arg = c;
          tie = false;
        } else if (std::abs(prior[c] - prior[arg]) <= 1e-12 && c != arg) {
          tie = true;
        }
      }
      if (!tie && arg == int(*g.category)) hits++;
    }
    double acc = double(hits) / double(database.size());
    out.accuracy.push_back(acc);
    if (acc >= best) {  // >= keeps the largest T on ties
      best = acc;
      out.T = t;
    }
  }
  if (best <= 0.0) {
    out.T = max_T;
    out.degenerate = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report files: one JSON record per line — a header, one line per scenario,
// and a closing summary.

inline void save_report(const Report& rep, std::ostream& os) {
  json head;
  head["type"] = "header";
  head["setting"] = rep.setting.i;
  head["task_mode"] = to_string(rep.task_mode);
  head["seed"] = rep.seed;
  head["clamp_warnings"] = rep.clamp_warnings;
  head["config"] = rep.config;
  os << head.dump() << "\n";
  for (const auto& oc : rep.outcomes) {
    json j;
    j["type"] = "scenario";
    j["id"] = oc.id;
    j["failed"] = oc.failed;
    j["category"] = oc.category_ok;
    j["pose"] = oc.pose_ok;
    j["parts"] = oc.parts_ok;
    j["task"] = oc.task_ok;
    j["pregrasp"] = oc.pregrasp_ok;
    j["execution_counted"] = oc.execution_counted;
    os << j.dump() << "\n";
  }
  json sum;
  sum["type"] = "summary";
  auto pack = [](const Accuracy& a) {
    return json::array({a.successes, a.tries});
  };
  sum["category"] = pack(rep.category);
  sum["pose"] = pack(rep.pose);
  sum["parts"] = pack(rep.parts);
  sum["task"] = pack(rep.task);
  sum["pregrasp"] = pack(rep.pregrasp);
  sum["execution"] = pack(rep.execution);
  os << sum.dump() << "\n";
}

inline Report load_report(std::istream& is) {
  Report rep;
  std::string line;
  int lineno = 0;
  bool have_header = false, have_summary = false;
  auto fail = [&](const std::string& what) {
    throw InputError("report line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        rep.setting.i = j.at("setting").get<int>();
        rep.task_mode = j.at("task_mode").get<std::string>() == "given"
                            ? TaskMode::given
                            : TaskMode::inferred;
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.clamp_warnings = j.at("clamp_warnings").get<int>();
        for (const auto& [k, v] : j.at("config").items())
          rep.config[k] = v.get<std::string>();
        have_header = true;
      } else if (type == "scenario") {
        ScenarioOutcome oc;
        oc.id = j.at("id").get<std::string>();
        oc.failed = j.at("failed").get<bool>();
        oc.category_ok = j.at("category").get<bool>();
        oc.pose_ok = j.at("pose").get<bool>();
        oc.parts_ok = j.at("parts").get<bool>();
        oc.task_ok = j.at("task").get<bool>();
        oc.pregrasp_ok = j.at("pregrasp").get<bool>();
        oc.execution_counted = j.at("execution_counted").get<bool>();
        rep.outcomes.push_back(std::move(oc));
      } else if (type == "summary") {
        auto unpack = [&](const char* key, Accuracy& a) {
          a.successes = j.at(key).at(0).get<int>();
          a.tries = j.at(key).at(1).get<int>();
        };
        unpack("category", rep.category);
        unpack("pose", rep.pose);
        unpack("parts", rep.parts);
        unpack("task", rep.task);
        unpack("pregrasp", rep.pregrasp);
        unpack("execution", rep.execution);
        have_summary = true;
      } else {
        fail("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      fail(e.what());
    }
  }
  if (!have_header) fail("missing header record");
  if (!have_summary) fail("missing summary record");
  return rep;
}

}  // namespace plg::harness
