// Command-line front end: dataset generation, the geometric stages, kernel
// priors, knowledge-base queries, grasp-point training/ranking and the full
// pipeline/evaluation loop.  Exit codes: 0 success, 2 input error, 3
// inference error.

#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "plg/harness.hpp"

using namespace plg;
namespace hn = plg::harness;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// small shared helpers

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(what + ": not a number: '" + s + "'");
  }
}

// `key = value` lines; '#' starts a comment, blank lines ignored
std::vector<std::pair<std::string, std::string>> parse_kv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected 'key = value'");
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  return out;
}

DetectionMode mode_from(const std::string& s) {
  if (s == "semi") return DetectionMode::semi;
  if (s == "real") return DetectionMode::real;
  if (s == "noisy") return DetectionMode::noisy;
  throw InputError("unknown detection mode '" + s +
                   "' (expected semi, real or noisy)");
}

kb::Theory theory_from_arg(const std::string& s) {
  auto t = kb::theory_from(s);
  if (!t) throw InputError("unknown theory '" + s + "'");
  return *t;
}

Task task_from_arg(const std::string& s) {
  auto t = task_from(s);
  if (!t) throw InputError("unknown task '" + s + "'");
  return *t;
}

bool bool_from(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InputError(what + ": expected a boolean, got '" + s + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  return os;
}

// Scene description files use the same `key = value` form:
//   object = mug1
//   pose = upright 0.5
//   containment = empty
//   part = top 0.8          (repeatable; repeat handle for two-handled pots)
//   prior = cup 0.56        (repeatable; omitted categories get 0)
//   task = t2               (optional: the task selected for execution)
//   task_prior = t2 0.3     (repeatable alternative to a fixed task)
SceneDescription parse_scene(const std::string& path) {
  SceneDescription scene;
  scene.parts.clear();
  bool have_prior = false, have_task_prior = false;
  CategoryDistribution prior{};
  TaskDistribution task_prior{};
  for (const auto& [key, value] : parse_kv(path)) {
    auto toks = split_ws(value);
    if (key == "object") {
      scene.object_id = value;
    } else if (key == "pose") {
      if (toks.empty()) throw InputError(path + ": empty pose");
      auto p = pose_from(toks[0]);
      if (!p) throw InputError(path + ": unknown pose '" + toks[0] + "'");
      scene.pose = *p;
      scene.pose_prob = toks.size() > 1 ? to_double(toks[1], "pose") : 1.0;
    } else if (key == "containment") {
      if (value == "empty")
        scene.containment = Containment::empty;
      else if (value == "full")
        scene.containment = Containment::full;
      else
        throw InputError(path + ": unknown containment '" + value + "'");
    } else if (key == "part") {
      if (toks.empty()) throw InputError(path + ": empty part");
      auto l = part_label_from(toks[0]);
      if (!l) throw InputError(path + ": unknown part '" + toks[0] + "'");
      double p = toks.size() > 1 ? to_double(toks[1], "part") : 1.0;
      scene.parts.push_back({*l, p});
    } else if (key == "prior") {
      if (toks.size() != 2) throw InputError(path + ": prior needs 'CAT P'");
      auto c = category_from(toks[0]);
      if (!c) throw InputError(path + ": unknown category '" + toks[0] + "'");
      prior[int(*c)] = to_double(toks[1], "prior");
      have_prior = true;
    } else if (key == "task") {
      scene.given_task = task_from_arg(value);
    } else if (key == "task_prior") {
      if (toks.size() != 2)
        throw InputError(path + ": task_prior needs 'TASK P'");
      task_prior[int(task_from_arg(toks[0]))] =
          to_double(toks[1], "task_prior");
      have_task_prior = true;
    } else {
      throw InputError(path + ": unknown scene key '" + key + "'");
    }
  }
  if (have_prior) scene.category_prior = prior;
  if (have_task_prior) scene.task_prior = task_prior;
  return scene;
}

// ---------------------------------------------------------------------------
// JSON views of the result structs

json dist_json(const CategoryDistribution& d) {
  json j = json::object();
  for (Category c : all_categories())
    if (d[int(c)] != 0.0) j[to_string(c)] = d[int(c)];
  return j;
}

json dist_json(const TaskDistribution& d) {
  json j = json::object();
  for (Task t : all_tasks())
    if (d[int(t)] != 0.0) j[task_id(t)] = d[int(t)];
  return j;
}

json record_json(const hn::PredictionRecord& r) {
  json j;
  j["id"] = r.scenario_id;
  j["failed"] = r.failed;
  if (r.failed) j["error"] = r.error;
  if (r.pose_estimate) j["pose"] = to_string(*r.pose_estimate);
  json parts = json::array();
  for (PartLabel l : r.detected_parts) parts.push_back(to_string(l));
  j["parts"] = std::move(parts);
  if (r.prior_set) j["prior"] = dist_json(r.prior);
  if (!r.failed) {
    j["category"] = {{"probs", dist_json(r.category.probs)},
                     {"argmax", r.category.argmax
                                    ? to_string(*r.category.argmax)
                                    : "none"},
                     {"tie", r.category.tie}};
    j["task"] = {{"probs", dist_json(r.task.probs)},
                 {"argmax", r.task.argmax ? task_id(*r.task.argmax) : "none"},
                 {"tie", r.task.tie}};
    json pg;
    pg["task"] = task_id(r.pregrasp.task);
    pg["feasible"] = r.pregrasp.feasible;
    pg["argmax"] =
        r.pregrasp.argmax ? to_string(*r.pregrasp.argmax) : "none";
    json pp = json::object();
    for (const auto& [l, p] : r.pregrasp.probs) {
      std::string name = to_string(l);
      pp[name] = pp.contains(name) ? pp[name].get<double>() + p : p;
    }
    pg["probs"] = std::move(pp);
    j["pregrasp"] = std::move(pg);
    json grasps = json::array();
    for (const auto& [idx, p] : r.grasp_ranking)
      grasps.push_back(json::array({idx, p}));
    j["grasps"] = std::move(grasps);
  }
  j["completion_ms"] = r.completion_ms;
  j["total_ms"] = r.total_ms;
  return j;
}

void print_sorted(std::vector<std::pair<std::string, double>> probs) {
  std::stable_sort(probs.begin(), probs.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  for (const auto& [name, p] : probs)
    std::cout << "  " << std::left << std::setw(18) << name << std::setprecision(6)
              << std::fixed << p << "\n";
  std::cout.unsetf(std::ios::fixed);
  std::cout << std::setprecision(6);
}

const char* face_name(int face) {
  static const char* names[6] = {"+x", "-x", "+y", "-y", "+z", "-z"};
  return face >= 0 && face < 6 ? names[face] : "?";
}

// The query-side graph used by `prior`: ground-truth labels when the cloud
// carries them on every point, otherwise the estimated segmentation.
ObjectGraph query_graph(const PointCloud& cloud, int nodes, int k) {
  bool labeled = !cloud.empty();
  for (const auto& q : cloud.pts)
    if (!q.gt_part) {
      labeled = false;
      break;
    }
  if (labeled) return build_knn_graph(hn::downsample(cloud, nodes), k);

  CompletionResult res = complete_cloud(cloud);
  PartSegmentation seg = segment_parts(res);
  PointCloud qc;
  qc.table = res.completed.table;
  qc.meta = res.completed.meta;
  std::vector<PartLabel> labels;
  std::size_t n = res.completed.size();
  std::size_t want = std::min<std::size_t>(n, std::size_t(nodes));
  double stride = double(n) / double(want);
  for (std::size_t i = 0; i < want; ++i) {
    std::size_t idx = std::size_t(double(i) * stride);
    qc.pts.push_back(res.completed.pts[idx]);
    labels.push_back(seg.assignment[idx]);
  }
  return build_knn_graph(qc, labels, k);
}

hn::Scenario scenario_from_meta(const PointCloud& cloud, DetectionMode mode,
                                std::optional<Task> forced_task) {
  hn::Scenario sc;
  sc.id = cloud.meta.id;
  sc.mode = mode;
  if (cloud.meta.category) {
    Category c = *cloud.meta.category;
    Containment fill = cloud.meta.contains.value_or(Containment::empty);
    sc.gt_category = c;
    sc.gt_pose = cloud.meta.pose.value_or(
        is_tool_category(c) ? Pose::sideways : Pose::upright);
    sc.gt_containment = fill;
    sc.gt_parts = hn::gt_part_set(c);
    sc.gt_tasks = hn::gt_task_set(c, fill);
    for (Task t : sc.gt_tasks)
      sc.gt_pregrasp[t] = hn::gt_pregrasp_set(c, t, fill);
    sc.eval_task = sc.gt_tasks.front();
    for (Task t : sc.gt_tasks)
      if (t == Task::pass) sc.eval_task = t;
  } else if (!forced_task) {
    sc.eval_task = Task::pass;
  }
  if (forced_task) sc.eval_task = *forced_task;
  return sc;
}

int parse_setting(const std::string& s) {
  std::string num = s;
  if (!num.empty() && (num[0] == 'E' || num[0] == 'e')) num = num.substr(1);
  try {
    std::size_t pos = 0;
    int i = std::stoi(num, &pos);
    if (pos != num.size() || i < 0) throw std::invalid_argument(num);
    return i;
  } catch (const std::exception&) {
    throw InputError("bad evaluation setting '" + s + "' (expected E0, E1, …)");
  }
}

void print_report(const hn::Report& rep, std::size_t scenario_count) {
  std::cout << "setting E" << rep.setting.i << ", task "
            << hn::to_string(rep.task_mode) << ", " << scenario_count
            << " scenarios\n";
  auto row = [](const char* name, const hn::Accuracy& a) {
    std::cout << "  " << std::left << std::setw(10) << name << std::right
              << std::setw(4) << a.successes << "/" << std::left << std::setw(5)
              << a.tries << std::fixed << std::setprecision(1) << std::right
              << std::setw(6) << a.percent() << "%\n";
    std::cout.unsetf(std::ios::fixed);
  };
  row("category", rep.category);
  row("pose", rep.pose);
  row("parts", rep.parts);
  row("task", rep.task);
  row("pregrasp", rep.pregrasp);
  row("execution", rep.execution);
  if (rep.clamp_warnings)
    std::cout << "  warning: prediction size clamped to 1 in "
              << rep.clamp_warnings << " scenario measure(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic-logic grasping pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "read options from a key = value file");

  std::uint64_t seed = 0;
  std::string kb_dir = PLG_KB_DIR;
  std::string out_path;
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--kb", kb_dir, "knowledge-base directory");
  app.add_option("--out", out_path, "output file or directory");

  std::function<void()> run;

  // --- generate -----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "generate", "generate a scenario dataset (or one object cloud)");
    auto opts = std::make_shared<hn::DatasetOptions>();
    auto spec_file = std::make_shared<std::string>();
    auto object_cat = std::make_shared<std::string>();
    auto pose_s = std::make_shared<std::string>("");
    auto contains_s = std::make_shared<std::string>("empty");
    auto noise = std::make_shared<double>(0.0);
    auto half_view = std::make_shared<bool>(false);
    auto mode_s = std::make_shared<std::string>("semi");
    cmd->add_option("--spec", *spec_file,
                    "dataset description file (key = value)");
    cmd->add_option("--count", opts->scenarios, "number of scenarios");
    cmd->add_option("--mode", *mode_s, "detection mode: semi, real or noisy");
    cmd->add_flag("--degrade", opts->degrade,
                  "half view plus sensor noise");
    cmd->add_option("--pitch", opts->pitch, "surface sampling pitch (m)");
    cmd->add_option("--object", *object_cat,
                    "write a single object cloud of this category instead");
    cmd->add_option("--pose", *pose_s, "object pose (single-object mode)");
    cmd->add_option("--contains", *contains_s,
                    "empty or full (single-object mode)");
    cmd->add_option("--noise-sigma", *noise,
                    "point noise sigma (single-object mode)");
    cmd->add_flag("--half-view", *half_view,
                  "cull backfacing points (single-object mode)");
    cmd->callback([&, cmd, opts, spec_file, object_cat, pose_s, contains_s,
                   noise, half_view, mode_s] {
      run = [&, cmd, opts, spec_file, object_cat, pose_s, contains_s, noise,
             half_view, mode_s] {
        if (out_path.empty()) throw InputError("generate needs --out");
        if (!object_cat->empty()) {
          auto cat = category_from(*object_cat);
          if (!cat) throw InputError("unknown category '" + *object_cat + "'");
          SyntheticSpec spec = default_spec(*cat);
          if (!pose_s->empty()) {
            auto p = pose_from(*pose_s);
            if (!p) throw InputError("unknown pose '" + *pose_s + "'");
            spec.pose = *p;
          }
          spec.contains = *contains_s == "full" ? Containment::full
                                                : Containment::empty;
          spec.noise_sigma = *noise;
          spec.pitch = opts->pitch;
          if (*half_view) spec.view_dir = Vec3(0.5, 0.5, 0.6).normalized();
          PointCloud cloud =
              generate_object(spec, seed_opt->count() ? seed : 7);
          save_cloud(cloud, out_path);
          std::cout << "wrote " << cloud.size() << " points ("
                    << to_string(*cat) << ", " << to_string(spec.pose)
                    << ") to " << out_path << "\n";
          return;
        }
        if (!spec_file->empty()) {
          for (const auto& [key, value] : parse_kv(*spec_file)) {
            if (key == "scenarios" || key == "count")
              opts->scenarios = int(to_double(value, key));
            else if (key == "seed" && !seed_opt->count())
              opts->seed = std::stoull(value);
            else if (key == "mode")
              opts->mode = mode_from(value);
            else if (key == "degrade")
              opts->degrade = bool_from(value, key);
            else if (key == "pitch")
              opts->pitch = to_double(value, key);
            else
              throw InputError(*spec_file + ": unknown dataset key '" + key +
                               "'");
          }
        }
        if (cmd->count("--mode")) opts->mode = mode_from(*mode_s);
        if (seed_opt->count()) opts->seed = seed;
        hn::Dataset ds = hn::make_dataset(*opts);
        hn::save_dataset(ds, out_path);
        std::set<Category> cats;
        for (const auto& sc : ds.scenarios) cats.insert(sc.gt_category);
        std::cout << "wrote " << ds.scenarios.size() << " scenarios ("
                  << cats.size() << " categories) to " << out_path << "\n";
      };
    });
  }

  // --- complete -----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("complete",
                                   "mirror-complete a partial cloud");
    auto in = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "input cloud file")->required();
    cmd->callback([&, in] {
      run = [&, in] {
        PointCloud cloud = load_cloud(*in);
        auto t0 = std::chrono::steady_clock::now();
        CompletionResult res = complete_cloud(cloud);
        double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
        std::cout << "completed " << cloud.size() << " -> "
                  << res.completed.size() << " points in " << std::fixed
                  << std::setprecision(1) << ms << " ms\n";
        std::cout.unsetf(std::ios::fixed);
        std::cout << "pose: " << to_string(res.pose_estimate.pose)
                  << " (confidence " << std::setprecision(3)
                  << res.pose_estimate.confidence << ")\n";
        std::cout << "box center: " << res.box.center.transpose()
                  << "\nbox half-extents: " << res.box.half_extents.transpose()
                  << "\n";
        if (!out_path.empty()) {
          save_cloud(res.completed, out_path);
          std::cout << "wrote completed cloud to " << out_path << "\n";
        }
      };
    });
  }

  // --- parts --------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "parts", "segment a cloud into parts and report detections");
    auto in = std::make_shared<std::string>();
    auto mode_s = std::make_shared<std::string>("semi");
    cmd->add_option("--in", *in, "input cloud file")->required();
    cmd->add_option("--mode", *mode_s, "detection mode: semi, real or noisy");
    cmd->callback([&, in, mode_s] {
      run = [&, in, mode_s] {
        PointCloud cloud = load_cloud(*in);
        CompletionResult res = complete_cloud(cloud);
        PartSegmentation seg = segment_parts(res);
        SceneDescription scene =
            detection_confidences(seg, res, mode_from(*mode_s));
        std::cout << "pose: " << to_string(scene.pose) << " ("
                  << std::setprecision(3) << scene.pose_prob << ")\n"
                  << "containment: " << to_string(scene.containment) << "\n"
                  << "parts:\n";
        std::vector<std::pair<std::string, double>> rows;
        for (const auto& [l, p] : scene.parts) rows.push_back({to_string(l), p});
        print_sorted(rows);
        auto hyps = pre_grasp_hypotheses(seg);
        int reachable = 0;
        for (const auto& h : hyps) reachable += h.reachable;
        std::cout << hyps.size() << " pre-grasp hypotheses, " << reachable
                  << " reachable\n";
        if (!out_path.empty()) {
          PointCloud labeled = res.completed;
          for (std::size_t i = 0; i < labeled.size(); ++i)
            labeled.pts[i].gt_part = seg.assignment[i];
          save_cloud(labeled, out_path);
          std::cout << "wrote labeled completed cloud to " << out_path << "\n";
        }
      };
    });
  }

  // --- graph --------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("graph",
                                   "build the k-NN object graph for a cloud");
    auto in = std::make_shared<std::string>();
    auto nodes = std::make_shared<int>(300);
    auto k = std::make_shared<int>(4);
    cmd->add_option("--in", *in, "input cloud file")->required();
    cmd->add_option("--nodes", *nodes, "node budget after downsampling");
    cmd->add_option("--k", *k, "neighbours per node");
    cmd->callback([&, in, nodes, k] {
      run = [&, in, nodes, k] {
        ObjectGraph g = query_graph(load_cloud(*in), *nodes, *k);
        int edges = 0;
        for (const auto& nb : g.adj) edges += int(nb.size());
        edges /= 2;
        std::cout << "graph '" << g.id << "': " << g.labels.rows()
                  << " nodes, " << edges << " edges";
        if (g.category) std::cout << ", category " << to_string(*g.category);
        std::cout << "\n";
        if (!out_path.empty()) {
          json j;
          j["id"] = g.id;
          if (g.category) j["category"] = to_string(*g.category);
          json labels = json::array();
          for (int i = 0; i < g.labels.rows(); ++i) {
            json row = json::array();
            for (int c = 0; c < g.labels.cols(); ++c)
              row.push_back(g.labels(i, c));
            labels.push_back(std::move(row));
          }
          j["labels"] = std::move(labels);
          json adj = json::array();
          for (std::size_t i = 0; i < g.adj.size(); ++i)
            for (const auto& [jn, w] : g.adj[i])
              if (int(i) < jn) adj.push_back(json::array({int(i), jn, w}));
          j["edges"] = std::move(adj);
          open_out(out_path) << j.dump(1) << "\n";
          std::cout << "wrote graph to " << out_path << "\n";
        }
      };
    });
  }

  // --- kernel -------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "kernel", "propagation kernel matrix over a dataset's graphs");
    auto dir = std::make_shared<std::string>();
    auto T = std::make_shared<int>(4);
    auto nodes = std::make_shared<int>(300);
    auto k = std::make_shared<int>(4);
    cmd->add_option("--dataset", *dir, "dataset directory")->required();
    cmd->add_option("--T", *T, "diffusion iterations");
    cmd->add_option("--nodes", *nodes, "node budget per graph");
    cmd->add_option("--k", *k, "neighbours per node");
    cmd->callback([&, dir, T, nodes, k] {
      run = [&, dir, T, nodes, k] {
        hn::Dataset ds = hn::load_dataset(*dir);
        auto graphs = hn::database_graphs(ds, *nodes, *k);
        KernelParams params;
        params.T_iters = *T;
        params.hash_seed = seed;
        params.k_nn = *k;
        KernelMatrix km = propagation_kernel(graphs, params);
        int n = int(km.ids.size());
        double off = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            if (i != j) off = std::max(off, km.K_hat(i, j));
        std::cout << n << " x " << n << " kernel at T=" << *T
                  << ", max off-diagonal similarity " << std::setprecision(4)
                  << off << "\n";
        if (!out_path.empty()) {
          auto os = open_out(out_path);
          os << "id";
          for (const auto& id : km.ids) os << "\t" << id;
          os << "\n";
          os << std::setprecision(12);
          for (int i = 0; i < n; ++i) {
            os << km.ids[i];
            for (int j = 0; j < n; ++j) os << "\t" << km.K_hat(i, j);
            os << "\n";
          }
          std::cout << "wrote normalized kernel to " << out_path << "\n";
        }
      };
    });
  }

  // --- prior --------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "prior", "category prior for a query cloud from a graph database");
    auto in = std::make_shared<std::string>();
    auto dir = std::make_shared<std::string>();
    auto T = std::make_shared<int>(4);
    auto nodes = std::make_shared<int>(300);
    auto k = std::make_shared<int>(4);
    auto top = std::make_shared<int>(10);
    cmd->add_option("--in", *in, "query cloud file")->required();
    cmd->add_option("--dataset", *dir, "database dataset directory")
        ->required();
    cmd->add_option("--T", *T, "diffusion iterations");
    cmd->add_option("--nodes", *nodes, "node budget per graph");
    cmd->add_option("--k", *k, "neighbours per node");
    cmd->add_option("--top", *top, "neighbours mixed into the prior");
    cmd->callback([&, in, dir, T, nodes, k, top] {
      run = [&, in, dir, T, nodes, k, top] {
        hn::Dataset ds = hn::load_dataset(*dir);
        auto graphs = hn::database_graphs(ds, *nodes, *k);
        ObjectGraph query = query_graph(load_cloud(*in), *nodes, *k);
        KernelParams params;
        params.T_iters = *T;
        params.hash_seed = seed;
        params.k_nn = *k;
        params.top_n = *top;
        CategoryPrior prior = category_prior(query, graphs, params);
        std::cout << format_prior(prior) << "\n";
        if (!out_path.empty()) {
          open_out(out_path) << dist_json(prior).dump(1) << "\n";
          std::cout << "wrote prior to " << out_path << "\n";
        }
      };
    });
  }

  // --- kb-query -----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "kb-query", "query the knowledge base with a symbolic scene");
    auto scene_file = std::make_shared<std::string>();
    auto what = std::make_shared<std::string>();
    auto theory_s = std::make_shared<std::string>("specific");
    auto task_s = std::make_shared<std::string>();
    auto exclusive = std::make_shared<bool>(false);
    cmd->add_option("--scene", *scene_file, "scene description file")
        ->required();
    cmd->add_option("--what", *what, "category, task or pregrasp")->required();
    cmd->add_option("--theory", *theory_s, "specific or general");
    cmd->add_option("--task", *task_s,
                    "condition pre-grasp queries on this task");
    cmd->add_flag("--exclusive", *exclusive,
                  "treat the family as mutually exclusive and renormalize "
                  "(the library-query behaviour); otherwise print plain "
                  "conditional marginals");
    cmd->callback([&, scene_file, what, theory_s, task_s, exclusive] {
      run = [&, scene_file, what, theory_s, task_s, exclusive] {
        SceneDescription scene = parse_scene(*scene_file);
        kb::KnowledgeBase rules = kb::KnowledgeBase::load(kb_dir);
        kb::Theory theory = theory_from_arg(*theory_s);
        if (!task_s->empty()) scene.given_task = task_from_arg(*task_s);

        cpl::CpProgram prog;
        cpl::Atom family;
        if (*what == "category") {
          prog = kb::assemble_category_program(scene, rules, theory);
          family = {"cat", {scene.object_id, "C"}};
        } else if (*what == "task") {
          prog = kb::assemble_task_program(scene, rules, theory);
          family = {"task_choice", {scene.object_id, "T"}};
        } else if (*what == "pregrasp") {
          Task chosen = scene.given_task
                            ? *scene.given_task
                            : *kb::query_task(scene, rules, theory).argmax;
          prog = kb::assemble_pregrasp_program(scene, rules, chosen, theory);
          family = {"grasp", {scene.object_id, task_id(chosen), "R"}};
          std::cout << "task: " << task_id(chosen) << "\n";
        } else {
          throw InputError("unknown query '" + *what +
                           "' (expected category, task or pregrasp)");
        }

        cpl::DistributionResult d =
            cpl::query_distribution(prog, family, *exclusive);
        std::vector<std::pair<std::string, double>> rows;
        for (const auto& [atom, p] : d.probs)
          rows.push_back({kb::detail::family_value(atom), p});
        print_sorted(rows);
        std::cout << "argmax: " << kb::detail::family_value(d.argmax)
                  << (d.tie ? " (tie)" : "") << "\n";
        std::cout << "evidence mass: " << std::setprecision(6)
                  << d.evidence_mass << "\n";
        if (!out_path.empty()) {
          json j;
          j["what"] = *what;
          j["theory"] = *theory_s;
          j["exclusive"] = *exclusive;
          j["argmax"] = kb::detail::family_value(d.argmax);
          j["tie"] = d.tie;
          j["evidence_mass"] = d.evidence_mass;
          json probs = json::object();
          for (const auto& [name, p] : rows)
            probs[name] = probs.contains(name) ? probs[name].get<double>() + p
                                               : p;
          j["probs"] = std::move(probs);
          open_out(out_path) << j.dump(1) << "\n";
        }
      };
    });
  }

  // --- dgi ----------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "dgi", "depth-gradient image of a cloud in gripper-volume frame");
    auto in = std::make_shared<std::string>();
    auto ex = std::make_shared<std::vector<double>>();
    cmd->add_option("--in", *in, "cloud file; coordinates are volume-frame")
        ->required();
    cmd->add_option("--extents", *ex,
                    "volume extents in metres (three values)")
        ->expected(3);
    cmd->callback([&, in, ex] {
      run = [&, in, ex] {
        GripperVolume vol;
        if (!ex->empty())
          vol.extents = Vec3((*ex)[0], (*ex)[1], (*ex)[2]);
        PointCloud cloud = load_cloud(*in);
        std::vector<Vec3> pts;
        pts.reserve(cloud.size());
        for (const auto& q : cloud.pts) pts.push_back(q.p);
        DepthImage di = depth_image(pts, vol);
        DgiFeature f = dgi(di);
        std::cout << "depth image " << di.rows << " x " << di.cols
                  << " (mm, '-' = empty):\n";
        for (int r = 0; r < di.rows; ++r) {
          for (int c = 0; c < di.cols; ++c) {
            double z = di.at(r, c);
            if (z == DepthImage::kSentinel)
              std::cout << std::setw(7) << "-";
            else
              std::cout << std::setw(7) << std::fixed << std::setprecision(1)
                        << z;
          }
          std::cout << "\n";
        }
        std::cout << "gradient magnitudes " << f.rows << " x " << f.cols
                  << ":\n";
        for (int r = 0; r < f.rows; ++r) {
          for (int c = 0; c < f.cols; ++c)
            std::cout << std::setw(7) << std::fixed << std::setprecision(1)
                      << f.mag[std::size_t(r) * f.cols + c];
          std::cout << "\n";
        }
        std::cout.unsetf(std::ios::fixed);
        if (!out_path.empty()) {
          auto os = open_out(out_path);
          os << f.rows << " " << f.cols << "\n" << std::setprecision(17);
          for (int r = 0; r < f.rows; ++r) {
            for (int c = 0; c < f.cols; ++c)
              os << (c ? " " : "") << f.mag[std::size_t(r) * f.cols + c];
            os << "\n";
          }
          std::cout << "wrote gradient grid to " << out_path << "\n";
        }
      };
    });
  }

  // --- train --------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "train", "train the grasp-point classifier on the synthetic corpus");
    auto samples = std::make_shared<int>(200);
    auto opts = std::make_shared<TrainOptions>();
    auto fixed_cal = std::make_shared<bool>(false);
    cmd->add_option("--samples", *samples, "corpus size");
    cmd->add_option("--gamma", opts->gamma, "RBF width");
    cmd->add_option("--cost", opts->cost, "SVM cost C");
    cmd->add_option("--folds", opts->folds, "cross-validation folds");
    cmd->add_flag("--fixed-calibration", *fixed_cal,
                  "use the reference sigmoid (A=2, B=0.5) instead of Platt");
    cmd->callback([&, samples, opts, fixed_cal] {
      run = [&, samples, opts, fixed_cal] {
        if (out_path.empty()) throw InputError("train needs --out");
        opts->fixed_calibration = *fixed_cal;
        auto corpus =
            make_grasp_corpus(*samples, seed_opt->count() ? seed : 42);
        TrainedClassifier clf = train_classifier(corpus, *opts);
        std::cout << "trained on " << clf.trained_on << " samples: "
                  << clf.support.size() << " support vectors, "
                  << (clf.converged ? "converged" : "sweep cap hit") << " after "
                  << clf.sweeps << " sweeps\n";
        std::cout << std::setprecision(4) << "cross-validation accuracy "
                  << 100.0 * clf.cv_accuracy << "%\n";
        std::cout << "sigmoid A=" << clf.sigmoid_a << " B=" << clf.sigmoid_b
                  << "\n";
        auto os = open_out(out_path);
        save_classifier(clf, os);
        std::cout << "wrote model to " << out_path << "\n";
      };
    });
  }

  // --- predict ------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "predict", "rank grasp points on a cloud with a trained model");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto part_s = std::make_shared<std::string>();
    auto depth = std::make_shared<double>(kDefaultVolumeDepth);
    auto limit = std::make_shared<int>(10);
    cmd->add_option("--in", *in, "input cloud file")->required();
    cmd->add_option("--model", *model, "classifier file")->required();
    cmd->add_option("--part", *part_s, "restrict to one part label");
    cmd->add_option("--depth", *depth, "gripper volume depth (m)");
    cmd->add_option("--limit", *limit, "print at most this many grasps");
    cmd->callback([&, in, model, part_s, depth, limit] {
      run = [&, in, model, part_s, depth, limit] {
        std::ifstream ms(*model);
        if (!ms) throw InputError("cannot open model " + *model);
        TrainedClassifier clf = load_classifier(ms);
        PointCloud cloud = load_cloud(*in);
        CompletionResult res = complete_cloud(cloud);
        PartSegmentation seg = segment_parts(res);
        std::vector<PreGraspHypothesis> hyps = pre_grasp_hypotheses(seg);
        if (!part_s->empty()) {
          auto l = part_label_from(*part_s);
          if (!l) throw InputError("unknown part '" + *part_s + "'");
          std::erase_if(hyps,
                        [&](const PreGraspHypothesis& h) { return h.part != *l; });
          if (hyps.empty())
            throw InputError("no hypotheses on part " + *part_s);
        }
        auto ranked = rank_grasps(clf, res.completed, hyps, *depth);
        json lines = json::array();
        int shown = 0;
        for (const auto& g : ranked) {
          const auto& h = g.hypothesis;
          if (shown++ < *limit)
            std::cout << std::setw(2) << shown << ". " << std::left
                      << std::setw(12) << to_string(h.part) << std::right
                      << " face " << face_name(h.face_index) << "  P="
                      << std::fixed << std::setprecision(3) << g.probability
                      << "  at " << std::setprecision(3)
                      << h.position.transpose() << "\n";
          std::cout.unsetf(std::ios::fixed);
          lines.push_back({{"part", to_string(h.part)},
                           {"face", face_name(h.face_index)},
                           {"variant", h.variant},
                           {"probability", g.probability},
                           {"position",
                            {h.position.x(), h.position.y(), h.position.z()}}});
        }
        std::cout << ranked.size() << " grasp(s) ranked\n";
        if (!out_path.empty()) {
          auto os = open_out(out_path);
          for (const auto& l : lines) os << l.dump() << "\n";
          std::cout << "wrote ranking to " << out_path << "\n";
        }
      };
    });
  }

  // --- pipeline -----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "pipeline", "run the full pipeline over a dataset or one cloud");
    auto dataset = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto theory_s = std::make_shared<std::string>("specific");
    auto prior_s = std::make_shared<std::string>("uniform");
    auto database = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto T = std::make_shared<int>(4);
    auto nodes = std::make_shared<int>(300);
    auto task_s = std::make_shared<std::string>();
    auto task_given = std::make_shared<bool>(false);
    auto mode_s = std::make_shared<std::string>("semi");
    cmd->add_option("--dataset", *dataset, "dataset directory");
    cmd->add_option("--in", *in, "single cloud file instead of a dataset");
    cmd->add_option("--theory", *theory_s, "specific or general");
    cmd->add_option("--prior", *prior_s, "uniform or manifold");
    cmd->add_option("--database", *database,
                    "graph database directory (defaults to --dataset)");
    cmd->add_option("--model", *model, "grasp classifier file");
    cmd->add_option("--T", *T, "diffusion iterations for the prior");
    cmd->add_option("--nodes", *nodes, "node budget per graph");
    cmd->add_option("--task", *task_s,
                    "given task for single-cloud runs (implies --given-task)");
    cmd->add_flag("--given-task", *task_given,
                  "condition on each scenario's evaluation task");
    cmd->add_option("--mode", *mode_s,
                    "detection mode for single-cloud runs");
    cmd->callback([&, dataset, in, theory_s, prior_s, database, model, T,
                   nodes, task_s, task_given, mode_s] {
      run = [&, dataset, in, theory_s, prior_s, database, model, T, nodes,
             task_s, task_given, mode_s] {
        if (dataset->empty() == in->empty())
          throw InputError("pipeline needs exactly one of --dataset or --in");

        hn::Dataset ds;
        if (!dataset->empty()) {
          ds = hn::load_dataset(*dataset);
        } else {
          PointCloud cloud = load_cloud(*in);
          std::optional<Task> forced;
          if (!task_s->empty()) {
            forced = task_from_arg(*task_s);
            *task_given = true;
          }
          if (*task_given && !forced && !cloud.meta.category)
            throw InputError(
                "cloud has no category metadata; pass --task to fix the task");
          ds.scenarios.push_back(
              scenario_from_meta(cloud, mode_from(*mode_s), forced));
          ds.clouds.push_back(std::move(cloud));
        }

        hn::PipelineConfig cfg;
        cfg.kb = kb::KnowledgeBase::load(kb_dir);
        cfg.theory = theory_from_arg(*theory_s);
        cfg.task_given = *task_given;
        cfg.kernel.T_iters = *T;
        cfg.kernel.hash_seed = seed;
        cfg.graph_nodes = *nodes;

        std::vector<ObjectGraph> db;
        if (*prior_s == "manifold") {
          cfg.prior = hn::PipelineConfig::Prior::manifold;
          std::string db_dir = database->empty() ? *dataset : *database;
          if (db_dir.empty())
            throw InputError("manifold prior needs --database");
          hn::Dataset db_ds =
              db_dir == *dataset ? ds : hn::load_dataset(db_dir);
          db = hn::database_graphs(db_ds, *nodes, cfg.kernel.k_nn);
          cfg.database = &db;
        } else if (*prior_s != "uniform") {
          throw InputError("unknown prior '" + *prior_s + "'");
        }

        TrainedClassifier clf;
        if (!model->empty()) {
          std::ifstream msk(*model);
          if (!msk) throw InputError("cannot open model " + *model);
          clf = load_classifier(msk);
          cfg.classifier = &clf;
        }

        std::vector<hn::PredictionRecord> records = hn::run_all(ds, cfg);
        std::ofstream os;
        if (!out_path.empty()) os = open_out(out_path);
        int failures = 0;
        for (const auto& r : records) {
          if (r.failed) {
            ++failures;
            std::cout << r.scenario_id << "  FAILED: " << r.error << "\n";
          } else {
            std::cout << r.scenario_id << "  cat="
                      << (r.category.argmax ? to_string(*r.category.argmax)
                                            : "?")
                      << "  task="
                      << (r.task.argmax ? task_id(*r.task.argmax) : "?")
                      << "  grasp="
                      << (r.pregrasp.argmax ? to_string(*r.pregrasp.argmax)
                                            : "-");
            if (!r.grasp_ranking.empty())
              std::cout << "  P=" << std::setprecision(3)
                        << r.grasp_ranking.front().second;
            std::cout << "  [" << std::fixed << std::setprecision(1)
                      << r.total_ms << " ms]\n";
            std::cout.unsetf(std::ios::fixed);
          }
          if (os.is_open()) os << record_json(r).dump() << "\n";
        }
        std::cout << records.size() << " scenario(s), " << failures
                  << " failure(s)\n";
        if (os.is_open())
          std::cout << "wrote records to " << out_path << "\n";
      };
    });
  }

  // --- eval ---------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "eval", "run the pipeline over a dataset and score it");
    auto dataset = std::make_shared<std::string>();
    auto setting_s = std::make_shared<std::string>("E0");
    auto task_mode_s = std::make_shared<std::string>("inferred");
    auto theory_s = std::make_shared<std::string>("specific");
    auto prior_s = std::make_shared<std::string>("uniform");
    auto database = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto T = std::make_shared<int>(4);
    auto auto_T = std::make_shared<bool>(false);
    auto nodes = std::make_shared<int>(300);
    cmd->add_option("--dataset", *dataset, "dataset directory")->required();
    cmd->add_option("--setting", *setting_s, "evaluation setting E<i>");
    cmd->add_option("--task-mode", *task_mode_s, "given or inferred");
    cmd->add_option("--theory", *theory_s, "specific or general");
    cmd->add_option("--prior", *prior_s, "uniform or manifold");
    cmd->add_option("--database", *database,
                    "graph database directory (defaults to --dataset)");
    cmd->add_option("--model", *model, "grasp classifier file");
    cmd->add_option("--T", *T, "diffusion iterations for the prior");
    cmd->add_flag("--auto-T", *auto_T,
                  "pick T by leave-one-out accuracy on the database");
    cmd->add_option("--nodes", *nodes, "node budget per graph");
    cmd->callback([&, dataset, setting_s, task_mode_s, theory_s, prior_s,
                   database, model, T, auto_T, nodes] {
      run = [&, dataset, setting_s, task_mode_s, theory_s, prior_s, database,
             model, T, auto_T, nodes] {
        hn::EvalSetting setting{parse_setting(*setting_s)};
        hn::TaskMode task_mode;
        if (*task_mode_s == "given")
          task_mode = hn::TaskMode::given;
        else if (*task_mode_s == "inferred")
          task_mode = hn::TaskMode::inferred;
        else
          throw InputError("unknown task mode '" + *task_mode_s + "'");

        hn::Dataset ds = hn::load_dataset(*dataset);
        hn::PipelineConfig cfg;
        cfg.kb = kb::KnowledgeBase::load(kb_dir);
        cfg.theory = theory_from_arg(*theory_s);
        cfg.task_given = task_mode == hn::TaskMode::given;
        cfg.kernel.hash_seed = seed;
        cfg.graph_nodes = *nodes;

        std::vector<ObjectGraph> db;
        if (*prior_s == "manifold") {
          cfg.prior = hn::PipelineConfig::Prior::manifold;
          std::string db_dir = database->empty() ? *dataset : *database;
          hn::Dataset db_ds =
              db_dir == *dataset ? ds : hn::load_dataset(db_dir);
          db = hn::database_graphs(db_ds, *nodes, cfg.kernel.k_nn);
          cfg.database = &db;
          if (*auto_T) {
            hn::SelectTResult sel = hn::select_T(db, 15, cfg.kernel);
            *T = sel.T;
            std::cout << "selected T=" << sel.T
                      << " (leave-one-out accuracy " << std::setprecision(3)
                      << 100.0 * sel.accuracy[sel.T] << "%"
                      << (sel.degenerate ? ", degenerate" : "") << ")\n";
          }
        } else if (*prior_s != "uniform") {
          throw InputError("unknown prior '" + *prior_s + "'");
        }
        cfg.kernel.T_iters = *T;

        TrainedClassifier clf;
        if (!model->empty()) {
          std::ifstream msk(*model);
          if (!msk) throw InputError("cannot open model " + *model);
          clf = load_classifier(msk);
          cfg.classifier = &clf;
        }

        std::vector<hn::PredictionRecord> records = hn::run_all(ds, cfg);
        std::map<std::string, std::string> echo = {
            {"dataset", *dataset},
            {"theory", *theory_s},
            {"prior", *prior_s},
            {"T", std::to_string(*T)},
            {"nodes", std::to_string(*nodes)},
            {"model", *model}};
        hn::Report rep =
            hn::evaluate(records, ds.scenarios, setting, task_mode, echo, seed);
        print_report(rep, ds.scenarios.size());
        if (!out_path.empty()) {
          auto os = open_out(out_path);
          hn::save_report(rep, os);
          std::cout << "wrote report to " << out_path << "\n";
        }
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run) run();
  } catch (const InferenceError& e) {
    std::cerr << "inference error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
