#pragma once

// Knowledge-base facade. Loads the rule files, renders a SceneDescription
// into observation clauses and runs the three canned query shapes against
// the inference engine:
//
//   category  - observations + category theory + constraints
//   task      - + task prior, taxonomy and affordances
//   pre-grasp - + selected task, grasp rows and collision facts
//
// The category theories answer two needs at once. When only the category is
// queried, their leaf-ward redistribution rows replace the upward taxonomy
// (which is therefore left out of the program). When the taxonomy has to be
// present as well (task and pre-grasp queries need it for the affordance
// table), the redistribution rows would short-circuit with it, so the
// assembly strips them and keeps only the observation-driven rows.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "plg/cpl.hpp"
#include "plg/scene.hpp"

#ifndef PLG_KB_DIR
#define PLG_KB_DIR "kb"
#endif

namespace plg::kb {

enum class Theory { specific, general };

inline const char* to_string(Theory t) {
  return t == Theory::specific ? "specific" : "general";
}

inline std::optional<Theory> theory_from(const std::string& s) {
  if (s == "specific") return Theory::specific;
  if (s == "general") return Theory::general;
  return std::nullopt;
}

struct KnowledgeBase {
  std::string ontology;
  std::string affordances;
  std::string categories_specific;
  std::string categories_general;
  std::string grasping_specific;
  std::string grasping_general;
  std::string constraints;

  const std::string& categories(Theory t) const {
    return t == Theory::specific ? categories_specific : categories_general;
  }
  const std::string& grasping(Theory t) const {
    return t == Theory::specific ? grasping_specific : grasping_general;
  }

  static KnowledgeBase load(const std::string& dir = PLG_KB_DIR);
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read knowledge-base file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shortest decimal that round-trips; the rule parser turns it back into the
// exact rational, so emitted probabilities keep their precision whenever the
// parser's 18-digit literal budget allows.  Longer fractions (e.g. kernel
// priors with leading zeros) are rounded at that budget — an error below
// 5e-18 per literal, well inside the head-sum slack.
inline std::string format_prob(double p) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, p, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  std::size_t dot = s.find('.');
  if (dot != std::string::npos && s.size() - 1 > 18) {
    int frac = std::max(1, 18 - int(dot));
    std::snprintf(buf, sizeof buf, "%.*f", frac, p);
    s = buf;
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

inline void require_prob(double p, const char* what) {
  if (!(p > 0.0 && p <= 1.0))
    throw InputError(std::string(what) +
                     " probability must lie in (0,1], got " + format_prob(p));
}

inline void check_object_id(const std::string& id) {
  bool ok = !id.empty() && std::islower((unsigned char)id[0]);
  for (char c : id)
    if (!std::isalnum((unsigned char)c) && c != '_') ok = false;
  if (!ok)
    throw InputError("object id '" + id +
                     "' is not a valid constant (lowercase word)");
}

// Observation clauses shared by all query types: the object itself, its
// detected parts, pose, containment and the category prior. Handles get one
// coin each so that part(handle,_) and the handle-count predicates stay
// consistent in every world.
inline std::string emit_scene_core(const SceneDescription& s) {
  check_object_id(s.object_id);
  const std::string& id = s.object_id;

  std::ostringstream out;
  out << "% --- observations ---\n";
  out << "true.\n";
  out << "object(" << id << ").\n";

  std::array<double, 5> strongest{};  // by PartLabel; handles excluded
  for (const auto& [label, p] : s.parts) {
    require_prob(p, "part");
    if (label != PartLabel::handle)
      strongest[int(label)] = std::max(strongest[int(label)], p);
  }
  for (PartLabel label : {PartLabel::top, PartLabel::middle, PartLabel::bottom,
                          PartLabel::usable_area}) {
    double p = strongest[int(label)];
    if (p == 0.0) continue;
    if (p >= 1.0)
      out << "part(" << to_string(label) << "," << id << ").\n";
    else
      out << format_prob(p) << "::part(" << to_string(label) << "," << id
          << ").\n";
  }

  std::vector<double> handles;
  for (const auto& [label, p] : s.parts)
    if (label == PartLabel::handle) handles.push_back(p);
  if (handles.size() > 2)
    throw InputError("more than two handles detected; the handle-count "
                     "predicates only cover one or two");
  if (handles.empty()) {
    out << "no_handle(" << id << ").\n";
  } else {
    for (std::size_t i = 0; i < handles.size(); ++i) {
      std::string coin = "handle" + std::to_string(i + 1);
      if (handles[i] >= 1.0)
        out << coin << "(" << id << ").\n";
      else
        out << format_prob(handles[i]) << "::" << coin << "(" << id << ").\n";
      out << "part(handle,X) :- " << coin << "(X).\n";
    }
    out << "one_handle(X) :- handle1(X), not(handle2(X)).\n";
    out << "one_handle(X) :- handle2(X), not(handle1(X)).\n";
    out << "two_handles(X) :- handle1(X), handle2(X).\n";
    out << "no_handle(X) :- object(X), not(handle1(X)), not(handle2(X)).\n";
  }

  require_prob(s.pose_prob, "pose");
  if (s.pose_prob >= 1.0)
    out << "pose(" << id << "," << to_string(s.pose) << ").\n";
  else
    out << format_prob(s.pose_prob) << "::pose(" << id << ","
        << to_string(s.pose) << ").\n";

  out << to_string(s.containment) << "(" << id << ").\n";

  if (s.category_prior) {
    const auto& prior = *s.category_prior;
    double sum = 0.0;
    for (double p : prior) {
      if (p < 0.0 || p > 1.0)
        throw InputError("category prior entries must lie in [0,1]");
      sum += p;
    }
    if (sum <= 0.0 || sum > 1.0 + 1e-9)
      throw InputError("category prior must have mass in (0,1]");
    std::vector<int> order;
    for (int i = 0; i < kNumCategories; ++i)
      if (prior[i] > 0.0) order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return prior[a] > prior[b]; });
    for (std::size_t k = 0; k < order.size(); ++k)
      out << (k ? "; " : "") << format_prob(prior[order[k]]) << "::"
          << to_string(all_categories()[order[k]]) << "(" << id << ")";
    out << " <- object(" << id << ").\n";
  } else {
    for (int i = 0; i < kNumCategories; ++i)
      out << (i ? "; " : "") << "1/11::" << to_string(all_categories()[i])
          << "(" << id << ")";
    out << " <- object(" << id << ").\n";
  }
  return out.str();
}

// Either the task is fixed, or a prior over t1..t7 is emitted as one
// annotated disjunction (uniform when the scene does not say otherwise).
inline std::string emit_task_block(const SceneDescription& s) {
  std::ostringstream out;
  if (s.given_task) {
    out << "task(" << task_id(*s.given_task) << ").\n";
    return out.str();
  }
  if (s.task_prior) {
    const auto& prior = *s.task_prior;
    double sum = 0.0;
    for (double p : prior) {
      if (p < 0.0 || p > 1.0)
        throw InputError("task prior entries must lie in [0,1]");
      sum += p;
    }
    if (sum <= 0.0 || sum > 1.0 + 1e-9)
      throw InputError("task prior must have mass in (0,1]");
    bool first = true;
    for (int i = 0; i < kNumTasks; ++i) {
      if (prior[i] <= 0.0) continue;
      out << (first ? "" : "; ") << format_prob(prior[i]) << "::task(t"
          << i + 1 << ")";
      first = false;
    }
    out << " <- true.\n";
    return out.str();
  }
  for (int i = 1; i <= kNumTasks; ++i)
    out << (i > 1 ? "; " : "") << "1/7::task(t" << i << ")";
  out << " <- true.\n";
  return out.str();
}

// The leaf-ward redistribution rows are exactly the annotated disjunctions
// whose whole body is one super-category atom.
inline bool is_leafward_ad(const cpl::CpRule& r) {
  if (r.kind != cpl::RuleKind::annotated_disjunction) return false;
  if (r.body.size() != 1 || r.body[0].negated) return false;
  const std::string& p = r.body[0].atom.pred;
  return p == "container" || p == "openContainer" || p == "canister" ||
         p == "dish" || p == "kitchenContainer" || p == "tool";
}

inline void strip_leafward_ads(cpl::CpProgram& prog) {
  std::erase_if(prog.rules, is_leafward_ad);
}

// The open slot of every query family is its last argument.
inline std::string family_value(const std::string& atom_text) {
  auto r = atom_text.rfind(')');
  auto l = atom_text.rfind(',', r);
  if (l == std::string::npos) l = atom_text.rfind('(', r);
  return atom_text.substr(l + 1, r - l - 1);
}

}  // namespace detail

inline KnowledgeBase KnowledgeBase::load(const std::string& dir) {
  KnowledgeBase kb;
  kb.ontology = detail::read_file(dir + "/ontology.cpl");
  kb.affordances = detail::read_file(dir + "/affordances.cpl");
  kb.categories_specific = detail::read_file(dir + "/categories_specific.cpl");
  kb.categories_general = detail::read_file(dir + "/categories_general.cpl");
  kb.grasping_specific = detail::read_file(dir + "/grasping_specific.cpl");
  kb.grasping_general = detail::read_file(dir + "/grasping_general.cpl");
  kb.constraints = detail::read_file(dir + "/constraints.cpl");
  return kb;
}

inline std::string emit_observations(const SceneDescription& scene) {
  return detail::emit_scene_core(scene) + detail::emit_task_block(scene);
}

inline cpl::CpProgram assemble_category_program(const SceneDescription& scene,
                                                const KnowledgeBase& kb,
                                                Theory theory) {
  std::string text =
      detail::emit_scene_core(scene) + kb.categories(theory) + kb.constraints;
  return cpl::parse_program(text);
}

inline cpl::CpProgram assemble_task_program(const SceneDescription& scene,
                                            const KnowledgeBase& kb,
                                            Theory theory) {
  std::string text = detail::emit_scene_core(scene) +
                     detail::emit_task_block(scene) + kb.ontology +
                     kb.affordances + kb.categories(theory) + kb.constraints;
  cpl::CpProgram prog = cpl::parse_program(text);
  detail::strip_leafward_ads(prog);
  return prog;
}

inline cpl::CpProgram assemble_pregrasp_program(
    const SceneDescription& scene, const KnowledgeBase& kb, Task task,
    Theory theory, const std::vector<PartLabel>& blocked = {}) {
  std::ostringstream head;
  head << "task(" << task_id(task) << ").\n";
  for (PartLabel l : blocked) head << "collision(" << to_string(l) << ").\n";
  std::string text = detail::emit_scene_core(scene) + head.str() +
                     kb.ontology + kb.affordances + kb.categories(theory) +
                     kb.grasping(theory) + kb.constraints;
  cpl::CpProgram prog = cpl::parse_program(text);
  detail::strip_leafward_ads(prog);
  return prog;
}

struct CategoryResult {
  CategoryDistribution probs{};  // renormalized; impossible leaves stay 0
  std::optional<Category> argmax;
  bool tie = false;
  double evidence_mass = 1.0;  // mass of worlds surviving the constraints
};

struct TaskResult {
  TaskDistribution probs{};
  std::optional<Task> argmax;
  bool tie = false;
  double evidence_mass = 1.0;
};

struct PregraspResult {
  Task task = Task::pass;  // task the distribution is conditioned on
  // observed part labels in declaration order; sums to 1 when feasible
  std::vector<std::pair<PartLabel, double>> probs;
  std::optional<PartLabel> argmax;
  bool tie = false;
  bool feasible = true;
  double evidence_mass = 1.0;
};

inline CategoryResult query_category(const SceneDescription& scene,
                                     const KnowledgeBase& kb,
                                     Theory theory = Theory::specific,
                                     const cpl::InferOptions& opt = {}) {
  cpl::CpProgram prog = assemble_category_program(scene, kb, theory);
  cpl::Atom family{"cat", {scene.object_id, "C"}};
  cpl::DistributionResult d;
  try {
    d = cpl::query_distribution(prog, family, /*exclusive=*/true, opt);
  } catch (const InputError& e) {
    throw InferenceError(std::string("category query: ") + e.what());
  }
  CategoryResult out;
  out.tie = d.tie;
  out.evidence_mass = d.evidence_mass;
  for (const auto& [text, p] : d.probs) {
    auto c = category_from(detail::family_value(text));
    if (!c) throw InferenceError("category query produced " + text);
    out.probs[int(*c)] = p;
  }
  out.argmax = category_from(detail::family_value(d.argmax));
  return out;
}

inline TaskResult query_task(const SceneDescription& scene,
                             const KnowledgeBase& kb,
                             Theory theory = Theory::specific,
                             const cpl::InferOptions& opt = {}) {
  cpl::CpProgram prog = assemble_task_program(scene, kb, theory);
  cpl::Atom family{"task_choice", {scene.object_id, "T"}};
  cpl::DistributionResult d;
  try {
    d = cpl::query_distribution(prog, family, /*exclusive=*/true, opt);
  } catch (const InputError&) {
    // no task_choice atom is derivable at all
    throw InferenceError("no affordable task for object " + scene.object_id);
  }
  TaskResult out;
  out.tie = d.tie;
  out.evidence_mass = d.evidence_mass;
  for (const auto& [text, p] : d.probs) {
    auto t = task_from(detail::family_value(text));
    if (!t) throw InferenceError("task query produced " + text);
    out.probs[int(*t)] = p;
  }
  out.argmax = task_from(detail::family_value(d.argmax));
  return out;
}

inline PregraspResult query_pregrasp(
    const SceneDescription& scene, const KnowledgeBase& kb,
    std::optional<Task> task = std::nullopt, Theory theory = Theory::specific,
    const std::optional<std::vector<PartLabel>>& reachable = std::nullopt,
    const cpl::InferOptions& opt = {}) {
  if (scene.parts.empty())
    throw InputError("pre-grasp query needs at least one detected part");

  Task chosen;
  if (task)
    chosen = *task;
  else if (scene.given_task)
    chosen = *scene.given_task;
  else
    chosen = *query_task(scene, kb, theory, opt).argmax;

  std::vector<PartLabel> observed;
  for (PartLabel l : {PartLabel::top, PartLabel::middle, PartLabel::bottom,
                      PartLabel::handle, PartLabel::usable_area}) {
    for (const auto& [label, p] : scene.parts)
      if (label == l) {
        observed.push_back(l);
        break;
      }
  }
  std::vector<PartLabel> blocked;
  if (reachable) {
    for (PartLabel l : observed)
      if (std::find(reachable->begin(), reachable->end(), l) ==
          reachable->end())
        blocked.push_back(l);
    if (blocked.size() == observed.size())
      throw InputError("every detected part is unreachable");
  }

  PregraspResult out;
  out.task = chosen;
  for (PartLabel l : observed) out.probs.push_back({l, 0.0});

  cpl::CpProgram prog =
      assemble_pregrasp_program(scene, kb, chosen, theory, blocked);
  cpl::Atom family{"grasp", {scene.object_id, task_id(chosen), "R"}};
  cpl::DistributionResult d;
  try {
    d = cpl::query_distribution(prog, family, /*exclusive=*/true, opt);
  } catch (const InputError& e) {
    // distinguish "no grasp atom exists" (infeasible combination) from
    // genuinely malformed input
    if (std::string_view(e.what()).find("matches no ground atom") !=
        std::string_view::npos) {
      out.feasible = false;
      return out;
    }
    throw;
  } catch (const InferenceError& e) {
    if (std::string_view(e.what()).find("no probability mass") !=
        std::string_view::npos) {
      out.feasible = false;
      return out;
    }
    throw;
  }
  out.tie = d.tie;
  out.evidence_mass = d.evidence_mass;
  for (const auto& [text, p] : d.probs) {
    auto part = part_label_from(detail::family_value(text));
    if (!part) throw InferenceError("pre-grasp query produced " + text);
    for (auto& [label, prob] : out.probs)
      if (label == *part) prob = p;
  }
  out.argmax = part_label_from(detail::family_value(d.argmax));
  return out;
}

struct PredictionRecord {
  CategoryResult category;
  TaskResult task;
  PregraspResult pregrasp;
};

// The full symbolic cascade for one scene: category, then task, then the
// pre-grasp distribution under the winning task.
inline PredictionRecord predict(const SceneDescription& scene,
                                const KnowledgeBase& kb,
                                Theory theory = Theory::specific,
                                const cpl::InferOptions& opt = {}) {
  PredictionRecord rec;
  rec.category = query_category(scene, kb, theory, opt);
  rec.task = query_task(scene, kb, theory, opt);
  rec.pregrasp =
      query_pregrasp(scene, kb, *rec.task.argmax, theory, std::nullopt, opt);
  return rec;
}

}  // namespace plg::kb
