#ifndef PLG_SCENE_HPP
#define PLG_SCENE_HPP

// Symbolic scene description shared between the part detector (which fills it
// in) and the knowledge-base facade (which turns it into observation facts).

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "plg/geometry.hpp"

namespace plg {

// The seven manipulation tasks. Identifiers t1..t7 follow the knowledge-base
// files; the enum order matches that numbering.
enum class Task {
  pourOut,         // t1
  pass,            // t2
  pourIn,          // t3
  ppInUpright,     // t4  place-and-pour-In variants: carrier pose at release
  ppInUpsidedown,  // t5
  ppInSideways,    // t6
  ppOn             // t7
};

inline constexpr int kNumTasks = 7;

inline constexpr std::array<Task, kNumTasks> all_tasks() {
  return {Task::pourOut,       Task::pass,          Task::pourIn,
          Task::ppInUpright,   Task::ppInUpsidedown, Task::ppInSideways,
          Task::ppOn};
}

inline const char* to_string(Task t) {
  switch (t) {
    case Task::pourOut: return "pourOut";
    case Task::pass: return "pass";
    case Task::pourIn: return "pourIn";
    case Task::ppInUpright: return "p&pInUpright";
    case Task::ppInUpsidedown: return "p&pInUpsidedown";
    case Task::ppInSideways: return "p&pInSideways";
    case Task::ppOn: return "p&pOn";
  }
  return "?";
}

inline std::string task_id(Task t) {
  return "t" + std::to_string(int(t) + 1);
}

inline std::optional<Task> task_from(const std::string& s) {
  for (Task t : all_tasks())
    if (s == to_string(t) || s == task_id(t)) return t;
  return std::nullopt;
}

using CategoryDistribution = std::array<double, kNumCategories>;
using TaskDistribution = std::array<double, kNumTasks>;

enum class DetectionMode { semi, real, noisy };

inline const char* to_string(DetectionMode m) {
  switch (m) {
    case DetectionMode::semi: return "semi";
    case DetectionMode::real: return "real";
    case DetectionMode::noisy: return "noisy";
  }
  return "?";
}

struct SceneDescription {
  std::string object_id = "o";
  // (label, probability); a label may repeat (two-handled pots)
  std::vector<std::pair<PartLabel, double>> parts;
  Pose pose = Pose::upright;
  double pose_prob = 1.0;
  Containment containment = Containment::empty;
  // category prior over the 11 leaf categories; empty = uniform
  std::optional<CategoryDistribution> category_prior;
  // either a fixed task or a prior over the 7 tasks; both empty = uniform
  std::optional<Task> given_task;
  std::optional<TaskDistribution> task_prior;

  int handle_count() const {
    int n = 0;
    for (const auto& [label, p] : parts)
      if (label == PartLabel::handle) ++n;
    return n;
  }
};

}  // namespace plg

#endif  // PLG_SCENE_HPP
