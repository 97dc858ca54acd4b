#ifndef PLG_PARTS_HPP
#define PLG_PARTS_HPP

// Part segmentation of a completed cloud. Thin sideways objects become
// handle + usable_area tools; everything else is treated as a container whose
// body is banded along the symmetry axis, with handle clusters pulled out via
// a robust circle fit on the footprint. Part bounding boxes then spawn the
// pre-grasp hypotheses.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "plg/completion.hpp"
#include "plg/geometry.hpp"
#include "plg/scene.hpp"

namespace plg {

struct PartConfig {
  double band_split_lo = 1.0 / 3;  // bottom|middle boundary along the axis
  double band_split_hi = 2.0 / 3;  // middle|top boundary
  double handle_tol = 0.15;        // handle candidates lie beyond r*(1+tol)
  int min_handle_points = 20;
  double tool_thickness = 0.05;    // both cross extents below this => tool
  double link_radius = 0.01;       // cluster linkage, 2x default pitch
  double circle_conf = 0.10;       // "good circle": rms under 10% of radius
  double candidate_frac_max = 0.25;  // a handle is an appendage, not the bulk
  double ghost_reflected_frac = 0.9;  // cluster mostly mirror points => ghost
  double jump_frac = 0.25;         // tool split: jump vs max cross radius
  double high_conf = 0.8;          // "real" detection keeps parts above this
  double gripper_depth = 0.04;     // finger length for table reachability
};

enum class Layout { tool, container };

struct PartInfo {
  PartLabel label = PartLabel::middle;
  OrientedBox box;
  double confidence = 1.0;
  std::vector<int> indices;  // into the completed cloud
};

struct PartSegmentation {
  std::vector<PartLabel> assignment;  // one label per completed point
  std::vector<PartInfo> parts;        // bands bottom..top, then handles
  Layout layout = Layout::container;
  CircleFit footprint;
  bool circle_ok = false;
  int ghost_clusters_dropped = 0;
};

struct PreGraspHypothesis {
  PartLabel part = PartLabel::middle;
  int part_index = 0;
  int face_index = 0;  // 0..5, pairs (+x,-x,+y,-y,+z,-z) of the part box
  int variant = 0;     // which in-face direction the gripper closes along
  Vec3 position = Vec3::Zero();  // face center
  Vec3 approach = Vec3::Zero();  // inward face normal, unit
  Vec3 closing = Vec3::Zero();   // unit
  bool reachable = true;
};

namespace detail {

inline OrientedBox box_of(const PointCloud& cloud, const std::vector<int>& idx,
                          const Eigen::Matrix3d& axes, const Vec3& origin) {
  Vec3 lo = Vec3::Constant(1e18), hi = Vec3::Constant(-1e18);
  for (int i : idx) {
    Vec3 d = cloud.pts[i].p - origin;
    for (int c = 0; c < 3; ++c) {
      double s = d.dot(axes.col(c));
      lo(c) = std::min(lo(c), s);
      hi(c) = std::max(hi(c), s);
    }
  }
  OrientedBox b;
  b.axes = axes;
  Vec3 mid = 0.5 * (lo + hi);
  b.center = origin + axes * mid;
  b.half_extents = (0.5 * (hi - lo)).cwiseMax(1e-6);
  return b;
}

// greedy union-find clustering at a fixed linkage radius
inline std::vector<std::vector<int>> link_clusters(
    const PointCloud& cloud, const std::vector<int>& candidates,
    double radius) {
  std::vector<int> parent(candidates.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  double r2 = radius * radius;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      if ((cloud.pts[candidates[i]].p - cloud.pts[candidates[j]].p)
              .squaredNorm() <= r2) {
        int a = find(int(i)), b = find(int(j));
        if (a != b) parent[b] = a;
      }
    }
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    groups[find(int(i))].push_back(candidates[i]);
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  // deterministic order: biggest first, then by first member index
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return out;
}

// confidence of a handle cluster: fit a circle in the cluster's own principal
// plane; handle arcs fit well, noise blurs the fit
inline double handle_confidence(const PointCloud& cloud,
                                const std::vector<int>& idx) {
  if (idx.size() < 5) return 0.5;
  Vec3 mean = Vec3::Zero();
  for (int i : idx) mean += cloud.pts[i].p;
  mean /= double(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : idx) {
    Vec3 d = cloud.pts[i].p - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Vec3 e1 = eig.eigenvectors().col(2), e2 = eig.eigenvectors().col(1);
  std::vector<Eigen::Vector2d> plane;
  plane.reserve(idx.size());
  for (int i : idx) {
    Vec3 d = cloud.pts[i].p - mean;
    plane.emplace_back(d.dot(e1), d.dot(e2));
  }
  CircleFit fit;
  if (!fit_circle(plane, fit) || !(fit.r > 1e-6)) return 0.5;
  return std::clamp(1.0 - 5.0 * fit.rms / fit.r, 0.05, 1.0);
}

}  // namespace detail

inline PartSegmentation segment_parts(const CompletionResult& res,
                                      const PartConfig& cfg = {}) {
  const PointCloud& cloud = res.completed;
  if (cloud.empty()) throw InputError("parts: empty cloud");
  const Vec3 a = res.axis.direction;
  if (a.norm() < 1e-9) throw InputError("parts: degenerate symmetry axis");
  const Vec3 c = res.axis.point;
  const Eigen::Matrix3d frame = res.object_frame.rotation;
  const std::size_t n_orig =
      res.original_count > 0 ? res.original_count : cloud.size();

  PartSegmentation seg;
  seg.assignment.assign(cloud.size(), PartLabel::middle);

  std::vector<double> s(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    s[i] = (cloud.pts[i].p - c).dot(a);

  // cross extents of the completion box, full widths
  double cross[2] = {0, 0};
  int nc = 0;
  for (int col = 0; col < 3; ++col)
    if (std::abs(res.box.axes.col(col).dot(a)) < 0.9)
      cross[std::min(nc++, 1)] = 2.0 * res.box.half_extents(col);

  bool tool = res.pose_estimate.pose == Pose::sideways && nc == 2 &&
              cross[0] < cfg.tool_thickness && cross[1] < cfg.tool_thickness;

  if (tool) {
    seg.layout = Layout::tool;
    double smin = *std::min_element(s.begin(), s.end());
    double smax = *std::max_element(s.begin(), s.end());
    double span = std::max(smax - smin, 1e-9);

    // cross-section radius profile along the axis; the biggest jump between
    // adjacent occupied bins marks the handle / usable-area boundary
    int bins = std::clamp(int(span / 0.01), 8, 60);
    std::vector<double> prof(bins, -1.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      int b = std::min(bins - 1, int((s[i] - smin) / span * bins));
      Vec3 d = cloud.pts[i].p - c;
      double rc = (d - s[i] * a).norm();
      prof[b] = std::max(prof[b], rc);
    }
    double max_r = *std::max_element(prof.begin(), prof.end());
    double best_jump = 0;
    int cut = bins / 2;
    int prev = -1;
    for (int b = 0; b < bins; ++b) {
      if (prof[b] < 0) continue;
      if (prev >= 0) {
        double jump = std::abs(prof[b] - prof[prev]);
        if (jump > best_jump) {
          best_jump = jump;
          cut = b;
        }
      }
      prev = b;
    }
    double s_cut = best_jump > cfg.jump_frac * max_r
                       ? smin + span * cut / bins
                       : smin + 0.5 * span;

    std::vector<int> side_a, side_b;
    double rad_a = 0, rad_b = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      Vec3 d = cloud.pts[i].p - c;
      double rc = (d - s[i] * a).norm();
      if (s[i] < s_cut) {
        side_a.push_back(int(i));
        rad_a += rc;
      } else {
        side_b.push_back(int(i));
        rad_b += rc;
      }
    }
    if (side_a.empty() || side_b.empty())
      throw InferenceError("parts: tool split produced an empty side");
    rad_a /= double(side_a.size());
    rad_b /= double(side_b.size());
    const std::vector<int>& handle = rad_a <= rad_b ? side_a : side_b;
    const std::vector<int>& usable = rad_a <= rad_b ? side_b : side_a;

    for (int i : handle) seg.assignment[i] = PartLabel::handle;
    for (int i : usable) seg.assignment[i] = PartLabel::usable_area;

    double frac_handle = double(handle.size()) / double(cloud.size());
    double span_handle =
        (rad_a <= rad_b ? (s_cut - smin) : (smax - s_cut)) / span;
    auto tool_conf = [&](double frac, double span_frac) {
      return std::clamp(frac / std::max(span_frac, 1e-6), 0.05, 1.0);
    };
    PartInfo ph;
    ph.label = PartLabel::handle;
    ph.indices = handle;
    ph.box = detail::box_of(cloud, handle, frame, c);
    ph.confidence = tool_conf(frac_handle, span_handle);
    PartInfo pu;
    pu.label = PartLabel::usable_area;
    pu.indices = usable;
    pu.box = detail::box_of(cloud, usable, frame, c);
    pu.confidence = tool_conf(1.0 - frac_handle, 1.0 - span_handle);
    seg.parts.push_back(std::move(ph));
    seg.parts.push_back(std::move(pu));
    return seg;
  }

  // container path: robust circle fit on the top-region footprint
  seg.layout = Layout::container;
  std::vector<ProjectedPoint> w = project_to_table(cloud);
  double d_z = 0;
  for (const auto& q : w) d_z = std::max(d_z, q.z);
  double sigma = res.used_sigma;
  std::vector<Eigen::Vector2d> fitset;
  for (const auto& q : w)
    if (q.z > sigma * d_z) fitset.push_back(q.xy);
  if (fitset.size() < 8)
    for (const auto& q : w) fitset.push_back(q.xy);

  std::vector<int> handle_candidates;
  // robust seed: median center and radius shrug off a protruding handle that
  // would drag a plain least-squares circle sideways
  {
    auto median_of = [](std::vector<double>& v) {
      std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
      return v[v.size() / 2];
    };
    std::vector<double> xs, ys;
    xs.reserve(fitset.size());
    ys.reserve(fitset.size());
    for (const auto& p : fitset) {
      xs.push_back(p.x());
      ys.push_back(p.y());
    }
    double mcx = median_of(xs), mcy = median_of(ys);
    std::vector<double> dist;
    dist.reserve(fitset.size());
    for (const auto& p : fitset)
      dist.push_back(std::hypot(p.x() - mcx, p.y() - mcy));
    double r0 = median_of(dist);

    CircleFit fit;
    bool have_fit = false;
    if (r0 > 1e-6) {
      std::vector<Eigen::Vector2d> ring;
      for (const auto& p : fitset) {
        double d = std::hypot(p.x() - mcx, p.y() - mcy);
        if (d >= 0.7 * r0 && d <= 1.3 * r0) ring.push_back(p);
      }
      if (ring.size() >= 8 && ring.size() * 10 >= fitset.size() * 3)
        have_fit = fit_circle(ring, fit);
    }
    if (!have_fit) have_fit = fit_circle(fitset, fit);

    if (have_fit && fit.r > 1e-6) {
      seg.footprint = fit;
      seg.circle_ok = fit.rms < cfg.circle_conf * fit.r;
      if (seg.circle_ok) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
          double d = std::hypot(cloud.pts[i].p.x() - fit.cx,
                                cloud.pts[i].p.y() - fit.cy);
          if (d > fit.r * (1.0 + cfg.handle_tol))
            handle_candidates.push_back(int(i));
        }
        // a handle is a small appendage; if most of the object lies outside
        // the circle the fit latched onto the wrong structure
        if (double(handle_candidates.size()) >
            cfg.candidate_frac_max * double(cloud.size())) {
          handle_candidates.clear();
          seg.circle_ok = false;
        }
      }
    }
  }

  std::vector<char> is_handle(cloud.size(), 0);
  std::vector<PartInfo> handles;
  if (!handle_candidates.empty()) {
    auto clusters =
        detail::link_clusters(cloud, handle_candidates, cfg.link_radius);
    for (auto& members : clusters) {
      if (int(members.size()) < cfg.min_handle_points) continue;
      std::size_t reflected = 0;
      for (int i : members)
        if (std::size_t(i) >= n_orig) ++reflected;
      if (double(reflected) >=
          cfg.ghost_reflected_frac * double(members.size())) {
        ++seg.ghost_clusters_dropped;  // mirror artifact of the completion
        continue;
      }
      PartInfo ph;
      ph.label = PartLabel::handle;
      ph.confidence = detail::handle_confidence(cloud, members);
      ph.box = detail::box_of(cloud, members, frame, c);
      ph.indices = std::move(members);
      handles.push_back(std::move(ph));
    }
  }
  for (const auto& h : handles)
    for (int i : h.indices) is_handle[i] = 1;

  // the body splits into bands along the symmetry axis
  double smin = 1e18, smax = -1e18;
  std::size_t body_total = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!is_handle[i]) {
      smin = std::min(smin, s[i]);
      smax = std::max(smax, s[i]);
      ++body_total;
    }
  if (body_total == 0)
    throw InferenceError("parts: no body points outside handle clusters");
  double span = std::max(smax - smin, 1e-9);

  std::array<std::vector<int>, 3> bands;  // bottom, middle, top
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (is_handle[i]) {
      seg.assignment[i] = PartLabel::handle;
      continue;
    }
    double f = (s[i] - smin) / span;
    int b = f < cfg.band_split_lo ? 0 : f < cfg.band_split_hi ? 1 : 2;
    bands[b].push_back(int(i));
    seg.assignment[i] =
        b == 0 ? PartLabel::bottom : b == 1 ? PartLabel::middle : PartLabel::top;
  }

  const PartLabel band_label[3] = {PartLabel::bottom, PartLabel::middle,
                                   PartLabel::top};
  const double band_width[3] = {cfg.band_split_lo,
                                cfg.band_split_hi - cfg.band_split_lo,
                                1.0 - cfg.band_split_hi};
  for (int b = 0; b < 3; ++b) {
    if (bands[b].empty()) continue;
    PartInfo pi;
    pi.label = band_label[b];
    double expected = double(body_total) * band_width[b] /
                      (band_width[0] + band_width[1] + band_width[2]);
    pi.confidence =
        std::clamp(double(bands[b].size()) / std::max(expected, 1.0), 0.05, 1.0);
    pi.box = detail::box_of(cloud, bands[b], frame, c);
    pi.indices = std::move(bands[b]);
    seg.parts.push_back(std::move(pi));
  }
  for (auto& h : handles) seg.parts.push_back(std::move(h));
  return seg;
}

inline std::vector<PreGraspHypothesis> pre_grasp_hypotheses(
    const PartSegmentation& seg, const PartConfig& cfg = {}) {
  std::vector<PreGraspHypothesis> out;
  for (std::size_t pi = 0; pi < seg.parts.size(); ++pi) {
    const PartInfo& part = seg.parts[pi];
    const Eigen::Matrix3d& M = part.box.axes;
    for (int face = 0; face < 6; ++face) {
      int ax = face / 2;
      double sign = face % 2 == 0 ? 1.0 : -1.0;
      Vec3 outward = sign * M.col(ax);
      Vec3 fc = part.box.center + outward * part.box.half_extents(ax);
      int t1 = (ax + 1) % 3, t2 = (ax + 2) % 3;
      // gripper slab behind the face: face footprint extruded outward
      double zmin = 1e18;
      for (double u : {-1.0, 1.0})
        for (double v : {-1.0, 1.0})
          for (double d : {0.0, cfg.gripper_depth}) {
            Vec3 corner = fc + outward * d +
                          u * part.box.half_extents(t1) * M.col(t1) +
                          v * part.box.half_extents(t2) * M.col(t2);
            zmin = std::min(zmin, corner.z());
          }
      for (int variant = 0; variant < 2; ++variant) {
        PreGraspHypothesis h;
        h.part = part.label;
        h.part_index = int(pi);
        h.face_index = face;
        h.variant = variant;
        h.position = fc;
        h.approach = -outward;
        h.closing = M.col(variant == 0 ? t1 : t2);
        h.reachable = zmin >= -1e-9;
        out.push_back(h);
      }
    }
  }
  return out;
}

// Scene fragment (parts + pose) under the three detection regimes.
inline SceneDescription detection_confidences(const PartSegmentation& seg,
                                              const CompletionResult& res,
                                              DetectionMode mode,
                                              const PartConfig& cfg = {}) {
  SceneDescription sd;
  if (!res.completed.meta.id.empty()) sd.object_id = res.completed.meta.id;
  switch (mode) {
    case DetectionMode::semi:
      for (const auto& p : seg.parts) sd.parts.emplace_back(p.label, 1.0);
      sd.pose = res.completed.meta.pose.value_or(res.pose_estimate.pose);
      sd.pose_prob = 1.0;
      break;
    case DetectionMode::real:
      for (const auto& p : seg.parts)
        if (p.confidence >= cfg.high_conf) sd.parts.emplace_back(p.label, 1.0);
      sd.pose = res.pose_estimate.pose;
      sd.pose_prob = 1.0;
      break;
    case DetectionMode::noisy:
      for (const auto& p : seg.parts)
        sd.parts.emplace_back(p.label, p.confidence);
      sd.pose = res.pose_estimate.pose;
      sd.pose_prob = std::clamp(res.pose_estimate.confidence, 0.05, 1.0);
      break;
  }
  if (res.completed.meta.contains)
    sd.containment = *res.completed.meta.contains;
  return sd;
}

}  // namespace plg

#endif  // PLG_PARTS_HPP
