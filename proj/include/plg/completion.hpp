#ifndef PLG_COMPLETION_HPP
#define PLG_COMPLETION_HPP

// Symmetry-based completion of a partial view. The visible points vote for a
// vertical symmetry-ish axis through the top-region centroid; rotating the
// cloud 180 degrees about that axis fills in the unseen side. Also derives
// the enclosing oriented box, the object frame and a discrete pose estimate.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "plg/geometry.hpp"

namespace plg {

struct OrientedBox {
  Vec3 center = Vec3::Zero();
  // columns are the box directions; column 2 is the table normal for boxes
  // produced by complete_cloud
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  Vec3 half_extents = Vec3::Zero();
};

struct SymmetryAxis {
  Vec3 point = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

struct ObjectFrame {
  Vec3 origin = Vec3::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // z = symmetry axis
};

struct PoseEstimate {
  Pose pose = Pose::upright;
  double confidence = 0.0;
};

struct CompletionResult {
  PointCloud completed;
  OrientedBox box;
  SymmetryAxis axis;
  ObjectFrame object_frame;
  PoseEstimate pose_estimate;
  double used_sigma = 0.0;
  bool top_fallback = false;      // top region was empty, used all points
  bool footprint_circular = false;
  // the first original_count points of `completed` are the input points, the
  // rest are their reflections; 0 means "no reflection bookkeeping"
  std::size_t original_count = 0;
};

struct ProjectedPoint {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
  double z = 0.0;
};

struct TopRegion {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  bool fallback = false;
};

inline std::vector<ProjectedPoint> project_to_table(const PointCloud& cloud) {
  std::vector<ProjectedPoint> w;
  w.reserve(cloud.size());
  for (const auto& q : cloud.pts)
    w.push_back({Eigen::Vector2d(q.p.x(), q.p.y()), q.p.z()});
  return w;
}

// Centroid of the projections whose source height exceeds sigma * d_z. An
// empty top region falls back to the centroid of everything, flagged so the
// caller can tell.
inline TopRegion top_region(const std::vector<ProjectedPoint>& projected,
                            double d_z, double sigma) {
  if (projected.empty()) throw InputError("top region: no projected points");
  if (!(d_z > 0)) throw InputError("top region: d_z must be positive");
  if (sigma < 0 || sigma > 1)
    throw InputError("top region: sigma must lie in [0, 1]");
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int count = 0;
  for (const auto& w : projected)
    if (w.z > sigma * d_z) {
      sum += w.xy;
      ++count;
    }
  TopRegion out;
  if (count == 0) {
    for (const auto& w : projected) sum += w.xy;
    count = int(projected.size());
    out.fallback = true;
  }
  out.centroid = sum / count;
  return out;
}

namespace detail {

// Circular vs parallelepiped footprint: take the outermost point per angular
// bin around the projection centroid and fit a circle through those outline
// samples; a round footprint leaves a small relative residual, a boxy one a
// large one (corners vs edge midpoints).
inline bool footprint_circular(const std::vector<ProjectedPoint>& projected) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& w : projected) mean += w.xy;
  mean /= double(projected.size());

  constexpr int kBins = 36;
  std::array<double, kBins> best_r;
  std::array<Eigen::Vector2d, kBins> best_p;
  best_r.fill(-1.0);
  for (const auto& w : projected) {
    Eigen::Vector2d d = w.xy - mean;
    double r = d.norm();
    if (r < 1e-9) continue;
    int bin = int((std::atan2(d.y(), d.x()) + M_PI) / (2 * M_PI) * kBins);
    bin = std::clamp(bin, 0, kBins - 1);
    if (r > best_r[bin]) {
      best_r[bin] = r;
      best_p[bin] = w.xy;
    }
  }
  std::vector<std::pair<double, Eigen::Vector2d>> outline;
  for (int i = 0; i < kBins; ++i)
    if (best_r[i] > 0) outline.emplace_back(best_r[i], best_p[i]);
  if (outline.size() < 8) return false;  // not enough angular coverage
  // a protruding handle occupies a few bins at large radius; trim those so a
  // mug still reads as cylinder-like
  std::sort(outline.begin(), outline.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  outline.resize(outline.size() - outline.size() / 5);
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(outline.size());
  for (const auto& [r, p] : outline) pts.push_back(p);
  CircleFit fit;
  if (!fit_circle(pts, fit) || !(fit.r > 1e-6)) return false;
  return fit.rms / fit.r < 0.07;
}

// Discrete pose from the axis tilt. Inside a tolerance cone of a pole the
// confidence runs linearly from 1 at the pole down to 0.5 at the cone rim;
// between the cones it keeps falling toward the 45-degree watershed, floored
// at 0.05.
inline PoseEstimate pose_from_axis(const Vec3& axis_dir,
                                   double tol_deg = 15.0) {
  double c = std::clamp(std::abs(axis_dir.normalized().dot(Vec3::UnitZ())),
                        0.0, 1.0);
  double up = std::acos(c) * 180.0 / M_PI;  // angle to vertical, 0..90
  double side = 90.0 - up;
  PoseEstimate est;
  if (up <= tol_deg) {
    est.pose = Pose::upright;
    est.confidence = 0.5 + 0.5 * (tol_deg - up) / tol_deg;
  } else if (side <= tol_deg) {
    est.pose = Pose::sideways;
    est.confidence = 0.5 + 0.5 * (tol_deg - side) / tol_deg;
  } else {
    double phi = std::min(up, side);
    est.pose = up <= side ? Pose::upright : Pose::sideways;
    est.confidence =
        std::clamp(0.5 * (45.0 - phi) / (45.0 - tol_deg), 0.05, 0.5);
  }
  return est;
}

inline Vec3 canonical_sign(Vec3 v) {
  constexpr double eps = 1e-9;
  if (v.z() < -eps) return -v;
  if (v.z() > eps) return v;
  if (v.x() < -eps) return -v;
  if (v.x() > eps) return v;
  return v.y() < 0 ? Vec3(-v) : v;
}

}  // namespace detail

inline CompletionResult complete_cloud(const PointCloud& partial,
                                       double sigma) {
  if (partial.empty()) throw InputError("completion: empty cloud");
  if (sigma < 0 || sigma > 1)
    throw InputError("completion: sigma must lie in [0, 1]");

  std::vector<ProjectedPoint> w = project_to_table(partial);
  double d_z = 0.0;
  for (const auto& q : w) d_z = std::max(d_z, q.z);
  if (!(d_z > 1e-6))
    throw InputError("completion: cloud has no height above the table");

  // horizontal directions from PCA of the footprint
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& q : w) mean += q.xy;
  mean /= double(w.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& q : w) {
    Eigen::Vector2d d = q.xy - mean;
    cov += d * d.transpose();
  }
  cov /= double(w.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  // eigenvalues ascending; a vanishing minor variance means the projections
  // sit on a line (or a point) and no box can be oriented
  if (std::sqrt(std::max(eig.eigenvalues()(0), 0.0)) < 1e-5)
    throw InputError("completion: degenerate footprint, projections collinear");
  Eigen::Vector2d major = eig.eigenvectors().col(1);
  Vec3 e1(major.x(), major.y(), 0.0);
  Vec3 e2(-major.y(), major.x(), 0.0);  // minor direction, right-handed set

  CompletionResult res;
  res.footprint_circular = detail::footprint_circular(w);
  res.used_sigma = sigma;

  TopRegion top = top_region(w, d_z, sigma);
  res.top_fallback = top.fallback;
  Vec3 center(top.centroid.x(), top.centroid.y(), 0.5 * d_z);

  double h1 = 0.0, h2 = 0.0;
  for (const auto& q : partial.pts) {
    Vec3 d = q.p - center;
    h1 = std::max(h1, std::abs(d.dot(e1)));
    h2 = std::max(h2, std::abs(d.dot(e2)));
  }
  double v = 0.5 * d_z;

  res.box.center = center;
  res.box.axes.col(0) = e1;
  res.box.axes.col(1) = e2;
  res.box.axes.col(2) = Vec3::UnitZ();
  res.box.half_extents = Vec3(h1, h2, v);

  // symmetry axis: the box direction orthogonal to the two closest extents;
  // a three-way tie (all within 2%) votes for the vertical
  double ext[3] = {h1, h2, v};
  double lo = std::min({h1, h2, v}), hi = std::max({h1, h2, v});
  int axis_col;
  if (hi - lo <= 0.02 * hi) {
    axis_col = 2;
  } else {
    double d01 = std::abs(ext[0] - ext[1]);
    double d02 = std::abs(ext[0] - ext[2]);
    double d12 = std::abs(ext[1] - ext[2]);
    if (d01 <= d02 && d01 <= d12) axis_col = 2;
    else if (d02 <= d12) axis_col = 1;
    else axis_col = 0;
  }
  if (axis_col != 2) {
    // sanity-check a horizontal pick against the normals: around a true
    // symmetry axis the normals are mostly orthogonal to it, so a protruding
    // handle that stretched one footprint extent cannot steal the axis from
    // an upright body
    auto alignment = [&](const Vec3& dir) {
      double j = 0;
      for (const auto& q : partial.pts) {
        double d = q.n.dot(dir);
        j += d * d;
      }
      return j / double(partial.size());
    };
    if (alignment(Vec3::UnitZ()) <= alignment(res.box.axes.col(axis_col)))
      axis_col = 2;
  }
  Vec3 a = detail::canonical_sign(res.box.axes.col(axis_col));
  res.axis.point = center;
  res.axis.direction = a;

  // reflect: a 180-degree turn about the axis line
  Eigen::Matrix3d R = 2.0 * a * a.transpose() - Eigen::Matrix3d::Identity();
  res.original_count = partial.size();
  res.completed = partial;
  res.completed.pts.reserve(partial.size() * 2);
  for (const auto& q : partial.pts) {
    Point m = q;
    m.p = center + R * (q.p - center);
    m.n = (R * q.n).normalized();
    res.completed.pts.push_back(m);
  }

  // object frame: z along the axis, x along the larger remaining box extent
  int c1 = (axis_col + 1) % 3, c2 = (axis_col + 2) % 3;
  if (ext[c2] > ext[c1]) std::swap(c1, c2);
  Vec3 x = res.box.axes.col(c1);
  Vec3 y = a.cross(x);
  res.object_frame.origin = center;
  res.object_frame.rotation.col(0) = x;
  res.object_frame.rotation.col(1) = y;
  res.object_frame.rotation.col(2) = a;

  res.pose_estimate = detail::pose_from_axis(a);
  return res;
}

// sigma picked from the footprint: round cross-sections concentrate the top
// region tighter than boxy ones
inline CompletionResult complete_cloud(const PointCloud& partial) {
  if (partial.empty()) throw InputError("completion: empty cloud");
  double sigma =
      detail::footprint_circular(project_to_table(partial)) ? 0.7 : 0.3;
  return complete_cloud(partial, sigma);
}

}  // namespace plg

#endif  // PLG_COMPLETION_HPP
