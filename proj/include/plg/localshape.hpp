// Local-shape grasp scoring: depth images inside the gripper volume, their
// gradient-magnitude features, and an RBF-kernel classifier with sigmoid
// calibration that turns pre-grasp hypotheses into ranked grasp points.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "plg/parts.hpp"

namespace plg {

// Volume of interest in front of the gripper. Columns of `axes` are the
// closing direction, the in-plane normal, and the approach direction; depth
// is measured along the approach axis from the volume origin.
struct GripperVolume {
  Vec3 origin = Vec3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  Vec3 extents = Vec3(0.070, 0.147, 0.060);  // metres

  static constexpr double kVoxelU = 0.007;
  static constexpr double kVoxelV = 0.007;
  static constexpr double kVoxelZ = 0.015;

  int rows() const { return int(std::ceil(extents.x() / kVoxelU - 1e-9)); }
  int cols() const { return int(std::ceil(extents.y() / kVoxelV - 1e-9)); }
  int slabs() const { return int(std::ceil(extents.z() / kVoxelZ - 1e-9)); }

  Vec3 to_frame(const Vec3& world) const {
    return axes.transpose() * (world - origin);
  }
};

// Default window: 10 x 21 cells, 6 cm deep.
inline constexpr double kDefaultVolumeDepth = 0.060;

struct DepthImage {
  int rows = 0;
  int cols = 0;
  double max_depth_mm = 0.0;  // far plane; substituted for empty cells
  std::vector<double> z;      // row-major, mm; kSentinel where no point fell

  static constexpr double kSentinel = -1.0;

  double& at(int r, int c) { return z[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return z[std::size_t(r) * cols + c]; }
};

struct DgiFeature {
  int rows = 0;  // source rows - 2
  int cols = 0;
  std::vector<double> mag;  // row-major gradient magnitudes, mm

  std::size_t dim() const { return mag.size(); }
};

inline DepthImage depth_image(const std::vector<Vec3>& points_in_frame,
                              const GripperVolume& vol) {
  if (!(vol.extents.minCoeff() > 0))
    throw InputError("gripper volume extents must be positive");
  DepthImage di;
  di.rows = vol.rows();
  di.cols = vol.cols();
  di.max_depth_mm = vol.extents.z() * 1000.0;
  di.z.assign(std::size_t(di.rows) * di.cols, DepthImage::kSentinel);
  for (const Vec3& p : points_in_frame) {
    if (p.x() < 0 || p.x() > vol.extents.x()) continue;
    if (p.y() < 0 || p.y() > vol.extents.y()) continue;
    if (p.z() < 0 || p.z() > vol.extents.z()) continue;
    int r = std::min(int(p.x() / GripperVolume::kVoxelU), di.rows - 1);
    int c = std::min(int(p.y() / GripperVolume::kVoxelV), di.cols - 1);
    double zmm = p.z() * 1000.0;
    double& cell = di.at(r, c);
    if (cell == DepthImage::kSentinel || zmm < cell) cell = zmm;
  }
  return di;
}

// Central differences on the interior cells. Empty cells read as the far
// plane so that the rim of an object against free space shows up as a strong
// drop-off edge rather than poisoning the differences.
inline DgiFeature dgi(const DepthImage& di) {
  if (di.rows < 3 || di.cols < 3) {
    std::ostringstream os;
    os << "depth image too small for gradients: " << di.rows << "x" << di.cols
       << " (need at least 3x3)";
    throw InputError(os.str());
  }
  double far = di.max_depth_mm;
  if (far <= 0) {
    // hand-built grids may not carry a far plane; fall back to the deepest
    // observed value so an isolated sentinel still reads as "behind"
    for (double v : di.z)
      if (v != DepthImage::kSentinel) far = std::max(far, v);
  }
  auto depth = [&](int r, int c) {
    double v = di.at(r, c);
    return v == DepthImage::kSentinel ? far : v;
  };
  DgiFeature f;
  f.rows = di.rows - 2;
  f.cols = di.cols - 2;
  f.mag.resize(std::size_t(f.rows) * f.cols);
  for (int r = 1; r + 1 < di.rows; ++r)
    for (int c = 1; c + 1 < di.cols; ++c) {
      double du = depth(r, c + 1) - depth(r, c - 1);  // along the row
      double dv = depth(r + 1, c) - depth(r - 1, c);  // across rows
      f.mag[std::size_t(r - 1) * f.cols + (c - 1)] = std::hypot(du, dv);
    }
  return f;
}

struct TrainingSample {
  DgiFeature feature;
  bool graspable = false;
};

struct TrainOptions {
  double gamma = 50.0;  // RBF width on metre-scaled features
  int folds = 4;
  double cost = 10.0;        // soft-margin C
  double tolerance = 1e-4;   // KKT violation threshold
  int max_sweeps = 100000;   // cap on full coordinate passes
  bool fixed_calibration = false;  // use A=2, B=0.5 instead of fitting
  double feature_scale = 1e-3;     // mm -> m before the kernel
};

struct TrainedClassifier {
  int feat_rows = 0;
  int feat_cols = 0;
  double gamma = 50.0;
  double feature_scale = 1e-3;
  double bias = 0.0;
  double sigmoid_a = 2.0;
  double sigmoid_b = 0.5;
  std::vector<std::vector<double>> support;  // metre-scaled feature vectors
  std::vector<double> coef;                  // alpha_i * y_i per support vector

  // training metadata
  int trained_on = 0;
  double cv_accuracy = -1.0;  // fraction in [0,1], -1 when not measured
  bool converged = false;
  int sweeps = 0;

  void check_shape(const DgiFeature& f) const {
    if (f.rows != feat_rows || f.cols != feat_cols) {
      std::ostringstream os;
      os << "feature shape " << f.rows << "x" << f.cols
         << " does not match classifier " << feat_rows << "x" << feat_cols;
      throw InputError(os.str());
    }
  }

  // f(x) = sum_i coef_i K(s_i, x) + bias
  double decision(const DgiFeature& f) const {
    check_shape(f);
    double acc = bias;
    for (std::size_t i = 0; i < support.size(); ++i) {
      double d2 = 0;
      const auto& s = support[i];
      for (std::size_t k = 0; k < s.size(); ++k) {
        double d = s[k] - f.mag[k] * feature_scale;
        d2 += d * d;
      }
      acc += coef[i] * std::exp(-gamma * d2);
    }
    return acc;
  }
};

namespace detail {

inline double rbf(const std::vector<double>& a, const std::vector<double>& b,
                  double gamma) {
  double d2 = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

// Soft-margin kernel SVM by dual coordinate ascent. The bias is folded into
// the kernel (K+1), which drops the equality constraint and leaves simple
// box-clipped single-coordinate updates; the implicit bias is sum(alpha*y).
struct SvmFit {
  std::vector<double> alpha;  // box-constrained duals
  bool converged = false;
  int sweeps = 0;
};

inline SvmFit svm_dual_ascent(const Eigen::MatrixXd& kernel,
                              const std::vector<int>& y,
                              const TrainOptions& opt) {
  const int n = int(y.size());
  SvmFit fit;
  fit.alpha.assign(n, 0.0);
  // g_i = y_i * f(x_i): running decision values keep each sweep O(n^2)
  std::vector<double> f(n, 0.0);
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double worst = 0;
    for (int i = 0; i < n; ++i) {
      double grad = y[i] * f[i] - 1.0;
      double viol;
      if (fit.alpha[i] <= 0)
        viol = std::min(grad, 0.0);
      else if (fit.alpha[i] >= opt.cost)
        viol = std::max(grad, 0.0);
      else
        viol = grad;
      worst = std::max(worst, std::abs(viol));
      if (viol == 0) continue;
      double qii = kernel(i, i) + 1.0;  // +1 carries the bias term
      double next =
          std::clamp(fit.alpha[i] - grad / qii, 0.0, opt.cost);
      double delta = next - fit.alpha[i];
      if (delta == 0) continue;
      fit.alpha[i] = next;
      double step = delta * y[i];
      for (int j = 0; j < n; ++j) f[j] += step * (kernel(i, j) + 1.0);
    }
    fit.sweeps = sweep + 1;
    if (worst < opt.tolerance) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

// Platt scaling: fit P(graspable | u) = 1 / (1 + exp(A u + B)) by maximum
// likelihood over held-out pairs, with the usual prior-smoothed targets.
// Newton iterations with step halving, after Lin, Lin & Weng.
inline std::pair<double, double> fit_sigmoid(const std::vector<double>& u,
                                             const std::vector<int>& y) {
  const std::size_t n = u.size();
  double prior1 = 0, prior0 = 0;
  for (int yi : y) (yi > 0 ? prior1 : prior0) += 1;
  double hi = (prior1 + 1.0) / (prior1 + 2.0);
  double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] > 0 ? hi : lo;

  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double A, double B) {
    double obj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double fApB = A * u[i] + B;
      if (fApB >= 0)
        obj += t[i] * fApB + std::log1p(std::exp(-fApB));
      else
        obj += (t[i] - 1) * fApB + std::log1p(std::exp(fApB));
    }
    return obj;
  };
  double fval = objective(a, b);
  const int max_iter = 100;
  const double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;
  for (int it = 0; it < max_iter; ++it) {
    double h11 = sigma, h22 = sigma, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double fApB = a * u[i] + b;
      double p, q;
      if (fApB >= 0) {
        p = std::exp(-fApB) / (1.0 + std::exp(-fApB));
        q = 1.0 / (1.0 + std::exp(-fApB));
      } else {
        p = 1.0 / (1.0 + std::exp(fApB));
        q = std::exp(fApB) / (1.0 + std::exp(fApB));
      }
      double d2 = p * q;
      h11 += u[i] * u[i] * d2;
      h22 += d2;
      h21 += u[i] * d2;
      double d1 = t[i] - p;
      g1 += u[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    double det = h11 * h22 - h21 * h21;
    double dA = -(h22 * g1 - h21 * g2) / det;
    double dB = -(-h21 * g1 + h11 * g2) / det;
    double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    bool moved = false;
    while (step >= min_step) {
      double na = a + step * dA, nb = b + step * dB;
      double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {a, b};
}

inline std::vector<std::vector<double>> scale_features(
    const std::vector<TrainingSample>& data, double scale) {
  std::vector<std::vector<double>> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i].resize(data[i].feature.dim());
    for (std::size_t k = 0; k < out[i].size(); ++k)
      out[i][k] = data[i].feature.mag[k] * scale;
  }
  return out;
}

}  // namespace detail

// The calibrated sigmoid evaluates Eq-style P = 1/(1+exp(A u + B)) on the
// negated decision value u = -f(x). With the paper's positive A that maps
// larger decision values (the graspable side) to probabilities above one
// half; Platt fitting on the same convention recovers a positive A as well.
inline double grasp_probability(const TrainedClassifier& clf,
                                const DgiFeature& feature) {
  double u = -clf.decision(feature);
  double e = clf.sigmoid_a * u + clf.sigmoid_b;
  double p;
  if (e >= 0) {
    double t = std::exp(-e);
    p = t / (1.0 + t);
  } else {
    p = 1.0 / (1.0 + std::exp(e));
  }
  return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

inline TrainedClassifier train_classifier(
    const std::vector<TrainingSample>& data, const TrainOptions& opt = {}) {
  if (data.empty()) throw InputError("training set is empty");
  const int rows = data[0].feature.rows, cols = data[0].feature.cols;
  int pos = 0, neg = 0;
  for (const auto& s : data) {
    if (s.feature.rows != rows || s.feature.cols != cols) {
      std::ostringstream os;
      os << "training sample shape " << s.feature.rows << "x" << s.feature.cols
         << " does not match " << rows << "x" << cols;
      throw InputError(os.str());
    }
    (s.graspable ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw InputError(
        "training set needs both graspable and ungraspable examples");

  const int n = int(data.size());
  auto feats = detail::scale_features(data, opt.feature_scale);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) y[i] = data[i].graspable ? 1 : -1;

  Eigen::MatrixXd kernel(n, n);
  for (int i = 0; i < n; ++i) {
    kernel(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j)
      kernel(i, j) = kernel(j, i) = detail::rbf(feats[i], feats[j], opt.gamma);
  }

  // Cross-validation: held-out decision values feed the sigmoid fit and the
  // reported accuracy. Folds are dealt round-robin, which keeps the usual
  // alternating-label corpora balanced per fold.
  std::vector<double> cal_u;
  std::vector<int> cal_y;
  int cv_hits = 0, cv_tries = 0;
  if (opt.folds >= 2 && n >= opt.folds) {
    for (int fold = 0; fold < opt.folds; ++fold) {
      std::vector<int> tr, te;
      for (int i = 0; i < n; ++i)
        (i % opt.folds == fold ? te : tr).push_back(i);
      int tpos = 0, tneg = 0;
      for (int i : tr) (y[i] > 0 ? tpos : tneg) += 1;
      if (tpos == 0 || tneg == 0) continue;  // degenerate split, skip
      Eigen::MatrixXd sub(int(tr.size()), int(tr.size()));
      for (std::size_t a = 0; a < tr.size(); ++a)
        for (std::size_t b = 0; b < tr.size(); ++b)
          sub(int(a), int(b)) = kernel(tr[a], tr[b]);
      std::vector<int> suby(tr.size());
      for (std::size_t a = 0; a < tr.size(); ++a) suby[a] = y[tr[a]];
      auto fit = detail::svm_dual_ascent(sub, suby, opt);
      for (int i : te) {
        double f = 0;
        for (std::size_t a = 0; a < tr.size(); ++a) {
          if (fit.alpha[a] == 0) continue;
          f += fit.alpha[a] * suby[a] * (kernel(tr[a], i) + 1.0);
        }
        cal_u.push_back(-f);
        cal_y.push_back(y[i]);
        cv_tries += 1;
        if ((f > 0) == (y[i] > 0)) cv_hits += 1;
      }
    }
  }

  auto full = detail::svm_dual_ascent(kernel, y, opt);

  TrainedClassifier clf;
  clf.feat_rows = rows;
  clf.feat_cols = cols;
  clf.gamma = opt.gamma;
  clf.feature_scale = opt.feature_scale;
  clf.trained_on = n;
  clf.converged = full.converged;
  clf.sweeps = full.sweeps;
  double bias = 0;
  for (int i = 0; i < n; ++i) bias += full.alpha[i] * y[i];
  clf.bias = bias;
  for (int i = 0; i < n; ++i) {
    if (full.alpha[i] <= 1e-10) continue;
    clf.support.push_back(feats[i]);
    clf.coef.push_back(full.alpha[i] * y[i]);
  }
  if (cv_tries > 0) clf.cv_accuracy = double(cv_hits) / cv_tries;
  if (opt.fixed_calibration || cal_u.empty()) {
    clf.sigmoid_a = 2.0;
    clf.sigmoid_b = 0.5;
  } else {
    auto [a, b] = detail::fit_sigmoid(cal_u, cal_y);
    clf.sigmoid_a = a;
    clf.sigmoid_b = b;
  }
  return clf;
}

// --- model serialization ------------------------------------------------

inline void save_classifier(const TrainedClassifier& clf, std::ostream& os) {
  os << "dgi-svm 1\n";
  os << "shape " << clf.feat_rows << " " << clf.feat_cols << "\n";
  os << "gamma " << detail::fmt_double(clf.gamma) << "\n";
  os << "scale " << detail::fmt_double(clf.feature_scale) << "\n";
  os << "sigmoid " << detail::fmt_double(clf.sigmoid_a) << " "
     << detail::fmt_double(clf.sigmoid_b) << "\n";
  os << "bias " << detail::fmt_double(clf.bias) << "\n";
  os << "meta " << clf.trained_on << " " << detail::fmt_double(clf.cv_accuracy)
     << "\n";
  os << "support " << clf.support.size() << "\n";
  for (std::size_t i = 0; i < clf.support.size(); ++i) {
    os << detail::fmt_double(clf.coef[i]);
    for (double v : clf.support[i]) os << " " << detail::fmt_double(v);
    os << "\n";
  }
}

inline TrainedClassifier load_classifier(std::istream& is) {
  auto fail = [](const std::string& what) -> TrainedClassifier {
    throw InputError("malformed classifier file: " + what);
  };
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "dgi-svm" || version != 1)
    return fail("bad header");
  TrainedClassifier clf;
  std::string key;
  std::size_t nsv = 0;
  if (!(is >> key >> clf.feat_rows >> clf.feat_cols) || key != "shape")
    return fail("shape");
  if (!(is >> key >> clf.gamma) || key != "gamma") return fail("gamma");
  if (!(is >> key >> clf.feature_scale) || key != "scale")
    return fail("scale");
  if (!(is >> key >> clf.sigmoid_a >> clf.sigmoid_b) || key != "sigmoid")
    return fail("sigmoid");
  if (!(is >> key >> clf.bias) || key != "bias") return fail("bias");
  if (!(is >> key >> clf.trained_on >> clf.cv_accuracy) || key != "meta")
    return fail("meta");
  if (!(is >> key >> nsv) || key != "support") return fail("support count");
  if (clf.feat_rows < 1 || clf.feat_cols < 1) return fail("shape values");
  std::size_t dim = std::size_t(clf.feat_rows) * clf.feat_cols;
  clf.support.resize(nsv);
  clf.coef.resize(nsv);
  for (std::size_t i = 0; i < nsv; ++i) {
    if (!(is >> clf.coef[i])) return fail("support vector");
    clf.support[i].resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      if (!(is >> clf.support[i][k])) return fail("support vector");
  }
  clf.converged = true;  // persisted models are taken as-is
  return clf;
}

// --- pre-grasp ranking --------------------------------------------------

struct GraspPointPrediction {
  int hypothesis_index = 0;
  PreGraspHypothesis hypothesis;
  DgiFeature feature;
  double probability = 0.0;
};

// Volume centred on the hypothesis: closing direction spans the window rows,
// approach runs into the depth axis, the face centre sits mid-volume.
inline GripperVolume hypothesis_volume(const PreGraspHypothesis& h,
                                       const Vec3& extents) {
  GripperVolume vol;
  vol.extents = extents;
  Vec3 z = h.approach.normalized();
  Vec3 x = h.closing - z * z.dot(h.closing);
  if (x.norm() < 1e-12) {
    // degenerate closing direction; pick any axis orthogonal to approach
    x = z.unitOrthogonal();
  }
  x.normalize();
  vol.axes.col(0) = x;
  vol.axes.col(1) = z.cross(x);
  vol.axes.col(2) = z;
  vol.origin = h.position - vol.axes * (0.5 * extents);
  return vol;
}

inline std::vector<GraspPointPrediction> rank_grasps(
    const TrainedClassifier& clf, const PointCloud& part_cloud,
    const std::vector<PreGraspHypothesis>& hypotheses,
    double volume_depth = kDefaultVolumeDepth) {
  Vec3 extents((clf.feat_rows + 2) * GripperVolume::kVoxelU,
               (clf.feat_cols + 2) * GripperVolume::kVoxelV, volume_depth);
  std::vector<GraspPointPrediction> out;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& h = hypotheses[i];
    if (!h.reachable) continue;
    GripperVolume vol = hypothesis_volume(h, extents);
    std::vector<Vec3> local;
    local.reserve(part_cloud.size());
    for (const auto& q : part_cloud.pts) local.push_back(vol.to_frame(q.p));
    GraspPointPrediction pred;
    pred.hypothesis_index = int(i);
    pred.hypothesis = h;
    pred.feature = dgi(depth_image(local, vol));
    pred.probability = grasp_probability(clf, pred.feature);
    out.push_back(std::move(pred));
  }
  if (out.empty()) throw InputError("no reachable grasp hypotheses");
  std::stable_sort(out.begin(), out.end(),
                   [](const GraspPointPrediction& a,
                      const GraspPointPrediction& b) {
                     return a.probability > b.probability;
                   });
  return out;
}

// --- synthetic training corpus ------------------------------------------

// Labelled local-shape windows: graspable samples show a rim or step edge
// somewhere in the window (a band of near depth against the far plane),
// ungraspable ones are flat or gently sloped slabs that fill the window, or
// empty space. Geometry is sampled directly in the volume frame.
inline std::vector<TrainingSample> make_grasp_corpus(
    int count, std::uint64_t seed,
    const Vec3& extents = Vec3(0.070, 0.147, kDefaultVolumeDepth)) {
  if (count < 2) throw InputError("corpus needs at least two samples");
  std::mt19937_64 rng(seed);
  GripperVolume vol;
  vol.extents = extents;
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  std::normal_distribution<double> jitter(0.0, 0.0005);

  std::vector<TrainingSample> out;
  out.reserve(count);
  const double ex = extents.x(), ey = extents.y(), ez = extents.z();
  for (int i = 0; i < count; ++i) {
    bool graspable = (i % 2 == 0);
    int variant = (i / 2) % (graspable ? 2 : 3);
    std::vector<Vec3> pts;
    int npts = 1500;
    if (graspable && variant == 0) {
      // thin wall/rim strip crossing the window
      bool along_x = (i / 4) % 2 == 0;
      double centre = uni(0.25, 0.75) * (along_x ? ey : ex);
      double half_w = uni(0.004, 0.009);
      double z0 = uni(0.010, 0.035);
      double slope = uni(-0.08, 0.08);
      for (int k = 0; k < npts; ++k) {
        double a = uni(0, along_x ? ex : ey);
        double b = centre + uni(-half_w, half_w);
        double x = along_x ? a : b;
        double yy = along_x ? b : a;
        double z = z0 + slope * (a - 0.5 * (along_x ? ex : ey)) + jitter(rng);
        pts.emplace_back(x, yy, std::clamp(z, 0.0, ez));
      }
    } else if (graspable) {
      // step edge: object fills one side, free space on the other
      bool along_x = (i / 4) % 2 == 0;
      double cut = uni(0.3, 0.7) * (along_x ? ex : ey);
      double z0 = uni(0.010, 0.035);
      for (int k = 0; k < npts; ++k) {
        double a = uni(0, cut);
        double b = uni(0, along_x ? ey : ex);
        double x = along_x ? a : b;
        double yy = along_x ? b : a;
        pts.emplace_back(x, yy, std::clamp(z0 + jitter(rng), 0.0, ez));
      }
    } else if (variant == 0) {
      // flat slab filling the whole window
      double z0 = uni(0.010, 0.045);
      for (int k = 0; k < npts; ++k)
        pts.emplace_back(uni(0, ex), uni(0, ey),
                         std::clamp(z0 + jitter(rng), 0.0, ez));
    } else if (variant == 1) {
      // oversized object: gentle tilt across the window, no edges inside
      double z0 = uni(0.015, 0.040);
      double sx = uni(-0.04, 0.04), sy = uni(-0.04, 0.04);
      for (int k = 0; k < npts; ++k) {
        double x = uni(0, ex), yy = uni(0, ey);
        double z = z0 + sx * (x - ex / 2) + sy * (yy - ey / 2) + jitter(rng);
        pts.emplace_back(x, yy, std::clamp(z, 0.001, ez));
      }
    }
    // variant 2 of the ungraspable class: empty window, no points at all
    TrainingSample s;
    s.feature = dgi(depth_image(pts, vol));
    s.graspable = graspable;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace plg
