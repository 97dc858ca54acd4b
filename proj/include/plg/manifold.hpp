#pragma once

// Graph-based object similarity.  Labeled point clouds become weighted k-NN
// graphs; a diffusion kernel over hashed node-label distributions scores
// graph pairs; retrieval over the normalized kernel yields a category prior.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "plg/geometry.hpp"
#include "plg/scene.hpp"

namespace plg {

// One row per node: a distribution over the five part labels.
inline constexpr int kNumNodeLabels = 5;

struct ObjectGraph {
  std::string id;
  std::optional<Category> category;
  Eigen::MatrixXd labels;  // num_nodes x kNumNodeLabels, rows sum to 1
  // Symmetric adjacency, no self-loops: adj[i] holds (j, w_ij) with the
  // mirrored entry present in adj[j].
  std::vector<std::vector<std::pair<int, double>>> adj;

  int num_nodes() const { return int(labels.rows()); }

  void validate() const {
    if (labels.rows() == 0) throw InputError("graph '" + id + "' has no nodes");
    if (labels.cols() != kNumNodeLabels)
      throw InputError("graph '" + id + "' label width " +
                       std::to_string(labels.cols()) + ", expected " +
                       std::to_string(kNumNodeLabels));
    if (int(adj.size()) != num_nodes())
      throw InputError("graph '" + id + "' adjacency size mismatch");
    for (int i = 0; i < num_nodes(); ++i) {
      double s = labels.row(i).sum();
      if (std::abs(s - 1.0) > 1e-9)
        throw InputError("graph '" + id + "' label row " + std::to_string(i) +
                         " sums to " + std::to_string(s));
      for (const auto& [j, w] : adj[i]) {
        if (j == i) throw InputError("graph '" + id + "' has a self-loop");
        if (j < 0 || j >= num_nodes() || w < -1e-12 || w > 1.0 + 1e-12)
          throw InputError("graph '" + id + "' has a bad edge");
      }
    }
  }
};

struct KernelParams {
  int T_iters = 0;          // number of diffusion steps contributing features
  double bin_width = 1e-4;  // hash quantization width
  std::uint64_t hash_seed = 0;
  int k_nn = 4;
  int top_n = 10;
};

struct KernelMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd K;      // raw accumulated kernel
  Eigen::MatrixXd K_hat;  // K_ij / sqrt(K_ii K_jj)

  int index_of(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return int(i);
    return -1;
  }
};

using CategoryPrior = CategoryDistribution;

// ---------------------------------------------------------------------------
// Graph construction

inline ObjectGraph build_knn_graph(const PointCloud& cloud,
                                   const std::vector<PartLabel>& labels,
                                   int k = 4) {
  if (cloud.empty()) throw InputError("knn graph: empty cloud");
  if (labels.size() != cloud.size())
    throw InputError("knn graph: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(cloud.size()) + " points");
  if (k < 1) throw InputError("knn graph: k must be >= 1");
  const int n = int(cloud.size());
  for (const auto& q : cloud.pts)
    if (q.n.norm() < 1e-6) throw InputError("knn graph: missing normals");

  ObjectGraph g;
  g.id = cloud.meta.id.empty() ? "object" : cloud.meta.id;
  g.category = cloud.meta.category;
  g.labels = Eigen::MatrixXd::Zero(n, kNumNodeLabels);
  for (int i = 0; i < n; ++i) g.labels(i, int(labels[i])) = 1.0;

  KdTree tree = KdTree::from_cloud(cloud);
  std::vector<std::map<int, double>> nb(n);
  for (int i = 0; i < n; ++i) {
    auto near = tree.knn(cloud.pts[i].p, k, i);
    for (int j : near) {
      double w = std::abs(cloud.pts[i].n.dot(cloud.pts[j].n));
      w = std::min(w, 1.0);  // unit normals can overshoot by rounding
      nb[i].emplace(j, w);
      nb[j].emplace(i, w);
    }
  }
  g.adj.resize(n);
  for (int i = 0; i < n; ++i)
    g.adj[i].assign(nb[i].begin(), nb[i].end());
  return g;
}

// Ground-truth flavour: every point must carry a part label.
inline ObjectGraph build_knn_graph(const PointCloud& cloud, int k = 4) {
  std::vector<PartLabel> labels;
  labels.reserve(cloud.size());
  for (const auto& q : cloud.pts) {
    if (!q.gt_part) throw InputError("knn graph: point without part label");
    labels.push_back(*q.gt_part);
  }
  return build_knn_graph(cloud, labels, k);
}

// ---------------------------------------------------------------------------
// Diffusion

// One step of label diffusion: row i becomes the weight-normalized mix of its
// neighbours' rows.  A node with no (or zero-weight) edges keeps its own row,
// so every output row still sums to 1.
inline Eigen::MatrixXd diffuse_labels(const ObjectGraph& g,
                                      const Eigen::MatrixXd& L) {
  Eigen::MatrixXd out(L.rows(), L.cols());
  for (int i = 0; i < int(L.rows()); ++i) {
    double deg = 0.0;
    for (const auto& [j, w] : g.adj[i]) deg += w;
    if (deg <= 0.0) {
      out.row(i) = L.row(i);
      continue;
    }
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(L.cols());
    for (const auto& [j, w] : g.adj[i]) acc += w * L.row(j);
    out.row(i) = acc / deg;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Propagation kernel

namespace detail {

struct LabelHash {
  Eigen::Matrix<double, kNumNodeLabels, 1> u;  // heavy-tailed projection
  double b = 0.0;
  double w = 1e-4;

  std::int64_t bin(const Eigen::RowVectorXd& x) const {
    return std::int64_t(std::floor((u.dot(x.transpose()) + b) / w));
  }
};

// Draw a quantizer whose five pure (one-hot) label vectors land in five
// distinct bins.  Without that guarantee the zero-iteration kernel would not
// reduce to plain label counts whenever two labels happened to collide.
inline LabelHash draw_label_hash(std::mt19937_64& rng, double bin_width) {
  std::cauchy_distribution<double> cauchy(0.0, 1.0);
  std::uniform_real_distribution<double> offset(0.0, bin_width);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    LabelHash h;
    h.w = bin_width;
    for (int i = 0; i < kNumNodeLabels; ++i) h.u[i] = cauchy(rng);
    h.b = offset(rng);
    std::array<std::int64_t, kNumNodeLabels> bins{};
    for (int i = 0; i < kNumNodeLabels; ++i)
      bins[i] = std::int64_t(std::floor((h.u[i] + h.b) / bin_width));
    std::sort(bins.begin(), bins.end());
    if (std::adjacent_find(bins.begin(), bins.end()) == bins.end()) return h;
  }
  throw InferenceError("label hash: could not separate pure labels");
}

using SparseHist = std::vector<std::pair<int, double>>;  // (bin index, count)

inline double dot(const SparseHist& a, const SparseHist& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) ++i;
    else if (b[j].first < a[i].first) ++j;
    else s += a[i++].second * b[j++].second;
  }
  return s;
}

}  // namespace detail

// Kernel matrices for every iteration count 0..T_iters in one pass.  Entry t
// of the result is the kernel that propagation_kernel would return for
// T_iters = t with the same seed: the per-step feature Grams telescope.
inline std::vector<KernelMatrix> propagation_kernel_prefixes(
    const std::vector<ObjectGraph>& graphs, const KernelParams& params) {
  if (graphs.empty()) throw InputError("propagation kernel: no graphs");
  if (params.bin_width <= 0.0)
    throw InputError("propagation kernel: bin width must be positive");
  if (params.T_iters < 0)
    throw InputError("propagation kernel: negative iteration count");
  for (const auto& g : graphs) g.validate();

  const int n = int(graphs.size());
  std::vector<Eigen::MatrixXd> L;
  L.reserve(n);
  for (const auto& g : graphs) L.push_back(g.labels);

  std::mt19937_64 rng(params.hash_seed);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  std::vector<KernelMatrix> out;
  out.reserve(params.T_iters + 1);

  for (int t = 0; t <= params.T_iters; ++t) {
    detail::LabelHash hash = detail::draw_label_hash(rng, params.bin_width);

    // Shared bin vocabulary for this step: first-seen order over all graphs.
    std::unordered_map<std::int64_t, int> vocab;
    std::vector<detail::SparseHist> phi(n);
    for (int gi = 0; gi < n; ++gi) {
      std::unordered_map<int, double> counts;
      for (int r = 0; r < int(L[gi].rows()); ++r) {
        std::int64_t raw = hash.bin(L[gi].row(r));
        auto [it, _] = vocab.try_emplace(raw, int(vocab.size()));
        counts[it->second] += 1.0;
      }
      detail::SparseHist h(counts.begin(), counts.end());
      std::sort(h.begin(), h.end());
      phi[gi] = std::move(h);
    }

    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = detail::dot(phi[i], phi[j]);
        K(i, j) += v;
        if (j != i) K(j, i) += v;
      }

    KernelMatrix km;
    km.ids.reserve(n);
    for (const auto& g : graphs) km.ids.push_back(g.id);
    km.K = K;
    km.K_hat = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double d = std::sqrt(K(i, i) * K(j, j));
        km.K_hat(i, j) = d > 0.0 ? K(i, j) / d : 0.0;
      }
    out.push_back(std::move(km));

    if (t < params.T_iters)
      for (int gi = 0; gi < n; ++gi)
        L[gi] = diffuse_labels(graphs[gi], L[gi]);
  }
  return out;
}

inline KernelMatrix propagation_kernel(const std::vector<ObjectGraph>& graphs,
                                       const KernelParams& params) {
  auto all = propagation_kernel_prefixes(graphs, params);
  return std::move(all.back());
}

// ---------------------------------------------------------------------------
// Retrieval

// Rank the database by similarity to the query row and mix the top matches'
// categories with exponentially decaying rank weights.  The query never votes
// for itself: database entries sharing its id are skipped.
inline CategoryPrior prior_from_kernel(
    const KernelMatrix& km, const std::string& query_id,
    const std::map<std::string, Category>& categories, int top_n) {
  int row = km.index_of(query_id);
  if (row < 0)
    throw InputError("prior: query '" + query_id + "' not in kernel");
  if (top_n < 1) throw InputError("prior: top_n must be >= 1");

  struct Cand {
    double sim;
    std::string id;
    Category cat;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < km.ids.size(); ++i) {
    if (km.ids[i] == query_id) continue;
    auto it = categories.find(km.ids[i]);
    if (it == categories.end()) continue;
    cands.push_back({km.K_hat(row, int(i)), km.ids[i], it->second});
  }
  if (cands.empty()) throw InputError("prior: empty database");
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
  });

  CategoryPrior prior{};
  int limit = std::min<int>(top_n, int(cands.size()));
  double total = 0.0;
  for (int rank = 1; rank <= limit; ++rank) {
    double w = std::exp(-double(rank));
    prior[int(cands[rank - 1].cat)] += w;
    total += w;
  }
  for (double& p : prior) p /= total;
  return prior;
}

inline CategoryPrior category_prior(const ObjectGraph& query,
                                    const std::vector<ObjectGraph>& database,
                                    const KernelParams& params) {
  if (database.empty()) throw InputError("prior: empty database");
  std::map<std::string, Category> categories;
  std::vector<ObjectGraph> all;
  all.reserve(database.size() + 1);
  all.push_back(query);
  for (const auto& g : database) {
    if (!g.category)
      throw InputError("prior: database graph '" + g.id + "' has no category");
    all.push_back(g);
    categories.emplace(g.id, *g.category);
  }
  KernelMatrix km = propagation_kernel(all, params);
  return prior_from_kernel(km, query.id, categories, params.top_n);
}

// "0.56 cup; 0.36 can; 0.05 pot; 0.02 pan" — entries rounding to at least
// 0.01, most probable first.
inline std::string format_prior(const CategoryPrior& prior) {
  std::vector<std::pair<double, Category>> entries;
  for (Category c : all_categories())
    if (prior[int(c)] >= 0.005) entries.push_back({prior[int(c)], c});
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return int(a.second) < int(b.second);
            });
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) os << "; ";
    os << entries[i].first << ' ' << to_string(entries[i].second);
  }
  return os.str();
}

// Plain-text dump: header row of ids, then one row per object (id followed by
// the matrix entries).
inline void write_kernel(std::ostream& os, const KernelMatrix& km,
                         bool normalized = true) {
  const Eigen::MatrixXd& M = normalized ? km.K_hat : km.K;
  os << "id";
  for (const auto& id : km.ids) os << '\t' << id;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < km.ids.size(); ++i) {
    os << km.ids[i];
    for (std::size_t j = 0; j < km.ids.size(); ++j)
      os << '\t' << M(int(i), int(j));
    os << '\n';
  }
}

}  // namespace plg
