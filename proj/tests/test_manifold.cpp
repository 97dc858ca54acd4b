#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "plg/geometry.hpp"
#include "plg/manifold.hpp"

using namespace plg;

namespace {

// Minimal labeled cloud for direct graph construction.
PointCloud tiny_cloud(const std::vector<Vec3>& pts,
                      const std::vector<Vec3>& normals,
                      const std::vector<PartLabel>& labels) {
  PointCloud c;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Point q;
    q.p = pts[i];
    q.n = normals[i].normalized();
    q.gt_part = labels[i];
    c.pts.push_back(q);
  }
  c.meta.id = "tiny";
  return c;
}

PointCloud random_cloud(int n, std::uint64_t seed, const std::string& id) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, kNumNodeLabels - 1);
  PointCloud c;
  c.meta.id = id;
  for (int i = 0; i < n; ++i) {
    Point q;
    q.p = Vec3(uni(rng), uni(rng), uni(rng));
    q.n = Vec3(gauss(rng), gauss(rng), gauss(rng));
    if (q.n.norm() < 1e-6) q.n = Vec3::UnitZ();
    q.n.normalize();
    q.gt_part = PartLabel(lab(rng));
    c.pts.push_back(q);
  }
  return c;
}

// Direct graph builder for hand-worked kernel examples.
ObjectGraph path2(const std::string& id, PartLabel a, PartLabel b) {
  ObjectGraph g;
  g.id = id;
  g.labels = Eigen::MatrixXd::Zero(2, kNumNodeLabels);
  g.labels(0, int(a)) = 1.0;
  g.labels(1, int(b)) = 1.0;
  g.adj = {{{1, 1.0}}, {{0, 1.0}}};
  return g;
}

// Edge-free graph whose only feature is its label multiset.
ObjectGraph bag(const std::string& id, const std::vector<PartLabel>& labels,
                std::optional<Category> cat = std::nullopt) {
  ObjectGraph g;
  g.id = id;
  g.category = cat;
  g.labels = Eigen::MatrixXd::Zero(int(labels.size()), kNumNodeLabels);
  for (std::size_t i = 0; i < labels.size(); ++i)
    g.labels(int(i), int(labels[i])) = 1.0;
  g.adj.resize(labels.size());
  return g;
}

std::array<long, kNumNodeLabels> label_counts(const ObjectGraph& g) {
  std::array<long, kNumNodeLabels> c{};
  for (int i = 0; i < g.num_nodes(); ++i)
    for (int l = 0; l < kNumNodeLabels; ++l)
      if (g.labels(i, l) == 1.0) c[l]++;
  return c;
}

}  // namespace

TEST_CASE("three collinear points with k=1 symmetrize to the path") {
  auto cloud = tiny_cloud(
      {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)},
      {Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ()},
      {PartLabel::top, PartLabel::middle, PartLabel::bottom});
  ObjectGraph g = build_knn_graph(cloud, 1);

  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < g.num_nodes(); ++i)
    for (const auto& [j, w] : g.adj[i])
      edges.insert({std::min(i, j), std::max(i, j)});
  CHECK(edges == std::set<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("edge weights are |cos| of the incident normals") {
  auto parallel = tiny_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                             {Vec3::UnitZ(), Vec3::UnitZ()},
                             {PartLabel::top, PartLabel::top});
  ObjectGraph gp = build_knn_graph(parallel, 1);
  REQUIRE(gp.adj[0].size() == 1);
  CHECK(gp.adj[0][0].second == Catch::Approx(1.0));

  auto ortho = tiny_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                          {Vec3::UnitZ(), Vec3::UnitX()},
                          {PartLabel::top, PartLabel::top});
  ObjectGraph go = build_knn_graph(ortho, 1);
  CHECK(go.adj[0][0].second == Catch::Approx(0.0).margin(1e-12));

  auto oblique = tiny_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                            {Vec3::UnitZ(), Vec3(0, 1, 1)},
                            {PartLabel::top, PartLabel::top});
  ObjectGraph gq = build_knn_graph(oblique, 1);
  CHECK(gq.adj[0][0].second == Catch::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("cup graph neighbourhoods match a brute-force k-NN oracle") {
  PointCloud full = generate_object(default_spec(Category::cup), 77);
  // Subsample so the quadratic oracle stays fast.
  PointCloud cloud;
  cloud.meta = full.meta;
  for (std::size_t i = 0; i < full.size(); i += 5) cloud.pts.push_back(full.pts[i]);
  const int n = int(cloud.size());
  REQUIRE(n > 200);

  const int k = 4;
  ObjectGraph g = build_knn_graph(cloud, k);

  // Oracle: exhaustive sort per node, union-symmetrized.
  std::vector<std::set<int>> want(n);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < n; ++j)
      if (j != i) d.push_back({(cloud.pts[i].p - cloud.pts[j].p).norm(), j});
    std::sort(d.begin(), d.end());
    for (int r = 0; r < k && r < int(d.size()); ++r) {
      want[i].insert(d[r].second);
      want[d[r].second].insert(i);
    }
  }

  int min_degree = n;
  for (int i = 0; i < n; ++i) {
    std::set<int> got;
    for (const auto& [j, w] : g.adj[i]) {
      got.insert(j);
      CHECK(w == Catch::Approx(std::abs(cloud.pts[i].n.dot(cloud.pts[j].n)))
                     .margin(1e-12));
    }
    REQUIRE(got == want[i]);
    min_degree = std::min(min_degree, int(got.size()));
  }
  CHECK(min_degree >= k);
}

TEST_CASE("zero-iteration kernel equals the integer label-count kernel") {
  std::vector<ObjectGraph> graphs;
  for (int i = 0; i < 6; ++i)
    graphs.push_back(build_knn_graph(random_cloud(20 + 7 * i, 100 + i,
                                                  "g" + std::to_string(i)), 3));
  KernelParams params;
  params.T_iters = 0;
  params.hash_seed = 42;
  KernelMatrix km = propagation_kernel(graphs, params);

  for (std::size_t i = 0; i < graphs.size(); ++i) {
    auto ci = label_counts(graphs[i]);
    for (std::size_t j = 0; j < graphs.size(); ++j) {
      auto cj = label_counts(graphs[j]);
      long want = 0;
      for (int l = 0; l < kNumNodeLabels; ++l) want += ci[l] * cj[l];
      CHECK(km.K(int(i), int(j)) == double(want));  // exact, no tolerance
    }
  }
}

TEST_CASE("normalized kernel is exactly 1 on the diagonal and for copies") {
  ObjectGraph a = bag("a", {PartLabel::top, PartLabel::middle});
  ObjectGraph b = a;
  b.id = "b";
  KernelParams params;
  params.T_iters = 2;
  params.hash_seed = 5;
  KernelMatrix km = propagation_kernel({a, b}, params);
  for (int i = 0; i < 2; ++i) CHECK(km.K_hat(i, i) == Catch::Approx(1.0).margin(1e-9));
  CHECK(km.K_hat(0, 1) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("one diffusion step on two-node paths matches the hand calculation") {
  // First graph carries labels (top, middle); one step swaps them. Second
  // carries (top, top); diffusion is a fixed point. Each step contributes
  // <phi', phi''> = 2, so after steps t = 0 and t = 1:
  //   K = [[4, 4], [4, 8]],  K_hat(0,1) = 4 / sqrt(32).
  ObjectGraph g1 = path2("g1", PartLabel::top, PartLabel::middle);
  ObjectGraph g2 = path2("g2", PartLabel::top, PartLabel::top);

  Eigen::MatrixXd d1 = diffuse_labels(g1, g1.labels);
  CHECK(d1(0, int(PartLabel::middle)) == Catch::Approx(1.0));
  CHECK(d1(1, int(PartLabel::top)) == Catch::Approx(1.0));
  Eigen::MatrixXd d2 = diffuse_labels(g2, g2.labels);
  CHECK(d2.isApprox(g2.labels, 1e-12));

  for (std::uint64_t seed : {0ull, 9ull, 123456ull}) {
    KernelParams params;
    params.T_iters = 1;
    params.hash_seed = seed;
    KernelMatrix km = propagation_kernel({g1, g2}, params);
    INFO("seed " << seed);
    CHECK(km.K(0, 0) == Catch::Approx(4.0).margin(1e-12));
    CHECK(km.K(0, 1) == Catch::Approx(4.0).margin(1e-12));
    CHECK(km.K(1, 1) == Catch::Approx(8.0).margin(1e-12));
    CHECK(km.K_hat(0, 1) == Catch::Approx(4.0 / std::sqrt(32.0)).margin(1e-9));
  }
}

TEST_CASE("kernel is symmetric and PSD over a random batch") {
  std::vector<ObjectGraph> graphs;
  for (int i = 0; i < 12; ++i)
    graphs.push_back(build_knn_graph(
        random_cloud(5 + 3 * i, 777 + i, "r" + std::to_string(i)), 3));
  KernelParams params;
  params.T_iters = 3;
  params.hash_seed = 31;
  KernelMatrix km = propagation_kernel(graphs, params);

  const int n = int(graphs.size());
  for (int i = 0; i < n; ++i) {
    CHECK(km.K_hat(i, i) == Catch::Approx(1.0).margin(1e-9));
    for (int j = 0; j < n; ++j)
      CHECK(std::abs(km.K(i, j) - km.K(j, i)) < 1e-9);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(km.K);
  double lo = eig.eigenvalues().minCoeff();
  double hi = eig.eigenvalues().maxCoeff();
  CHECK(lo >= -1e-8 * hi);
}

TEST_CASE("diffusion keeps label rows stochastic") {
  ObjectGraph g = build_knn_graph(random_cloud(60, 2024, "s"), 4);
  Eigen::MatrixXd L = g.labels;
  for (int t = 0; t < 15; ++t) {
    L = diffuse_labels(g, L);
    for (int i = 0; i < int(L.rows()); ++i) {
      CHECK(L.row(i).sum() == Catch::Approx(1.0).margin(1e-9));
      CHECK(L.row(i).minCoeff() >= -1e-12);
    }
  }
}

TEST_CASE("isolated nodes keep their labels under diffusion") {
  ObjectGraph g = bag("iso", {PartLabel::top, PartLabel::handle});
  Eigen::MatrixXd L = diffuse_labels(g, g.labels);
  CHECK(L.isApprox(g.labels, 0.0));
}

TEST_CASE("duplicating a graph's nodes leaves its normalized row unchanged") {
  std::vector<ObjectGraph> db;
  for (int i = 0; i < 5; ++i)
    db.push_back(build_knn_graph(random_cloud(25 + 4 * i, 900 + i,
                                              "d" + std::to_string(i)), 3));
  ObjectGraph q = build_knn_graph(random_cloud(30, 1234, "q"), 3);

  // Disjoint union of two copies of q.
  ObjectGraph q2;
  q2.id = "q";
  const int n = q.num_nodes();
  q2.labels = Eigen::MatrixXd::Zero(2 * n, kNumNodeLabels);
  q2.labels.topRows(n) = q.labels;
  q2.labels.bottomRows(n) = q.labels;
  q2.adj.resize(2 * n);
  for (int i = 0; i < n; ++i)
    for (const auto& [j, w] : q.adj[i]) {
      q2.adj[i].push_back({j, w});
      q2.adj[n + i].push_back({n + j, w});
    }

  KernelParams params;
  params.T_iters = 2;
  params.hash_seed = 88;
  auto with = [&](const ObjectGraph& query) {
    std::vector<ObjectGraph> all{query};
    for (const auto& g : db) all.push_back(g);
    return propagation_kernel(all, params);
  };
  KernelMatrix k1 = with(q), k2 = with(q2);
  for (int j = 1; j <= 5; ++j) {
    CHECK(k2.K(0, j) == Catch::Approx(2.0 * k1.K(0, j)).margin(1e-9));
    CHECK(k2.K_hat(0, j) == Catch::Approx(k1.K_hat(0, j)).margin(1e-9));
  }
}

TEST_CASE("same seed reproduces the kernel, and prefixes telescope") {
  std::vector<ObjectGraph> graphs;
  for (int i = 0; i < 4; ++i)
    graphs.push_back(build_knn_graph(random_cloud(18 + 5 * i, 50 + i,
                                                  "p" + std::to_string(i)), 3));
  KernelParams params;
  params.T_iters = 3;
  params.hash_seed = 314159;

  KernelMatrix a = propagation_kernel(graphs, params);
  KernelMatrix b = propagation_kernel(graphs, params);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(a.K(i, j) == b.K(i, j));

  auto prefixes = propagation_kernel_prefixes(graphs, params);
  REQUIRE(prefixes.size() == 4);
  KernelParams p1 = params;
  p1.T_iters = 1;
  KernelMatrix k1 = propagation_kernel(graphs, p1);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(prefixes[1].K(i, j) == k1.K(i, j));
}

TEST_CASE("retrieval from a single-object database is that category") {
  ObjectGraph q = bag("q", {PartLabel::top, PartLabel::bottom});
  ObjectGraph d = bag("d", {PartLabel::top, PartLabel::top}, Category::can);
  KernelParams params;
  CategoryPrior prior = category_prior(q, {d}, params);
  CHECK(prior[int(Category::can)] == Catch::Approx(1.0));
  double sum = 0.0;
  for (double p : prior) sum += p;
  CHECK(sum == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("retrieval weights follow exp(-rank) over a hand-ranked database") {
  // T=0 and edge-free graphs, so similarities reduce to label-count algebra:
  //   q  = (2,1,0,0,0)
  //   a  = (2,1,0,0,0)  -> K_hat = 1          (rank 1, cup)
  //   b  = (1,1,0,0,0)  -> 3/sqrt(10) ~ 0.949 (rank 2, can)
  //   c  = (0,0,3,0,0)  -> 0                  (rank 3, cup)
  ObjectGraph q = bag("q", {PartLabel::top, PartLabel::top, PartLabel::middle});
  ObjectGraph a = bag("a", {PartLabel::top, PartLabel::top, PartLabel::middle},
                      Category::cup);
  ObjectGraph b = bag("b", {PartLabel::top, PartLabel::middle}, Category::can);
  ObjectGraph c = bag("c", {PartLabel::bottom, PartLabel::bottom,
                            PartLabel::bottom}, Category::cup);
  KernelParams params;
  params.T_iters = 0;
  CategoryPrior prior = category_prior(q, {a, b, c}, params);

  double e1 = std::exp(-1.0), e2 = std::exp(-2.0), e3 = std::exp(-3.0);
  double z = e1 + e2 + e3;
  CHECK(prior[int(Category::cup)] == Catch::Approx((e1 + e3) / z).margin(1e-12));
  CHECK(prior[int(Category::can)] == Catch::Approx(e2 / z).margin(1e-12));
}

TEST_CASE("retrieval ties break by id and the list truncates at top_n") {
  ObjectGraph q = bag("q", {PartLabel::top});
  std::vector<ObjectGraph> db;
  // Two identical candidates: rank order must follow ids.
  db.push_back(bag("a", {PartLabel::top}, Category::pan));
  db.push_back(bag("b", {PartLabel::top}, Category::pot));
  KernelParams params;
  CategoryPrior prior = category_prior(q, db, params);
  double e1 = std::exp(-1.0), e2 = std::exp(-2.0);
  CHECK(prior[int(Category::pan)] == Catch::Approx(e1 / (e1 + e2)).margin(1e-12));
  CHECK(prior[int(Category::pot)] == Catch::Approx(e2 / (e1 + e2)).margin(1e-12));

  // Eleven identical candidates: the one sorting last never votes.
  std::vector<ObjectGraph> big;
  for (int i = 0; i < 10; ++i)
    big.push_back(bag("d" + std::to_string(i), {PartLabel::top}, Category::cup));
  big.push_back(bag("zzz", {PartLabel::top}, Category::pan));
  CategoryPrior trunc = category_prior(q, big, params);
  CHECK(trunc[int(Category::cup)] == Catch::Approx(1.0));
  CHECK(trunc[int(Category::pan)] == 0.0);
}

TEST_CASE("prior rendering lists entries most-probable first") {
  CategoryPrior prior{};
  prior[int(Category::cup)] = 0.56;
  prior[int(Category::can)] = 0.36;
  prior[int(Category::pot)] = 0.05;
  prior[int(Category::pan)] = 0.02;
  prior[int(Category::bowl)] = 0.004;  // below the rendering floor
  CHECK(format_prior(prior) == "0.56 cup; 0.36 can; 0.05 pot; 0.02 pan");
  CategoryPrior sure{};
  sure[int(Category::hammer)] = 1.0;
  CHECK(format_prior(sure) == "1.00 hammer");
}

TEST_CASE("kernel text dump carries ids and round numbers") {
  ObjectGraph a = bag("alpha", {PartLabel::top});
  ObjectGraph b = bag("beta", {PartLabel::top});
  KernelParams params;
  KernelMatrix km = propagation_kernel({a, b}, params);
  std::ostringstream os;
  write_kernel(os, km);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "id\talpha\tbeta");
  std::string tag;
  double v1, v2;
  in >> tag >> v1 >> v2;
  CHECK(tag == "alpha");
  CHECK(v1 == Catch::Approx(1.0));
  CHECK(v2 == Catch::Approx(1.0));
}

TEST_CASE("degenerate manifold inputs are rejected") {
  PointCloud empty;
  CHECK_THROWS_AS(build_knn_graph(empty, 4), InputError);

  auto no_labels = tiny_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                              {Vec3::UnitZ(), Vec3::UnitZ()},
                              {PartLabel::top, PartLabel::top});
  no_labels.pts[1].gt_part.reset();
  CHECK_THROWS_AS(build_knn_graph(no_labels, 1), InputError);

  auto bad_normal = tiny_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                               {Vec3::UnitZ(), Vec3::UnitZ()},
                               {PartLabel::top, PartLabel::top});
  bad_normal.pts[0].n = Vec3::Zero();
  CHECK_THROWS_AS(build_knn_graph(bad_normal, 1), InputError);

  ObjectGraph q = bag("q", {PartLabel::top});
  KernelParams params;
  CHECK_THROWS_AS(category_prior(q, {}, params), InputError);
  ObjectGraph nocat = bag("d", {PartLabel::top});
  CHECK_THROWS_AS(category_prior(q, {nocat}, params), InputError);

  ObjectGraph broken = bag("x", {PartLabel::top});
  broken.labels(0, 0) = 0.7;  // row no longer sums to 1
  CHECK_THROWS_AS(propagation_kernel({broken}, params), InputError);
  CHECK_THROWS_AS(propagation_kernel({}, params), InputError);
}
