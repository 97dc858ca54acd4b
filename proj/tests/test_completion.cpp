#include <catch2/catch_amalgamated.hpp>

#include <plg/completion.hpp>
#include <plg/geometry.hpp>

using namespace plg;

namespace {

std::vector<ProjectedPoint> proj(std::initializer_list<std::array<double, 3>> v) {
  std::vector<ProjectedPoint> out;
  for (const auto& a : v) out.push_back({Eigen::Vector2d(a[0], a[1]), a[2]});
  return out;
}

PointCloud half_view(SyntheticSpec spec, const Vec3& view, unsigned seed) {
  spec.view_dir = view;
  return generate_object(spec, seed);
}

// axis-aligned extents of a cloud, for use as an independent box oracle
struct Aabb {
  Vec3 lo, hi;
};
Aabb aabb(const PointCloud& c) {
  Aabb b{Vec3::Constant(1e9), Vec3::Constant(-1e9)};
  for (const auto& q : c.pts) {
    b.lo = b.lo.cwiseMin(q.p);
    b.hi = b.hi.cwiseMax(q.p);
  }
  return b;
}

}  // namespace

TEST_CASE("top region centroid follows the height filter") {
  SECTION("all points at d_z pass") {
    auto w = proj({{0, 0, 1.0}, {2, 0, 1.0}, {0, 2, 1.0}, {2, 2, 1.0}});
    TopRegion t = top_region(w, 1.0, 0.5);
    CHECK_FALSE(t.fallback);
    CHECK(t.centroid.x() == Catch::Approx(1.0));
    CHECK(t.centroid.y() == Catch::Approx(1.0));
  }
  SECTION("low cluster is filtered out") {
    auto w = proj({{0, 0, 0.9}, {0, 0, 0.9}, {1, 0, 0.1}, {1, 0, 0.1}});
    TopRegion t = top_region(w, 1.0, 0.5);
    CHECK_FALSE(t.fallback);
    CHECK(t.centroid.x() == Catch::Approx(0.0));
    CHECK(t.centroid.y() == Catch::Approx(0.0));
  }
  SECTION("sigma = 1 takes the fallback path (strict inequality)") {
    auto w = proj({{0, 0, 1.0}, {4, 0, 1.0}});
    TopRegion t = top_region(w, 1.0, 1.0);
    CHECK(t.fallback);
    CHECK(t.centroid.x() == Catch::Approx(2.0));
  }
  SECTION("bad inputs") {
    CHECK_THROWS_AS(top_region({}, 1.0, 0.5), InputError);
    auto w = proj({{0, 0, 1.0}});
    CHECK_THROWS_AS(top_region(w, 0.0, 0.5), InputError);
    CHECK_THROWS_AS(top_region(w, 1.0, 1.5), InputError);
    CHECK_THROWS_AS(top_region(w, 1.0, -0.1), InputError);
  }
}

TEST_CASE("full upright cylinder is its own completion") {
  SyntheticSpec spec = default_spec(Category::can);
  spec.noise_sigma = 0.0005;
  PointCloud cloud = generate_object(spec, 11);
  CompletionResult res = complete_cloud(cloud);

  REQUIRE(res.completed.size() == 2 * cloud.size());
  CHECK(res.pose_estimate.pose == Pose::upright);
  CHECK(res.pose_estimate.confidence >= 0.9);
  CHECK(res.footprint_circular);
  CHECK(res.used_sigma == Catch::Approx(0.7));

  KdTree tree = KdTree::from_cloud(cloud);
  double worst = 0;
  for (std::size_t i = cloud.size(); i < res.completed.size(); ++i)
    worst = std::max(worst, tree.nearest_dist(res.completed.pts[i].p));
  CHECK(worst <= 2 * spec.pitch);
}

TEST_CASE("half view of an upright cylinder recovers the full box") {
  // open cylinder: the far inner wall stays visible, so the top-region
  // centroid is nearly unbiased even from a single side
  SyntheticSpec spec = default_spec(Category::glass);
  spec.noise_sigma = 0.0005;
  PointCloud full = generate_object(spec, 31);
  PointCloud half = half_view(spec, Vec3(1.0, 0.3, 0.4), 31);
  REQUIRE(half.size() < full.size());

  CompletionResult res = complete_cloud(half);

  // oracle: box of the unoccluded generation, straight from its extents
  Aabb b = aabb(full);
  Vec3 true_half = 0.5 * (b.hi - b.lo);
  Vec3 true_center = 0.5 * (b.hi + b.lo);
  double scale = (b.hi - b.lo).maxCoeff();

  std::array<double, 3> est{res.box.half_extents.x(), res.box.half_extents.y(),
                            res.box.half_extents.z()};
  std::array<double, 3> ref{true_half.x(), true_half.y(), true_half.z()};
  std::sort(est.begin(), est.end());
  std::sort(ref.begin(), ref.end());
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(est[i] - ref[i]) <= 0.05 * ref[i]);
  CHECK((res.box.center - true_center).norm() <= 0.05 * scale);
  CHECK(res.pose_estimate.pose == Pose::upright);
}

TEST_CASE("bottle lying on its side reads as sideways") {
  SyntheticSpec spec = default_spec(Category::bottle);
  spec.pose = Pose::sideways;
  spec.noise_sigma = 0.0005;
  PointCloud half = half_view(spec, Vec3(0.4, 1.0, 0.5), 5);
  CompletionResult res = complete_cloud(half);
  CHECK(res.pose_estimate.pose == Pose::sideways);
  CHECK(std::abs(res.axis.direction.z()) < 0.3);
}

TEST_CASE("reflection is an involution up to sampling") {
  SyntheticSpec spec = default_spec(Category::cup);
  spec.noise_sigma = 0.0003;
  PointCloud half = half_view(spec, Vec3(1.0, 0.2, 0.3), 17);
  CompletionResult first = complete_cloud(half);
  CompletionResult second = complete_cloud(first.completed);

  KdTree tree = KdTree::from_cloud(first.completed);
  double worst = 0;
  for (const auto& q : second.completed.pts)
    worst = std::max(worst, tree.nearest_dist(q.p));
  CHECK(worst <= 2 * spec.pitch);
}

TEST_CASE("axis is orthogonal to the other box directions") {
  for (Category c : {Category::can, Category::cup, Category::bottle,
                     Category::hammer}) {
    SyntheticSpec spec = default_spec(c);
    spec.noise_sigma = 0.0005;
    PointCloud half = half_view(spec, Vec3(1.0, 0.4, 0.5), 23);
    CompletionResult res = complete_cloud(half);
    int hits = 0;
    for (int i = 0; i < 3; ++i) {
      Vec3 col = res.box.axes.col(i);
      double d = std::abs(col.dot(res.axis.direction));
      if (d > 1.0 - 1e-6) {
        ++hits;
      } else {
        CHECK(d < 1e-6);
      }
    }
    CHECK(hits == 1);
    // frame is right-handed with z on the axis
    CHECK(res.object_frame.rotation.determinant() == Catch::Approx(1.0));
    CHECK((res.object_frame.rotation.col(2) - res.axis.direction).norm() <
          1e-9);
  }
}

TEST_CASE("completion never shrinks the box") {
  for (unsigned seed : {3u, 9u, 27u}) {
    SyntheticSpec spec = default_spec(Category::glass);
    spec.noise_sigma = 0.0005;
    PointCloud half = half_view(spec, Vec3(1.0, -0.3, 0.4), seed);
    CompletionResult res = complete_cloud(half);

    Vec3 grown = Vec3::Zero();
    for (const auto& q : res.completed.pts) {
      Vec3 d = q.p - res.box.center;
      for (int i = 0; i < 3; ++i)
        grown(i) = std::max(grown(i), std::abs(d.dot(res.box.axes.col(i))));
    }
    for (int i = 0; i < 3; ++i)
      CHECK(grown(i) >= res.box.half_extents(i) - 1e-9);
  }
}

TEST_CASE("degenerate footprints are rejected") {
  PointCloud line;
  for (int i = 0; i < 50; ++i) {
    Point q;
    q.p = Vec3(0.01 * i, 0.0, 0.02);
    q.n = Vec3::UnitZ();
    line.pts.push_back(q);
  }
  CHECK_THROWS_AS(complete_cloud(line), InputError);

  PointCloud pole;
  for (int i = 0; i < 50; ++i) {
    Point q;
    q.p = Vec3(0.3, 0.2, 0.002 * i);
    q.n = Vec3::UnitX();
    pole.pts.push_back(q);
  }
  CHECK_THROWS_AS(complete_cloud(pole), InputError);

  CHECK_THROWS_AS(complete_cloud(PointCloud{}), InputError);
  PointCloud flat;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      Point q;
      q.p = Vec3(0.002 * i, 0.002 * j, 0.0);
      q.n = Vec3::UnitZ();
      flat.pts.push_back(q);
    }
  CHECK_THROWS_AS(complete_cloud(flat), InputError);
}

TEST_CASE("sigma auto-selection tracks the footprint shape") {
  SyntheticSpec can = default_spec(Category::can);
  can.noise_sigma = 0.0005;
  CompletionResult round = complete_cloud(generate_object(can, 7));
  CHECK(round.used_sigma == Catch::Approx(0.7));
  CHECK(round.footprint_circular);

  // clean box grid: clearly parallelepiped-like
  PointCloud boxy;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 24; ++j) {
      Point q;
      q.p = Vec3(0.003 * i, 0.003 * j, 0.0);
      q.n = Vec3::UnitZ();
      boxy.pts.push_back(q);
      q.p.z() = 0.05;
      boxy.pts.push_back(q);
    }
  CompletionResult rect = complete_cloud(boxy);
  CHECK(rect.used_sigma == Catch::Approx(0.3));
  CHECK_FALSE(rect.footprint_circular);
}

TEST_CASE("pose estimate zones and confidences") {
  using detail::pose_from_axis;
  auto tilted = [](double deg) {
    double r = deg * M_PI / 180.0;
    return Vec3(std::sin(r), 0.0, std::cos(r));
  };

  PoseEstimate p0 = pose_from_axis(tilted(0));
  CHECK(p0.pose == Pose::upright);
  CHECK(p0.confidence == Catch::Approx(1.0));

  PoseEstimate p15 = pose_from_axis(tilted(15));
  CHECK(p15.pose == Pose::upright);
  CHECK(p15.confidence == Catch::Approx(0.5));

  PoseEstimate p30 = pose_from_axis(tilted(30));
  CHECK(p30.pose == Pose::upright);
  CHECK(p30.confidence == Catch::Approx(0.25));

  PoseEstimate p60 = pose_from_axis(tilted(60));
  CHECK(p60.pose == Pose::sideways);
  CHECK(p60.confidence == Catch::Approx(0.25));

  PoseEstimate p44 = pose_from_axis(tilted(44));
  CHECK(p44.pose == Pose::upright);
  CHECK(p44.confidence == Catch::Approx(0.05));  // floored near the watershed

  PoseEstimate p90 = pose_from_axis(tilted(90));
  CHECK(p90.pose == Pose::sideways);
  CHECK(p90.confidence == Catch::Approx(1.0));

  PoseEstimate p80 = pose_from_axis(tilted(80));
  CHECK(p80.pose == Pose::sideways);
  CHECK(p80.confidence == Catch::Approx(0.5 + 0.5 * 5.0 / 15.0));
}
