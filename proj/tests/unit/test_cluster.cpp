#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "drywall/cluster.hpp"
#include "drywall/rng.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace drywall;

namespace {

std::vector<RefinedQuad> refined(const SceneTruth& t, const DegradeParams& d) {
  return refine_detections(degrade(t, d), {}).quads;
}

double direction_error_deg(const HomogPoint& got, const HomogPoint& want, Point2 centre) {
  auto dir = [&](const HomogPoint& p) {
    if (p.is_ideal()) return p.direction();
    const Point2 q = p.to_point() - centre;
    const double n = std::hypot(q.x, q.y);
    return Point2{q.x / n, q.y / n};
  };
  const Point2 a = dir(got), b = dir(want);
  const double c = std::clamp(std::abs(dot(a, b)), 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("partition_columns boundaries and overlap rule") {
  const auto empty = partition_columns({}, 800, 4);
  REQUIRE(empty.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(empty[i].x_min == doctest::Approx(200.0 * i));
    CHECK(empty[i].x_max == doctest::Approx(200.0 * (i + 1)));
    CHECK(empty[i].edges.empty());
  }
  const std::vector<RefinedQuad> quads{make_quad(1, ClassLabel::Insulation, oracle::rect_corners(150, 100, 450, 300))};
  const auto cols = partition_columns(quads, 800, 4);
  std::vector<bool> has(4, false);
  for (int i = 0; i < 4; ++i) {
    for (const auto& e : cols[i].edges) has[i] = has[i] || e.ref.quad_id == 1;
  }
  CHECK(has == std::vector<bool>{true, true, true, false});
}

TEST_CASE("estimate_vp through a known point") {
  const Point2 vp{2000, 300};
  std::vector<LineSegment2> edges;
  for (int a = -5; a <= 5; ++a) {
    const double t = a * std::numbers::pi / 180.0;
    const Point2 d{-std::cos(t), std::sin(t)};
    edges.push_back({vp + 1500.0 * d, vp + 1800.0 * d});
  }
  const VanishingPoint v = estimate_vp(edges, {1.0, 512, 2, 0});
  REQUIRE_FALSE(v.point.is_ideal());
  CHECK(distance(v.point.to_point(), vp) <= 0.01 * std::hypot(vp.x, vp.y));
  CHECK(v.scatter < 1e-6);
}

TEST_CASE("estimate_vp on parallel horizontals is ideal") {
  const std::vector<LineSegment2> edges{{{0, 100}, {300, 100}}, {{50, 200}, {400, 200}}};
  const VanishingPoint v = estimate_vp(edges, {1.0, 512, 2, 0});
  CHECK(v.point.is_ideal());
  CHECK(std::abs(std::abs(v.point.direction().x) - 1.0) < 1e-12);
  CHECK(v.scatter == doctest::Approx(0.0));
}

TEST_CASE("estimate_vp needs two edges") {
  const std::vector<LineSegment2> one{{{0, 0}, {10, 0}}};
  try {
    estimate_vp(one, {1.0, 512, 2, 0});
    FAIL("expected InsufficientEdges");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientEdges);
  }
}

TEST_CASE("edge residual is zero for edges aimed at the vanishing point") {
  const HomogPoint vp = HomogPoint::from({1000, 200});
  CHECK(edge_vp_residual({{0, 0}, {500, 100}}, vp) < 1e-9);
  CHECK(edge_vp_residual({{0, 0}, {500, 150}}, vp) > 1.0);
}

TEST_CASE("subdivision splits a two-wall column") {
  const SceneTruth t = project_scene(random_corner_placements(3));
  const auto quads = refined(t, scenes::noise(3));
  ClusterConfig cfg;
  const auto cols = partition_columns(quads, t.image_size.width, 1);
  REQUIRE(cols.size() == 1);
  const auto parts = subdivide_if_scattered(cols[0], cfg.scatter_tol, cfg.min_width, cfg);
  int resolved = 0;
  for (const auto& c : parts) {
    if (c.unresolved || !c.vp) continue;
    ++resolved;
    CHECK(c.vp->scatter <= cfg.scatter_tol);
  }
  CHECK(resolved >= 2);
}

TEST_CASE("subdivision keeps a consistent single-wall column") {
  const SceneTruth t = project_scene(scenes::single_wall(5, 25.0));
  const auto quads = refined(t, scenes::noise(5));
  ClusterConfig cfg;
  const auto cols = partition_columns(quads, t.image_size.width, 1);
  const auto parts = subdivide_if_scattered(cols[0], 50.0, cfg.min_width, cfg);
  REQUIRE(parts.size() == 1);
  CHECK_FALSE(parts[0].unresolved);
}

TEST_CASE("subdivision stops at the minimum width") {
  const SceneTruth t = project_scene(random_corner_placements(3));
  const auto quads = refined(t, scenes::noise(3));
  ClusterConfig cfg;
  const auto cols = partition_columns(quads, t.image_size.width, 1);
  const auto parts = subdivide_if_scattered(cols[0], 1e-6, t.image_size.width, cfg);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].unresolved);
}

TEST_CASE("single wall clusters into one segment") {
  for (double yaw : {-30.0, 0.0, 20.0}) {
    const SceneTruth t = project_scene(scenes::single_wall(11, yaw));
    const auto quads = refined(t, scenes::noise(11));
    const Clustering c = cluster_quads(quads, t.image_size.width, {});
    REQUIRE(c.segments.size() == 1);
    CHECK(c.segments[0].members.size() == quads.size());
  }
}

TEST_CASE("two walls cluster into two segments split at the joint") {
  std::size_t correct = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneTruth t = project_scene(random_corner_placements(seed));
    const auto quads = refined(t, scenes::noise(seed));
    ClusterConfig cfg;
    const Clustering c = cluster_quads(quads, t.image_size.width, cfg);
    std::map<std::int64_t, int> wall;
    for (const auto& e : t.elements) wall[e.id] = e.wall;
    for (const auto& s : c.segments) {
      std::map<int, std::size_t> votes;
      for (auto id : s.members) ++votes[wall[id]];
      std::size_t best = 0;
      for (const auto& [w, n] : votes) best = std::max(best, n);
      correct += best;
    }
    total += t.elements.size();
    if (c.segments.size() == 2) {
      const double joint = t.walls[0].corners_image[1].x;
      const double boundary = c.segments[0].x_max;
      CHECK(std::abs(boundary - joint) <= t.image_size.width / cfg.n_columns);
    }
  }
  CHECK(correct >= 0.95 * static_cast<double>(total));
}

TEST_CASE("no quads means no segments") {
  const ClusterConfig cfg;
  const auto cols = partition_columns({}, 800, cfg.n_columns);
  try {
    merge_columns(cols, cfg.consistency_tol, cfg);
    FAIL("expected NoSegments");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSegments);
  }
  const Clustering c = cluster_quads({}, 800, cfg);
  CHECK(c.segments.empty());
  CHECK(c.unassigned.empty());
  CHECK_FALSE(c.warnings.empty());
}

TEST_CASE("assign_elements leaves a rogue quad unassigned") {
  const SceneTruth t = project_scene(scenes::single_wall(2, 25.0));
  auto quads = refined(t, scenes::noise(2));
  const Clustering c = cluster_quads(quads, t.image_size.width, {});
  REQUIRE(c.segments.size() == 1);
  const double s = std::sin(0.5), co = std::cos(0.5);
  const Point2 o{400, 300};
  std::array<Point2, 4> r;
  const auto base = oracle::rect_corners(-60, -30, 60, 30);
  for (int k = 0; k < 4; ++k) r[k] = o + Point2{co * base[k].x - s * base[k].y, s * base[k].x + co * base[k].y};
  quads.push_back(make_quad(9999, ClassLabel::WoodPanel, r));
  const Assignment a = assign_elements(quads, c.segments, ClusterConfig{}.consistency_tol);
  CHECK(std::find(a.unassigned.begin(), a.unassigned.end(), 9999) != a.unassigned.end());
  REQUIRE(a.segments.size() == 1);
  CHECK(a.segments[0].members.size() == quads.size() - 1);
}

TEST_CASE("vanishing point direction on single-wall scenes") {
  for (double yaw : {-35.0, -20.0, 15.0, 30.0}) {
    const SceneTruth t = project_scene(scenes::single_wall(21, yaw));
    const Clustering c = cluster_quads(refined(t, scenes::noise(21)), t.image_size.width, {});
    REQUIRE(c.segments.size() == 1);
    const Point2 centre{t.image_size.width / 2, t.image_size.height / 2};
    CHECK(direction_error_deg(c.segments[0].vp.point, t.walls[0].vp, centre) <= 1.0);
  }
}

TEST_CASE("fronto-parallel wall gives an ideal vanishing point") {
  const SceneTruth t = project_scene(scenes::single_wall(8, 0.0));
  const Clustering c = cluster_quads(refined(t, scenes::noise(8, 0.0)), t.image_size.width, {});
  REQUIRE(c.segments.size() == 1);
  CHECK(c.segments[0].vp.point.is_ideal());
}

TEST_CASE("clustering is deterministic and permutation invariant") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SceneTruth t = project_scene(random_corner_placements(seed));
    auto quads = refined(t, scenes::noise(seed));
    const Clustering a = cluster_quads(quads, t.image_size.width, {});
    const Clustering b = cluster_quads(quads, t.image_size.width, {});
    CHECK(a.segments == b.segments);
    CounterRng rng(seed);
    for (std::size_t i = quads.size(); i > 1; --i) std::swap(quads[i - 1], quads[rng.below(i)]);
    const Clustering c = cluster_quads(quads, t.image_size.width, {});
    REQUIRE(a.segments.size() == c.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) CHECK(a.segments[i].members == c.segments[i].members);
  }
}
