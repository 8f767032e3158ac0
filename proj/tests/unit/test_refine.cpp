#include <doctest.h>

#include <cmath>
#include <map>

#include "drywall/refine.hpp"
#include "drywall/rng.hpp"
#include "drywall/synth.hpp"
#include "oracles.hpp"

using namespace drywall;

namespace {

RefinedQuad rect_quad(std::int64_t id, double x0, double y0, double x1, double y1) {
  return make_quad(id, ClassLabel::DrywallPanel, oracle::rect_corners(x0, y0, x1, y1));
}

std::map<std::int64_t, RefinedQuad> by_id(const std::vector<RefinedQuad>& quads) {
  std::map<std::int64_t, RefinedQuad> m;
  for (const auto& q : quads) m[q.id] = q;
  return m;
}

bool grouped_together(const std::vector<EdgeGroup>& groups, EdgeRef a, EdgeRef b) {
  for (const auto& g : groups) {
    bool ha = false, hb = false;
    for (const auto& m : g.members) {
      ha = ha || m == a;
      hb = hb || m == b;
    }
    if (ha && hb) return true;
  }
  return false;
}

SceneTruth corner_truth(std::uint64_t seed) {
  const auto placements = random_corner_placements(seed);
  return project_scene(placements);
}

}  // namespace

TEST_CASE("corner candidates of an exact densified rectangle") {
  const auto outline = densify_quad(oracle::rect_corners(0, 0, 10, 5), 10);
  const auto idx = find_corner_candidates(outline, 1.0);
  CHECK(idx == std::array<std::size_t, 4>{0, 10, 20, 30});
}

TEST_CASE("corner candidates under jitter stay near the true corners") {
  const auto clean = densify_quad(oracle::rect_corners(0, 0, 10, 5), 10);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CounterRng rng(seed);
    auto outline = clean;
    for (auto& p : outline) p = {p.x + rng.uniform(-0.3, 0.3), p.y + rng.uniform(-0.3, 0.3)};
    const auto idx = find_corner_candidates(outline, 1.0);
    const std::array<std::size_t, 4> truth{0, 10, 20, 30};
    for (std::size_t t : truth) {
      std::size_t best = outline.size();
      for (std::size_t i : idx) {
        const std::size_t d = i > t ? i - t : t - i;
        best = std::min({best, d, outline.size() - d});
      }
      CHECK(best <= 2);
    }
  }
}

TEST_CASE("triangle is not a quadrilateral") {
  const std::vector<Point2> tri{{0, 0}, {10, 0}, {5, 8}};
  try {
    find_corner_candidates(tri, 1.0);
    FAIL("expected NotQuadrilateral");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotQuadrilateral);
  }
}

TEST_CASE("fit_quad on an exact rectangle") {
  const auto outline = densify_quad(oracle::rect_corners(0, 0, 10, 5), 10);
  const RefinedQuad q = fit_quad(outline, {0, 10, 20, 30}, {1.0, 256, 2, 0});
  const auto truth = oracle::rect_corners(0, 0, 10, 5);
  for (int k = 0; k < 4; ++k) CHECK(distance(q.corners[k], truth[k]) < 1e-6);
}

TEST_CASE("fit_quad ignores outlier vertices") {
  const auto truth = oracle::rect_corners(100, 100, 300, 200);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneTruth t;
    t.image_size = {800, 600};
    SceneTruth::Element e;
    e.id = 1;
    e.image_quad = truth;
    t.elements.push_back(e);
    DegradeParams d;
    d.vertex_jitter_sigma = 0.0;
    d.densify_per_edge = 24;
    d.outlier_fraction = 0.1;
    d.outlier_offset = 5.0;
    d.seed = seed;
    const auto det = degrade(t, d);
    const RefineResult r = refine_detections(det, {});
    REQUIRE(r.quads.size() == 1);
    for (int k = 0; k < 4; ++k) CHECK(distance(r.quads[0].corners[k], truth[k]) < 0.5);
  }
}

TEST_CASE("fit_quad rejects corner indices that collapse sides") {
  const auto outline = densify_quad(oracle::rect_corners(0, 0, 10, 5), 10);
  try {
    fit_quad(outline, {0, 1, 2, 3}, {1.0, 256, 2, 0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonConvexResult);
  }
}

TEST_CASE("classify_edges") {
  using O = EdgeOrientation;
  const std::array<O, 4> hv{O::Horizontal, O::Vertical, O::Horizontal, O::Vertical};
  CHECK(classify_edges(oracle::rect_corners(0, 0, 40, 10)) == hv);

  const double a = 30.0 * 3.14159265358979 / 180.0;
  auto rot = [&](Point2 p) { return Point2{p.x * std::cos(a) - p.y * std::sin(a), p.x * std::sin(a) + p.y * std::cos(a)}; };
  const auto r = oracle::rect_corners(0, 0, 100, 20);
  CHECK(classify_edges({rot(r[0]), rot(r[1]), rot(r[2]), rot(r[3])}) == hv);

  const double t10 = std::tan(10.0 * 3.14159265358979 / 180.0), t8 = std::tan(8.0 * 3.14159265358979 / 180.0);
  const std::array<Point2, 4> persp{Point2{0, 0}, {100, 100 * t10}, {100, 200 - 100 * t8}, {0, 200}};
  CHECK(oracle::line_angle_deg(persp[0], persp[1]) == doctest::Approx(10.0));
  CHECK(oracle::line_angle_deg(persp[3], persp[2]) == doctest::Approx(-8.0));
  CHECK(classify_edges(persp) == hv);
}

TEST_CASE("make_quad orders corners and rejects non-convex input") {
  const RefinedQuad q = make_quad(1, ClassLabel::Insulation, {Point2{10, 5}, {10, 0}, {0, 0}, {0, 5}});
  CHECK(q.corners == oracle::rect_corners(0, 0, 10, 5));
  CHECK(q.area() == doctest::Approx(50.0));
  CHECK_THROWS_AS(make_quad(2, ClassLabel::Insulation, {Point2{0, 0}, {4, 0}, {1, 1}, {0, 4}}), Error);
}

TEST_CASE("group_aligned_edges examples") {
  const std::vector<RefinedQuad> stacked{rect_quad(1, 0, 0, 100, 50), rect_quad(2, 0, 50, 100, 100)};
  CHECK(grouped_together(group_aligned_edges(stacked, 2.0, 2.0), {1, 2}, {2, 0}));

  const std::vector<RefinedQuad> offset{rect_quad(1, 0, 0, 100, 50), rect_quad(2, 0, 50.5, 100, 100)};
  CHECK(grouped_together(group_aligned_edges(offset, 2.0, 2.0), {1, 2}, {2, 0}));

  const double t = 100.0 * std::tan(10.0 * 3.14159265358979 / 180.0);
  const std::vector<RefinedQuad> angled{
      rect_quad(1, 0, 0, 100, 50),
      make_quad(2, ClassLabel::DrywallPanel, {Point2{0, 50}, {100, 50 + t}, {100, 120}, {0, 120}})};
  CHECK_FALSE(grouped_together(group_aligned_edges(angled, 2.0, 2.0), {1, 2}, {2, 0}));
}

TEST_CASE("refine_groups makes grouped edges collinear") {
  const std::vector<RefinedQuad> quads{rect_quad(1, 0, 10.0, 100, 100), rect_quad(2, 110, 10.2, 210, 100),
                                       rect_quad(3, 220, 9.8, 320, 100)};
  const auto groups = group_aligned_edges(quads, 2.0, 3.0);
  REQUIRE(grouped_together(groups, {1, 0}, {2, 0}));
  REQUIRE(grouped_together(groups, {1, 0}, {3, 0}));
  const GroupRefinement g = refine_groups(quads, groups, {1.5, 256, 2, 0});
  const auto fitted = fit_line_tls(std::vector<Point2>{g.quads[0].corners[0], g.quads[0].corners[1],
                                                       g.quads[1].corners[0], g.quads[1].corners[1],
                                                       g.quads[2].corners[0], g.quads[2].corners[1]});
  CHECK(fitted.max_residual < 1e-6);
}

TEST_CASE("refine_groups leaves singleton groups untouched") {
  const std::vector<RefinedQuad> quads{rect_quad(1, 3, 4, 50, 70)};
  const auto groups = group_aligned_edges(quads, 2.0, 3.0);
  const GroupRefinement g = refine_groups(quads, groups, {1.5, 256, 2, 0});
  REQUIRE(g.quads.size() == 1);
  for (int k = 0; k < 4; ++k) CHECK(distance(g.quads[0].corners[k], quads[0].corners[k]) < 1e-9);
}

TEST_CASE("refine_groups ignores an outlier edge") {
  std::vector<RefinedQuad> quads;
  for (int i = 0; i < 4; ++i) quads.push_back(rect_quad(i + 1, i * 110.0, 10, i * 110.0 + 100, 100));
  quads.push_back(rect_quad(5, 440, 40, 540, 130));
  EdgeGroup g;
  g.orientation = EdgeOrientation::Horizontal;
  for (int i = 1; i <= 5; ++i) g.members.push_back({i, 0});
  const std::vector<EdgeGroup> groups{g};
  const GroupRefinement r = refine_groups(quads, groups, {1.5, 256, 2, 0});
  REQUIRE(r.groups.size() == 2);
  CHECK(r.groups[0].members.size() == 4);
  REQUIRE(r.groups[1].members.size() == 1);
  CHECK(r.groups[1].members[0].quad_id == 5);
  const HomogLine l = r.groups[0].fitted_line;
  CHECK(l.distance({0, 10}) < 1e-9);
  CHECK(l.distance({430, 10}) < 1e-9);
  CHECK(l.distance({440, 40}) > 25.0);
}

TEST_CASE("refinement properties on synthetic scenes") {
  const RefineConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneTruth truth = corner_truth(seed);
    DegradeParams d;
    d.seed = seed;
    d.vertex_jitter_sigma = seed % 2 == 0 ? 0.5 : 1.0;
    const auto det = degrade(truth, d);
    const RefineResult r = refine_detections(det, cfg);
    CHECK(r.failures.empty());

    std::map<std::int64_t, const RawDetection*> raw;
    for (const auto& e : det) raw[e.id] = &e;
    for (const auto& q : r.quads) {
      const double a = std::abs(oracle::shoelace(raw[q.id]->outline));
      CHECK(std::abs(q.area() - a) / a <= 0.15);
    }

    const auto quads = by_id(r.quads);
    for (const auto& g : r.groups) {
      if (g.members.size() < 2) continue;
      for (const auto& m : g.members) {
        const auto& q = quads.at(m.quad_id);
        if (q.unrefined) continue;
        const LineSegment2 e = q.edge(m.edge);
        CHECK(g.fitted_line.distance(e.p0) <= cfg.group_ransac.inlier_threshold);
        CHECK(g.fitted_line.distance(e.p1) <= cfg.group_ransac.inlier_threshold);
      }
    }

    const RefineResult again = refine_detections(det, cfg);
    CHECK(again.quads == r.quads);
  }
}

TEST_CASE("group refinement is idempotent") {
  const RefineConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DegradeParams d;
    d.seed = seed;
    const RefineResult r = refine_detections(degrade(corner_truth(seed), d), cfg);
    const auto once = refine_groups(r.quads, group_aligned_edges(r.quads, cfg.angle_tol, cfg.dist_tol), cfg.group_ransac);
    const auto twice =
        refine_groups(once.quads, group_aligned_edges(once.quads, cfg.angle_tol, cfg.dist_tol), cfg.group_ransac);
    REQUIRE(once.quads.size() == twice.quads.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < once.quads.size(); ++i) {
      for (int k = 0; k < 4; ++k) worst = std::max(worst, distance(once.quads[i].corners[k], twice.quads[i].corners[k]));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("refine_detections reports per-element failures") {
  std::vector<RawDetection> det;
  det.push_back({7, ClassLabel::Insulation, 0.9, {{0, 0}, {10, 0}, {5, 8}}});
  det.push_back({8, ClassLabel::Insulation, 0.9, densify_quad(oracle::rect_corners(0, 0, 100, 60), 8)});
  const RefineResult r = refine_detections(det, {});
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].id == 7);
  REQUIRE(r.quads.size() == 1);
  CHECK(r.quads[0].id == 8);
}
