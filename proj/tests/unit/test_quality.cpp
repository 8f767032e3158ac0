#include <doctest.h>

#include <cmath>
#include <numbers>

#include "drywall/quality.hpp"
#include "drywall/rng.hpp"
#include "oracles.hpp"

using namespace drywall;

namespace {

RefinedQuad frame_quad(std::int64_t id, double x0, double width, double height, double tilt_deg) {
  const double t = std::tan(tilt_deg * std::numbers::pi / 180.0) * height;
  return make_quad(id, ClassLabel::MetalFrame,
                   {Point2{x0 + t, 0}, {x0 + width + t, 0}, {x0 + width, height}, {x0, height}});
}

RectifiedSegment segment_of(std::vector<RefinedQuad> quads, Size2 size) {
  RectifiedSegment s;
  s.wall_size = size;
  s.wall_corners_image = oracle::rect_corners(0, 0, size.width, size.height);
  s.rectified_quads = std::move(quads);
  return s;
}

std::vector<FrameMeasure> at_centres(std::initializer_list<double> xs) {
  std::vector<FrameMeasure> m;
  std::int64_t id = 1;
  for (double x : xs) m.push_back({id++, 0.0, x, 2500.0, false});
  return m;
}

Coverage with(std::initializer_list<std::pair<ClassLabel, double>> values) {
  Coverage c{};
  for (const auto& [l, v] : values) c[static_cast<std::size_t>(l)] = v;
  return c;
}

}  // namespace

TEST_CASE("frame orientation of vertical and tilted frames") {
  const auto seg = segment_of({frame_quad(1, 100, 60, 2500, 0.0), frame_quad(2, 700, 60, 2500, 2.0),
                               frame_quad(3, 1300, 60, 2500, -1.5)},
                              {2000, 2500});
  const auto m = frame_orientations(seg);
  REQUIRE(m.size() == 3);
  CHECK(std::abs(m[0].axis_angle) < 1e-9);
  CHECK(m[1].axis_angle == doctest::Approx(2.0).epsilon(0.05));
  CHECK(m[2].axis_angle == doctest::Approx(-1.5).epsilon(0.05));
  for (const auto& f : m) CHECK_FALSE(f.ambiguous_axis);
}

TEST_CASE("square frame has an ambiguous axis") {
  const auto seg = segment_of({make_quad(1, ClassLabel::MetalFrame, oracle::rect_corners(10, 10, 70, 70))}, {200, 200});
  const auto m = frame_orientations(seg);
  REQUIRE(m.size() == 1);
  CHECK(m[0].ambiguous_axis);
  CHECK(std::abs(m[0].axis_angle) < 1e-9);
  const QualityReport r = assess_segment(seg, {});
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("tilt_check examples") {
  const QualityConfig cfg;
  std::vector<FrameMeasure> m = at_centres({0, 625, 1250});
  m[0].axis_angle = 0.2;
  m[1].axis_angle = 2.1;
  m[2].axis_angle = -0.5;
  const auto v = tilt_check(m, cfg);
  REQUIRE(v.size() == 1);
  CHECK(v[0].id == m[1].id);
  CHECK(v[0].angle == doctest::Approx(2.1));
  CHECK(tilt_check(at_centres({0, 625}), cfg).empty());
  m[1].axis_angle = 1.0;
  CHECK(tilt_check(m, cfg).empty());
}

TEST_CASE("spacing_check examples") {
  QualityConfig cfg;
  const SpacingReport even = spacing_check(at_centres({0, 625, 1250, 1875}), cfg);
  CHECK(even.gaps == std::vector<double>{625, 625, 625});
  CHECK(even.coefficient_of_variation == doctest::Approx(0.0));
  CHECK(even.flagged.empty());
  CHECK_FALSE(even.non_uniform);

  cfg.expected_spacing = 625.0;
  cfg.spacing_rel_tol = 0.05;
  const SpacingReport r = spacing_check(at_centres({0, 625, 1200, 1875}), cfg);
  CHECK(r.gaps == std::vector<double>{625, 575, 675});
  REQUIRE(r.deviations.size() == 3);
  CHECK(r.deviations[0] == doctest::Approx(0.0));
  CHECK(r.deviations[1] == doctest::Approx(50.0 / 625.0));
  CHECK(r.deviations[2] == doctest::Approx(50.0 / 625.0));
  CHECK(r.flagged == std::vector<std::size_t>{1, 2});
  const double mean = 625.0;
  const double sd = std::sqrt((0.0 + 50.0 * 50.0 + 50.0 * 50.0) / 3.0);
  CHECK(r.coefficient_of_variation == doctest::Approx(sd / mean));

  try {
    spacing_check(at_centres({100}), cfg);
    FAIL("expected InsufficientFrames");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientFrames);
  }
}

TEST_CASE("coverage examples") {
  const auto one = segment_of({make_quad(1, ClassLabel::Insulation, oracle::rect_corners(10, 10, 50, 35))}, {100, 50});
  CHECK(coverage_of(coverage_by_class(one), ClassLabel::Insulation) == doctest::Approx(0.20));
  const auto two = segment_of({make_quad(1, ClassLabel::Insulation, oracle::rect_corners(10, 10, 50, 35)),
                               make_quad(2, ClassLabel::Insulation, oracle::rect_corners(10, 10, 50, 35))},
                              {100, 50});
  CHECK(coverage_of(coverage_by_class(two), ClassLabel::Insulation) == doctest::Approx(0.20));
  const auto clipped = segment_of({make_quad(1, ClassLabel::WoodPanel, oracle::rect_corners(-50, 0, 50, 50))}, {100, 50});
  CHECK(coverage_of(coverage_by_class(clipped), ClassLabel::WoodPanel) == doctest::Approx(0.5));
}

TEST_CASE("coverage of a layout equals its fill area fraction") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LayoutParams p;
    p.seed = seed;
    const WallLayout layout = generate_layout(p);
    std::vector<std::pair<ClassLabel, std::vector<Point2>>> polys;
    for (const auto& e : layout_elements(layout)) polys.push_back({e.label, {e.corners.begin(), e.corners.end()}});
    const Coverage c = coverage_of_polygons(polys, {layout.width, layout.height});
    for (ClassLabel l : {ClassLabel::Insulation, ClassLabel::WoodPanel, ClassLabel::DrywallPanel}) {
      CHECK(coverage_of(c, l) == doctest::Approx(oracle::fill_fraction(layout, l)).epsilon(1e-9));
    }
  }
}

TEST_CASE("adding a disjoint insulation quad never lowers coverage") {
  CounterRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<ClassLabel, std::vector<Point2>>> polys;
    for (int i = 0; i < 4; ++i) {
      const double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
      const auto r = oracle::rect_corners(x, y, x + rng.uniform(1, 20), y + rng.uniform(1, 20));
      polys.push_back({ClassLabel::Insulation, {r.begin(), r.end()}});
    }
    const double before = coverage_of(coverage_of_polygons(polys, {200, 100}), ClassLabel::Insulation);
    const auto extra = oracle::rect_corners(120, 10, 120 + rng.uniform(1, 70), 10 + rng.uniform(1, 80));
    polys.push_back({ClassLabel::Insulation, {extra.begin(), extra.end()}});
    const double after = coverage_of(coverage_of_polygons(polys, {200, 100}), ClassLabel::Insulation);
    CHECK(after >= before);
  }
}

TEST_CASE("estimate_stage examples") {
  CHECK(estimate_stage(with({{ClassLabel::DrywallPanel, 0.95}}), 0) == Stage::Closed);
  CHECK(estimate_stage(with({{ClassLabel::Insulation, 0.6}, {ClassLabel::DrywallPanel, 0.1}}), 5) == Stage::Insulated);
  CHECK(estimate_stage(with({}), 0) == Stage::Empty);
  CHECK(estimate_stage(with({{ClassLabel::WoodPanel, 0.3}, {ClassLabel::DrywallPanel, 0.3}}), 4) == Stage::Paneled);
  CHECK(estimate_stage(with({}), 3) == Stage::Skeleton);
}

TEST_CASE("estimate_stage is a total, pure function") {
  CounterRng rng(8);
  for (int i = 0; i < 2000; ++i) {
    Coverage c;
    for (auto& v : c) v = rng.uniform01();
    const int frames = static_cast<int>(rng.below(10));
    const Stage s = estimate_stage(c, frames);
    CHECK(s == estimate_stage(c, frames));
    CHECK(parse_stage(to_string(s)) == s);
  }
}

TEST_CASE("quality config validation") {
  QualityConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.tilt_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
