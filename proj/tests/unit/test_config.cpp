#include <doctest.h>

#include <cmath>
#include <limits>

#include "drywall/config.hpp"
#include "drywall/rng.hpp"

using namespace drywall;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("defaults validate") { CHECK_NOTHROW(PipelineConfig{}.validate()); }

TEST_CASE("config file assignments") {
  const PipelineConfig c = parse_config(R"(
# tolerances
refine.residual_tol = 2.5
cluster.n_columns = 6   # more columns
cluster.vp_ransac.max_iterations = 1000
quality.expected_spacing = 625
quality.stage.skeleton_frames = 3
pipeline.seed = 18446744073709551615
output.overlay = true
io.output = out/report.json
)");
  CHECK(c.refine.residual_tol == 2.5);
  CHECK(c.cluster.n_columns == 6);
  CHECK(c.cluster.vp_ransac.max_iterations == 1000);
  CHECK(c.quality.expected_spacing == 625.0);
  CHECK(c.quality.stage_thresholds.skeleton_frames == 3);
  CHECK(c.seed == std::numeric_limits<std::uint64_t>::max());
  CHECK(c.overlay_enabled);
  CHECK(c.output == "out/report.json");
  CHECK(parse_config("quality.expected_spacing = none", c).quality.expected_spacing == std::nullopt);
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK(code_of("refine.residual_tl = 1") == ErrorCode::InvalidArgument);
  CHECK(code_of("refine.residual_tol = fast") == ErrorCode::InvalidArgument);
  CHECK(code_of("cluster.n_columns = 2.5") == ErrorCode::InvalidArgument);
  CHECK(code_of("output.overlay = maybe") == ErrorCode::InvalidArgument);
  CHECK(code_of("refine.residual_tol 1") == ErrorCode::ParseError);
  CHECK(code_of("refine.residual_tol =") == ErrorCode::ParseError);
  try {
    parse_config("\n\nbogus.key = 1");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("validation rejects out-of-range values") {
  PipelineConfig c;
  c.refine.residual_tol = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.cluster.n_columns = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.rectify.consensus.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("format then parse is the identity on every key") {
  CounterRng rng(4);
  PipelineConfig c;
  c.refine.residual_tol = rng.uniform(0.1, 5.0);
  c.refine.angle_tol = 1.0 / 3.0;
  c.cluster.scatter_tol = rng.uniform(0.1, 5.0);
  c.cluster.consistency_tol = 0.1 + 0.2;
  c.rectify.consensus.inlier_threshold = rng.uniform(1, 10);
  c.quality.expected_spacing = 612.5;
  c.seed = rng.next_u64();
  c.skip_invalid_geometry = true;
  c.overlay_enabled = true;
  const PipelineConfig back = parse_config(format_config(c));
  CHECK(back.echo() == c.echo());
  CHECK(back.refine.angle_tol == c.refine.angle_tol);
  CHECK(back.cluster.consistency_tol == c.cluster.consistency_tol);
}

TEST_CASE("echo covers every tunable key") {
  const auto echo = PipelineConfig{}.echo();
  for (const auto& k : config_keys()) {
    if (k.rfind("io.", 0) == 0 || k == "output.overlay") continue;
    CHECK_MESSAGE(echo.count(k) == 1, k);
  }
}

TEST_CASE("format_double round-trips") {
  CounterRng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.below(200)) - 100);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(1.5) == "1.5");
}

TEST_CASE("module seeds derive from the pipeline seed") {
  PipelineConfig a, b;
  b.seed = 1;
  CHECK(a.seeded_refine().side_ransac.seed != b.seeded_refine().side_ransac.seed);
  CHECK(a.seeded_cluster().vp_ransac.seed != a.seeded_rectify().consensus.seed);
  CHECK(a.seeded_refine().side_ransac.seed == PipelineConfig{}.seeded_refine().side_ransac.seed);
}

TEST_CASE("load_config reports missing files") {
  try {
    load_config("/nonexistent/drywall.conf");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}
