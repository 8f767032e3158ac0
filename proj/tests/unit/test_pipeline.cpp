#include <doctest.h>

#include <fstream>
#include <set>
#include <sys/wait.h>
#include <unistd.h>

#include "drywall/pipeline.hpp"
#include "oracles.hpp"

using namespace drywall;
namespace fs = std::filesystem;

namespace {

AnnotationDocument benchmark_document() {
  const SceneTruth t = standard_benchmark_scene();
  return {{"benchmark", static_cast<int>(t.image_size.width), static_cast<int>(t.image_size.height)},
          degrade(t, standard_benchmark_degrade())};
}

const AnalysisReport& benchmark_report() {
  static const AnalysisReport r = run_pipeline(benchmark_document(), {});
  return r;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / (name + "." + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("benchmark scene end to end") {
  const AnalysisReport& r = benchmark_report();
  REQUIRE(r.segments.size() == 2);
  std::size_t tilts = 0;
  for (const auto& s : r.segments) tilts += s.quality.tilt_violations.size();
  CHECK(tilts == 1);
  CHECK(r.format_version == 1);
  CHECK(r.pipeline_version == kPipelineVersion);
  CHECK(r.config == PipelineConfig{}.echo());
  std::set<std::int64_t> ids;
  for (const auto& s : r.segments) {
    for (const auto& m : s.members) {
      CHECK(ids.insert(m.id).second);
      CHECK(m.refined.has_value());
      CHECK(m.rectified.has_value());
    }
  }
  for (const auto& u : r.unassigned) CHECK(ids.insert(u.id).second);
  CHECK(ids.size() == benchmark_document().elements.size());
}

TEST_CASE("single fronto-parallel panel") {
  const std::vector<RawDetection> det{
      {1, ClassLabel::WoodPanel, 0.8, densify_quad(oracle::rect_corners(200, 100, 600, 500), 10)}};
  const AnalysisReport r = run_pipeline({{"panel", 800, 600}, det}, {});
  REQUIRE(r.segments.size() == 1);
  CHECK(r.segments[0].quality.stage <= Stage::Paneled);
  CHECK(r.segments[0].members.size() == 1);
}

TEST_CASE("all-degenerate input yields an empty report with warnings") {
  std::vector<RawDetection> det;
  for (int i = 1; i <= 3; ++i) det.push_back({i, ClassLabel::Insulation, 0.5, {{0, 0}, {10.0 * i, 0}, {5, 8}}});
  const AnalysisReport r = run_pipeline({{"tri", 100, 100}, det}, {});
  CHECK(r.segments.empty());
  CHECK(r.unassigned.size() == 3);
  for (int i = 1; i <= 3; ++i) {
    bool named = false;
    for (const auto& w : r.warnings) named = named || w.find("element " + std::to_string(i)) != std::string::npos;
    CHECK(named);
  }
  const AnalysisReport none = run_pipeline({{"none", 100, 100}, {}}, {});
  CHECK(none.segments.empty());
  CHECK_FALSE(none.warnings.empty());
}

TEST_CASE("invalid configuration throws") {
  PipelineConfig cfg;
  cfg.cluster.n_columns = 0;
  CHECK_THROWS_AS(run_pipeline(benchmark_document(), cfg), Error);
}

TEST_CASE("report serialization round-trips and is deterministic") {
  const AnalysisReport& r = benchmark_report();
  const std::string text = serialize_report(r);
  CHECK(parse_report(text) == r);
  CHECK(serialize_report(run_pipeline(benchmark_document(), {})) == text);

  TempDir dir("drywall_report");
  write_report(r, dir.path / "r.json");
  CHECK(read_report(dir.path / "r.json") == r);
  try {
    write_report(r, dir.path / "missing" / "r.json");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
  CHECK_THROWS_AS(parse_report("{}"), Error);
  CHECK_THROWS_AS(parse_report("[1,"), Error);
}

TEST_CASE("benchmark overlay draws two segment boxes and one flagged frame") {
  const std::string svg = render_overlay(benchmark_report());
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count(svg, "class=\"segment-box\"") == 2);
  CHECK(count(svg, "class=\"frame-violation\"") == 1);
  CHECK(count(svg, "class=\"raw\"") == benchmark_document().elements.size());
  CHECK(count(svg, "class=\"angle-label\"") >= 8);
}

TEST_CASE("progress log appends one entry per segment") {
  TempDir dir("drywall_progress");
  const fs::path log = dir.path / "progress.jsonl";
  const AnalysisReport& r = benchmark_report();
  CHECK(append_progress(r, log, "2026-01-01T00:00:00Z") == 2);
  CHECK(lines_of(log).size() == 2);
  CHECK(append_progress(r, log) == 2);
  const auto lines = lines_of(log);
  REQUIRE(lines.size() == 4);
  for (const auto& l : lines) {
    const auto j = nlohmann::json::parse(l);
    CHECK(j["format_version"] == 1);
    CHECK(j["image_id"] == "benchmark");
    CHECK(j["coverage"].size() == 4);
  }
  CHECK(nlohmann::json::parse(lines[0])["timestamp"] == "2026-01-01T00:00:00Z");
  CHECK(nlohmann::json::parse(lines[0])["segment_id"] == 0);
  CHECK(nlohmann::json::parse(lines[1])["segment_id"] == 1);
  try {
    append_progress(r, dir.path / "missing" / "log.jsonl");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}

TEST_CASE("timestamps are ISO-8601 UTC") {
  const std::string ts = utc_timestamp();
  CHECK(ts.size() == 20);
  CHECK(ts[4] == '-');
  CHECK(ts[10] == 'T');
  CHECK(ts.back() == 'Z');
}

TEST_CASE("concurrent appenders never interleave lines") {
  TempDir dir("drywall_concurrent");
  const fs::path log = dir.path / "progress.jsonl";
  AnalysisReport one = benchmark_report();
  one.segments.resize(1);
  one.image.id = std::string(4000, 'x');
  const int per_process = 100;
  std::vector<pid_t> children;
  for (int p = 0; p < 2; ++p) {
    const pid_t pid = ::fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
      for (int i = 0; i < per_process; ++i) append_progress(one, log);
      ::_exit(0);
    }
    children.push_back(pid);
  }
  for (pid_t pid : children) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
  }
  const auto lines = lines_of(log);
  CHECK(lines.size() == 2 * per_process);
  for (const auto& l : lines) CHECK(nlohmann::json::accept(l));
}
