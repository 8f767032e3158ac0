#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "drywall/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(DRYWALL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Workdir {
  fs::path path = fs::temp_directory_path() / ("drywall_cli." + std::to_string(::getpid()));
  Workdir() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("cli synth then analyze") {
  Workdir w;
  REQUIRE(run("synth --scene benchmark --out " + (w / "bench.json") + " --truth " + (w / "truth.json")) == 0);
  REQUIRE(fs::exists(w / "truth.json"));
  CHECK(run("analyze --input " + (w / "bench.json") + " --out " + (w / "r1.json") + " --overlay " + (w / "o.svg") +
            " --log " + (w / "log.jsonl")) == 0);
  CHECK(run("analyze --input " + (w / "bench.json") + " --out " + (w / "r2.json")) == 0);
  CHECK(drywall::read_text_file(w / "r1.json") == drywall::read_text_file(w / "r2.json"));
  const auto report = drywall::read_report(w / "r1.json");
  CHECK(report.segments.size() == 2);
  CHECK(fs::exists(w / "o.svg"));
  CHECK(fs::exists(w / "log.jsonl"));
  for (const char* stage : {"refine", "cluster", "rectify"}) {
    CHECK(run(std::string(stage) + " --input " + (w / "bench.json") + " --out " + (w / (std::string(stage) + ".json"))) == 0);
  }
}

TEST_CASE("cli batch mode with parallel jobs") {
  Workdir w;
  for (int s = 0; s < 3; ++s) {
    REQUIRE(run("synth --scene corner --seed " + std::to_string(s) + " --out " + (w / ("c" + std::to_string(s) + ".json"))) == 0);
  }
  CHECK(run("analyze --jobs 3 --input " + (w / "c0.json") + " " + (w / "c1.json") + " " + (w / "c2.json") + " --out " +
            (w / "reports") + " --log " + (w / "log.jsonl")) == 0);
  for (int s = 0; s < 3; ++s) CHECK(fs::exists(w / ("reports/c" + std::to_string(s) + ".report.json")));
}

TEST_CASE("cli config file and seed") {
  Workdir w;
  REQUIRE(run("synth --out " + (w / "bench.json")) == 0);
  drywall::write_text_file(w / "good.conf", "quality.tilt_threshold = 3.0\n");
  CHECK(run("analyze --config " + (w / "good.conf") + " --seed 5 --input " + (w / "bench.json") + " --out " + (w / "r.json")) == 0);
  const auto r = drywall::read_report(w / "r.json");
  CHECK(r.config.at("quality.tilt_threshold") == "3");
  CHECK(r.config.at("pipeline.seed") == "5");
  for (const auto& s : r.segments) CHECK(s.quality.tilt_violations.empty());
}

TEST_CASE("cli exit codes") {
  Workdir w;
  CHECK(run("") == 2);
  CHECK(run("analyze --bogus") == 2);
  CHECK(run("analyze") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("analyze --input " + (w / "missing.json")) == 1);
  drywall::write_text_file(w / "bad.conf", "refine.no_such_key = 1\n");
  REQUIRE(run("synth --out " + (w / "bench.json")) == 0);
  CHECK(run("analyze --config " + (w / "bad.conf") + " --input " + (w / "bench.json")) == 1);
  drywall::write_text_file(w / "broken.json", "{\"image\": {");
  CHECK(run("analyze --input " + (w / "broken.json")) == 1);
  CHECK(run("--version") == 0);
}
