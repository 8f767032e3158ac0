#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "drywall/pipeline.hpp"
#include "drywall/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace drywall;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::optional<std::string> config;
  std::vector<std::string> inputs;
  std::optional<std::string> out;
  std::optional<std::string> overlay;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> log;
  int jobs = 1;
  std::string scene = "benchmark";
  std::optional<std::string> truth;
  std::optional<double> sigma;
  std::optional<int> densify;
};

PipelineConfig resolve_config(const Options& o) {
  PipelineConfig cfg;
  if (o.config) cfg = load_config(*o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output = *o.out;
  if (o.overlay) {
    cfg.overlay = *o.overlay;
    cfg.overlay_enabled = true;
  }
  if (o.log) cfg.log = *o.log;
  cfg.validate();
  return cfg;
}

std::vector<std::string> resolve_inputs(const Options& o, const PipelineConfig& cfg) {
  if (!o.inputs.empty()) return o.inputs;
  if (cfg.input) return {*cfg.input};
  throw UsageError("no input: pass --input or set io.input in the config");
}

void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path && *path != "-") {
    write_text_file(*path, text);
  } else {
    std::cout << text;
  }
}

json quad_json(const std::array<Point2, 4>& q) {
  json a = json::array();
  for (const auto& p : q) a.push_back({p.x, p.y});
  return a;
}

json refined_json(const RefinedQuad& q) {
  return {{"id", q.id}, {"label", std::string(to_string(q.label))}, {"corners", quad_json(q.corners)},
          {"unrefined", q.unrefined}};
}

json vp_json(const VanishingPoint& vp) {
  return {{"point", {vp.point.u, vp.point.v, vp.point.w}}, {"scatter", vp.scatter}, {"support", vp.support}};
}

AnnotationDocument load_input(const std::string& path, const PipelineConfig& cfg, std::vector<std::string>& warnings) {
  LoadResult loaded = load_annotations(path, {cfg.skip_invalid_geometry});
  warnings = std::move(loaded.warnings);
  return std::move(loaded.document);
}

json header(const AnnotationDocument& doc) {
  return {{"format_version", kFormatVersion},
          {"pipeline_version", kPipelineVersion},
          {"image", {{"id", doc.image.id}, {"width", doc.image.width}, {"height", doc.image.height}}}};
}

// refine / cluster / rectify run the pipeline up to the named stage and print
// that stage's output.
int run_stage(const std::string& stage, const Options& o) {
  const PipelineConfig cfg = resolve_config(o);
  const auto inputs = resolve_inputs(o, cfg);
  if (inputs.size() != 1) throw UsageError(stage + " takes exactly one --input");
  std::vector<std::string> warnings;
  const AnnotationDocument doc = load_input(inputs.front(), cfg, warnings);

  json out = header(doc);
  RefineResult refined = refine_detections(doc.elements, cfg.seeded_refine());
  for (const auto& f : refined.failures) {
    warnings.push_back("element " + std::to_string(f.id) + ": " + f.message);
  }
  warnings.insert(warnings.end(), refined.warnings.begin(), refined.warnings.end());

  if (stage == "refine") {
    json quads = json::array();
    for (const auto& q : refined.quads) quads.push_back(refined_json(q));
    out["quads"] = std::move(quads);
  } else if (refined.quads.empty()) {
    warnings.push_back("NoSegments: no element could be refined into a quadrilateral");
    out["segments"] = json::array();
  } else {
    const Clustering clustering = cluster_quads(refined.quads, doc.image.width, cfg.seeded_cluster());
    warnings.insert(warnings.end(), clustering.warnings.begin(), clustering.warnings.end());
    json segments = json::array();
    for (const auto& seg : clustering.segments) {
      json s = {{"id", seg.id}, {"x_range", {seg.x_min, seg.x_max}}, {"vanishing_point", vp_json(seg.vp)},
                {"members", seg.members}};
      if (stage == "rectify") {
        try {
          const RectifiedSegment rect = rectify_cluster(seg, refined.quads, cfg.seeded_rectify());
          const auto h = rect.h_wall.row_major();
          s["corners"] = quad_json(rect.wall_corners_image);
          s["homography"] = std::vector<double>(h.begin(), h.end());
          s["wall_size"] = {rect.wall_size.width, rect.wall_size.height};
          json rq = json::array();
          for (const auto& q : rect.rectified_quads) rq.push_back(refined_json(q));
          s["rectified"] = std::move(rq);
          s["warnings"] = rect.warnings;
        } catch (const Error& e) {
          warnings.push_back("segment " + std::to_string(seg.id) + " dropped: " + e.what());
          continue;
        }
      }
      segments.push_back(std::move(s));
    }
    out["segments"] = std::move(segments);
    out["unassigned"] = clustering.unassigned;
  }
  out["warnings"] = warnings;
  emit(cfg.output, out.dump(2) + "\n");
  return kExitOk;
}

fs::path batch_target(const fs::path& dir, const std::string& input, const char* suffix) {
  return dir / (fs::path(input).stem().string() + suffix);
}

int run_analyze(const Options& o) {
  const PipelineConfig cfg = resolve_config(o);
  const auto inputs = resolve_inputs(o, cfg);
  if (o.jobs < 1) throw UsageError("--jobs must be at least 1");
  const bool batch = inputs.size() > 1;
  if (batch && !cfg.output) throw UsageError("several inputs need --out <directory>");
  if (batch) fs::create_directories(*cfg.output);
  if (batch && cfg.overlay_enabled && cfg.overlay) fs::create_directories(*cfg.overlay);

  std::mutex io_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto work = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      const std::string& input = inputs[i];
      try {
        std::vector<std::string> load_warnings;
        const AnnotationDocument doc = load_input(input, cfg, load_warnings);
        AnalysisReport report = run_pipeline(doc, cfg);
        report.warnings.insert(report.warnings.begin(), load_warnings.begin(), load_warnings.end());
        const std::string text = serialize_report(report);
        if (batch) {
          write_text_file(batch_target(*cfg.output, input, ".report.json"), text);
        } else {
          std::lock_guard lock(io_mutex);
          emit(cfg.output, text);
        }
        if (cfg.overlay_enabled) {
          if (!cfg.overlay) throw Error(ErrorCode::InvalidArgument, "output.overlay is set but no overlay path given");
          write_overlay(report, batch ? batch_target(*cfg.overlay, input, ".svg") : fs::path(*cfg.overlay));
        }
        if (cfg.log) append_progress(report, *cfg.log);
      } catch (const Error& e) {
        ++failures;
        std::lock_guard lock(io_mutex);
        std::cerr << input << ": " << e.what() << "\n";
      }
    }
  };
  const int n = std::min<int>(o.jobs, static_cast<int>(inputs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return failures == 0 ? kExitOk : kExitError;
}

int run_synth(const Options& o) {
  std::vector<WallPlacement> placements;
  DegradeParams degrade_params = standard_benchmark_degrade();
  std::string image_id;
  if (o.scene == "benchmark") {
    placements = standard_benchmark_placements();
    image_id = "benchmark";
  } else if (o.scene == "corner") {
    const std::uint64_t seed = o.seed.value_or(0);
    placements = random_corner_placements(seed);
    degrade_params.seed = seed;
    image_id = "corner-" + std::to_string(seed);
  } else {
    throw UsageError("unknown scene '" + o.scene + "' (expected benchmark or corner)");
  }
  if (o.sigma) degrade_params.vertex_jitter_sigma = *o.sigma;
  if (o.densify) degrade_params.densify_per_edge = *o.densify;
  degrade_params.validate();

  const SceneTruth truth = project_scene(placements);
  const auto detections = degrade(truth, degrade_params);
  const ImageInfo image{image_id, static_cast<int>(truth.image_size.width), static_cast<int>(truth.image_size.height)};
  const EmittedAnnotations emitted = emit_annotations(image, detections, &truth);
  emit(o.out, emitted.annotations.dump(2) + "\n");
  if (o.truth) write_text_file(*o.truth, emitted.ground_truth->dump(2) + "\n");
  return kExitOk;
}

void add_common(CLI::App* cmd, Options& o, bool multi_input) {
  cmd->add_option("--config", o.config, "Configuration file (dotted key = value lines)");
  if (multi_input) {
    cmd->add_option("--input", o.inputs, "Annotation JSON file(s)");
  } else {
    cmd->add_option("--input", o.inputs, "Annotation JSON file")->expected(1);
  }
  cmd->add_option("--out", o.out, "Output path, '-' for stdout");
  cmd->add_option("--seed", o.seed, "Seed mixed into every RANSAC stream");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drywall construction-progress analysis from instance segmentation outlines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kPipelineVersion));
  Options o;

  auto* refine = app.add_subcommand("refine", "Simplify outlines into refined quadrilaterals");
  auto* cluster = app.add_subcommand("cluster", "Group refined elements into wall segments");
  auto* rectify = app.add_subcommand("rectify", "Rectify every wall segment");
  auto* analyze = app.add_subcommand("analyze", "Run the full pipeline and write the analysis report");
  auto* synth = app.add_subcommand("synth", "Generate synthetic annotations with ground truth");
  for (auto* cmd : {refine, cluster, rectify}) add_common(cmd, o, false);
  add_common(analyze, o, true);
  analyze->add_option("--overlay", o.overlay, "SVG overlay path (a directory in batch mode)");
  analyze->add_option("--log", o.log, "Progress log (JSON lines, appended)");
  analyze->add_option("--jobs", o.jobs, "Parallel workers for several inputs")->check(CLI::PositiveNumber);
  synth->add_option("--scene", o.scene, "benchmark or corner")->check(CLI::IsMember({"benchmark", "corner"}));
  synth->add_option("--seed", o.seed, "Corner scene seed");
  synth->add_option("--out", o.out, "Annotation output path, '-' for stdout");
  synth->add_option("--truth", o.truth, "Ground-truth output path");
  synth->add_option("--sigma", o.sigma, "Vertex jitter in pixels")->check(CLI::NonNegativeNumber);
  synth->add_option("--densify", o.densify, "Vertices per edge")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*refine) return run_stage("refine", o);
    if (*cluster) return run_stage("cluster", o);
    if (*rectify) return run_stage("rectify", o);
    if (*analyze) return run_analyze(o);
    return run_synth(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
