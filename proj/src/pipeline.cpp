#include "drywall/pipeline.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <ctime>
#include <set>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace drywall {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Orchestration

namespace {

ElementRecord record_of(const RawDetection& d) {
  ElementRecord r;
  r.id = d.id;
  r.label = d.label;
  r.confidence = d.confidence;
  r.raw = d.outline;
  return r;
}

double fallback_width(std::span<const RefinedQuad> quads) {
  double w = 1.0;
  for (const auto& q : quads) {
    for (const auto& c : q.corners) w = std::max(w, c.x + 1.0);
  }
  return w;
}

}  // namespace

AnalysisReport run_pipeline(const AnnotationDocument& doc, const PipelineConfig& cfg) {
  cfg.validate();
  AnalysisReport report;
  report.image = doc.image;
  report.config = cfg.echo();

  std::map<std::int64_t, ElementRecord> records;
  std::vector<RawDetection> usable;
  for (const auto& d : doc.elements) {
    if (records.count(d.id)) {
      report.warnings.push_back("element " + std::to_string(d.id) + ": duplicate id ignored");
      continue;
    }
    records.emplace(d.id, record_of(d));
    try {
      validate_outline(d);
      usable.push_back(d);
    } catch (const Error& e) {
      report.warnings.push_back(e.what());
    }
  }
  if (doc.elements.empty()) report.warnings.push_back("no detections in input");

  std::set<std::int64_t> placed;
  if (!usable.empty()) {
    const RefineResult refined = refine_detections(usable, cfg.seeded_refine());
    for (const auto& f : refined.failures) {
      report.warnings.push_back("element " + std::to_string(f.id) + ": " + f.message);
    }
    report.warnings.insert(report.warnings.end(), refined.warnings.begin(), refined.warnings.end());
    for (const auto& q : refined.quads) {
      auto& rec = records.at(q.id);
      rec.refined = q.corners;
      rec.unrefined = q.unrefined;
    }

    if (refined.quads.empty()) {
      report.warnings.push_back("NoSegments: no element could be refined into a quadrilateral");
    } else {
      const double width = doc.image.width > 0 ? static_cast<double>(doc.image.width) : fallback_width(refined.quads);
      Clustering clustering;
      try {
        clustering = cluster_quads(refined.quads, width, cfg.seeded_cluster());
      } catch (const Error& e) {
        report.warnings.push_back(std::string("clustering failed: ") + e.what());
      }
      report.warnings.insert(report.warnings.end(), clustering.warnings.begin(), clustering.warnings.end());

      for (const auto& seg : clustering.segments) {
        RectifiedSegment rect;
        QualityReport quality;
        try {
          rect = rectify_cluster(seg, refined.quads, cfg.seeded_rectify());
          quality = assess_segment(rect, cfg.quality);
        } catch (const Error& e) {
          report.warnings.push_back("segment " + std::to_string(seg.id) + " dropped: " + e.what());
          continue;
        }
        SegmentReport s;
        s.id = static_cast<int>(report.segments.size());
        s.x_min = seg.x_min;
        s.x_max = seg.x_max;
        s.corners = rect.wall_corners_image;
        s.h_wall = rect.h_wall;
        s.wall_size = rect.wall_size;
        s.vp = seg.vp;
        s.warnings = rect.warnings;
        quality.segment_id = s.id;
        s.quality = std::move(quality);
        std::vector<RefinedQuad> members = rect.rectified_quads;
        std::sort(members.begin(), members.end(),
                  [](const RefinedQuad& a, const RefinedQuad& b) { return a.id < b.id; });
        for (const auto& q : members) {
          ElementRecord rec = records.at(q.id);
          rec.rectified = q.corners;
          s.members.push_back(std::move(rec));
          placed.insert(q.id);
        }
        report.segments.push_back(std::move(s));
      }
    }
  }
  if (report.segments.empty() && !doc.elements.empty()) report.warnings.push_back("no wall segments found");

  for (const auto& [id, rec] : records) {
    if (!placed.count(id)) report.unassigned.push_back(rec);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report JSON

namespace {

json point_json(Point2 p) { return json::array({p.x, p.y}); }

template <typename Range>
json points_json(const Range& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(point_json(p));
  return a;
}

Point2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::SchemaError, "expected an [x, y] pair");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::vector<Point2> points_from(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::SchemaError, "expected a point list");
  std::vector<Point2> out;
  for (const auto& p : j) out.push_back(point_from(p));
  return out;
}

std::array<Point2, 4> quad_from(const json& j) {
  const auto pts = points_from(j);
  if (pts.size() != 4) throw Error(ErrorCode::SchemaError, "expected 4 corners");
  return {pts[0], pts[1], pts[2], pts[3]};
}

json element_json(const ElementRecord& e) {
  return {{"id", e.id},
          {"label", std::string(to_string(e.label))},
          {"confidence", e.confidence},
          {"raw", points_json(e.raw)},
          {"refined", e.refined ? points_json(*e.refined) : json(nullptr)},
          {"rectified", e.rectified ? points_json(*e.rectified) : json(nullptr)},
          {"unrefined", e.unrefined}};
}

ElementRecord element_from(const json& j) {
  ElementRecord e;
  e.id = j.at("id").get<std::int64_t>();
  const auto label = parse_label(j.at("label").get<std::string>());
  if (!label) throw Error(ErrorCode::SchemaError, "element " + std::to_string(e.id) + ": unknown label");
  e.label = *label;
  e.confidence = j.at("confidence").get<double>();
  e.raw = points_from(j.at("raw"));
  if (!j.at("refined").is_null()) e.refined = quad_from(j.at("refined"));
  if (!j.at("rectified").is_null()) e.rectified = quad_from(j.at("rectified"));
  e.unrefined = j.at("unrefined").get<bool>();
  return e;
}

json coverage_json(const Coverage& c) {
  json out = json::object();
  for (ClassLabel l : kAllLabels) out[std::string(to_string(l))] = coverage_of(c, l);
  return out;
}

json quality_json(const QualityReport& q) {
  json frames = json::array();
  for (const auto& f : q.frames) {
    frames.push_back({{"id", f.id},
                      {"axis_angle", f.axis_angle},
                      {"center_x", f.center_x},
                      {"length", f.length},
                      {"ambiguous_axis", f.ambiguous_axis}});
  }
  json tilts = json::array();
  for (const auto& t : q.tilt_violations) tilts.push_back({{"id", t.id}, {"angle", t.angle}});
  json spacing = nullptr;
  if (q.spacing) {
    spacing = {{"gaps", q.spacing->gaps},
               {"coefficient_of_variation", q.spacing->coefficient_of_variation},
               {"deviations", q.spacing->deviations},
               {"flagged", q.spacing->flagged},
               {"non_uniform", q.spacing->non_uniform}};
  }
  return {{"frames", std::move(frames)},
          {"tilt_violations", std::move(tilts)},
          {"spacing", std::move(spacing)},
          {"coverage", coverage_json(q.coverage)},
          {"stage", std::string(to_string(q.stage))},
          {"warnings", q.warnings}};
}

QualityReport quality_from(const json& j, int segment_id) {
  QualityReport q;
  q.segment_id = segment_id;
  for (const auto& f : j.at("frames")) {
    q.frames.push_back({f.at("id").get<std::int64_t>(), f.at("axis_angle").get<double>(),
                        f.at("center_x").get<double>(), f.at("length").get<double>(),
                        f.at("ambiguous_axis").get<bool>()});
  }
  for (const auto& t : j.at("tilt_violations")) {
    q.tilt_violations.push_back({t.at("id").get<std::int64_t>(), t.at("angle").get<double>()});
  }
  if (!j.at("spacing").is_null()) {
    const auto& s = j.at("spacing");
    SpacingReport r;
    r.gaps = s.at("gaps").get<std::vector<double>>();
    r.coefficient_of_variation = s.at("coefficient_of_variation").get<double>();
    r.deviations = s.at("deviations").get<std::vector<double>>();
    r.flagged = s.at("flagged").get<std::vector<std::size_t>>();
    r.non_uniform = s.at("non_uniform").get<bool>();
    q.spacing = std::move(r);
  }
  for (ClassLabel l : kAllLabels) {
    q.coverage[static_cast<std::size_t>(l)] = j.at("coverage").at(std::string(to_string(l))).get<double>();
  }
  const auto stage = parse_stage(j.at("stage").get<std::string>());
  if (!stage) throw Error(ErrorCode::SchemaError, "unknown stage");
  q.stage = *stage;
  q.warnings = j.at("warnings").get<std::vector<std::string>>();
  return q;
}

}  // namespace

json report_to_json(const AnalysisReport& report) {
  json segments = json::array();
  for (const auto& s : report.segments) {
    json members = json::array();
    for (const auto& m : s.members) members.push_back(element_json(m));
    const auto h = s.h_wall.row_major();
    segments.push_back({{"id", s.id},
                        {"x_range", {s.x_min, s.x_max}},
                        {"corners", points_json(s.corners)},
                        {"homography", json(std::vector<double>(h.begin(), h.end()))},
                        {"wall_size", {s.wall_size.width, s.wall_size.height}},
                        {"vanishing_point",
                         {{"point", {s.vp.point.u, s.vp.point.v, s.vp.point.w}},
                          {"scatter", s.vp.scatter},
                          {"support", s.vp.support}}},
                        {"members", std::move(members)},
                        {"quality", quality_json(s.quality)},
                        {"warnings", s.warnings}});
  }
  json unassigned = json::array();
  for (const auto& e : report.unassigned) unassigned.push_back(element_json(e));
  return {{"format_version", report.format_version},
          {"pipeline_version", report.pipeline_version},
          {"image", {{"id", report.image.id}, {"width", report.image.width}, {"height", report.image.height}}},
          {"config", report.config},
          {"segments", std::move(segments)},
          {"unassigned", std::move(unassigned)},
          {"warnings", report.warnings}};
}

AnalysisReport report_from_json(const json& j) {
  try {
    AnalysisReport r;
    r.format_version = j.at("format_version").get<int>();
    if (r.format_version != kFormatVersion) throw Error(ErrorCode::SchemaError, "unsupported format_version");
    r.pipeline_version = j.at("pipeline_version").get<std::string>();
    const auto& img = j.at("image");
    r.image = {img.at("id").get<std::string>(), img.at("width").get<int>(), img.at("height").get<int>()};
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& s : j.at("segments")) {
      SegmentReport seg;
      seg.id = s.at("id").get<int>();
      seg.x_min = s.at("x_range").at(0).get<double>();
      seg.x_max = s.at("x_range").at(1).get<double>();
      seg.corners = quad_from(s.at("corners"));
      const auto h = s.at("homography").get<std::vector<double>>();
      if (h.size() != 9) throw Error(ErrorCode::SchemaError, "homography must have 9 entries");
      seg.h_wall = Homography::from_row_major(std::span<const double, 9>(h.data(), 9));
      seg.wall_size = {s.at("wall_size").at(0).get<double>(), s.at("wall_size").at(1).get<double>()};
      const auto& vp = s.at("vanishing_point");
      const auto& p = vp.at("point");
      seg.vp.point = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
      seg.vp.scatter = vp.at("scatter").get<double>();
      seg.vp.support = vp.at("support").get<int>();
      for (const auto& m : s.at("members")) seg.members.push_back(element_from(m));
      seg.quality = quality_from(s.at("quality"), seg.id);
      seg.warnings = s.at("warnings").get<std::vector<std::string>>();
      r.segments.push_back(std::move(seg));
    }
    for (const auto& e : j.at("unassigned")) r.unassigned.push_back(element_from(e));
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("report: ") + e.what());
  }
}

std::string serialize_report(const AnalysisReport& report) { return report_to_json(report).dump(2) + "\n"; }

AnalysisReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return report_from_json(j);
}

void write_report(const AnalysisReport& report, const std::filesystem::path& path) {
  write_text_file(path, serialize_report(report));
}

AnalysisReport read_report(const std::filesystem::path& path) { return parse_report(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Overlay

namespace {

const char* label_colour(ClassLabel l) {
  switch (l) {
    case ClassLabel::WoodPanel: return "#b5651d";
    case ClassLabel::Insulation: return "#f2c94c";
    case ClassLabel::DrywallPanel: return "#9aa5b1";
    case ClassLabel::MetalFrame: return "#2f80ed";
  }
  return "#000000";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

template <typename Range>
std::string points_attr(const Range& pts, double scale = 1.0, Point2 offset = {}) {
  std::string s;
  for (const auto& p : pts) {
    if (!s.empty()) s += ' ';
    s += fmt(offset.x + scale * p.x) + "," + fmt(offset.y + scale * p.y);
  }
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_overlay(const AnalysisReport& report) {
  const double w = std::max(1, report.image.width);
  const double h = std::max(1, report.image.height);
  const double gap = 20.0;
  const double panel_h = h / 2.0;

  // Rectified panels sit in a row under the image, each scaled to panel_h.
  std::vector<std::pair<Point2, double>> panels;
  double x = 0.0;
  for (const auto& s : report.segments) {
    const double scale = s.wall_size.height > 0.0 ? panel_h / s.wall_size.height : 1.0;
    panels.push_back({{x, h + gap}, scale});
    x += scale * s.wall_size.width + gap;
  }
  const double total_w = std::max(w, x);
  const double total_h = report.segments.empty() ? h : h + gap + panel_h + gap;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(total_w) + "\" height=\"" + fmt(total_h) +
         "\" viewBox=\"0 0 " + fmt(total_w) + " " + fmt(total_h) + "\">\n";
  svg += "<title>" + escape(report.image.id) + "</title>\n";
  svg += "<rect class=\"image-frame\" x=\"0\" y=\"0\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
         "\" fill=\"white\" stroke=\"#cccccc\"/>\n";

  auto draw_element = [&](const ElementRecord& e) {
    if (!e.raw.empty()) {
      svg += "<polygon class=\"raw\" points=\"" + points_attr(e.raw) + "\" fill=\"none\" stroke=\"#999999\" stroke-width=\"0.5\"/>\n";
    }
    if (e.refined) {
      svg += "<polygon class=\"refined\" data-id=\"" + std::to_string(e.id) + "\" points=\"" + points_attr(*e.refined) +
             "\" fill=\"" + label_colour(e.label) + "\" fill-opacity=\"0.35\" stroke=\"" + label_colour(e.label) + "\"/>\n";
    }
  };
  svg += "<g class=\"elements\">\n";
  for (const auto& s : report.segments) {
    for (const auto& m : s.members) draw_element(m);
  }
  for (const auto& e : report.unassigned) draw_element(e);
  svg += "</g>\n";

  for (std::size_t i = 0; i < report.segments.size(); ++i) {
    const auto& s = report.segments[i];
    svg += "<polygon class=\"segment-box\" data-segment=\"" + std::to_string(s.id) + "\" points=\"" +
           points_attr(s.corners) + "\" fill=\"none\" stroke=\"#27ae60\" stroke-width=\"2\"/>\n";

    const auto [origin, scale] = panels[i];
    std::set<std::int64_t> violations;
    for (const auto& t : s.quality.tilt_violations) violations.insert(t.id);
    std::map<std::int64_t, double> angles;
    for (const auto& f : s.quality.frames) angles[f.id] = f.axis_angle;

    svg += "<g class=\"rectified\" data-segment=\"" + std::to_string(s.id) + "\">\n";
    const std::array<Point2, 4> border{Point2{0, 0}, {s.wall_size.width, 0}, {s.wall_size.width, s.wall_size.height},
                                       {0, s.wall_size.height}};
    svg += "<polygon class=\"wall\" points=\"" + points_attr(border, scale, origin) +
           "\" fill=\"#fafafa\" stroke=\"#27ae60\"/>\n";
    for (const auto& m : s.members) {
      if (!m.rectified) continue;
      const bool frame = m.label == ClassLabel::MetalFrame;
      const bool bad = violations.count(m.id) > 0;
      const char* cls = !frame ? "panel" : (bad ? "frame-violation" : "frame");
      const std::string stroke = bad ? "#e74c3c" : label_colour(m.label);
      svg += std::string("<polygon class=\"") + cls + "\" data-id=\"" + std::to_string(m.id) + "\" points=\"" +
             points_attr(*m.rectified, scale, origin) + "\" fill=\"" + (bad ? "#e74c3c" : label_colour(m.label)) +
             "\" fill-opacity=\"0.5\" stroke=\"" + stroke + "\"/>\n";
      if (frame && angles.count(m.id)) {
        const Point2 c = polygon_centroid(*m.rectified);
        char label[32];
        std::snprintf(label, sizeof label, "%.1f\xC2\xB0", angles[m.id]);
        svg += std::string("<text class=\"angle-label\" x=\"") + fmt(origin.x + scale * c.x) + "\" y=\"" +
               fmt(origin.y + scale * c.y) + "\" font-size=\"10\" text-anchor=\"middle\" fill=\"" +
               (bad ? "#e74c3c" : "#333333") + "\">" + label + "</text>\n";
      }
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void write_overlay(const AnalysisReport& report, const std::filesystem::path& path) {
  write_text_file(path, render_overlay(report));
}

// ---------------------------------------------------------------------------
// Progress log

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::size_t append_progress(const AnalysisReport& report, const std::filesystem::path& log_path,
                            const std::optional<std::string>& timestamp) {
  if (report.segments.empty()) return 0;
  const std::string ts = timestamp ? *timestamp : utc_timestamp();
  std::string block;
  for (const auto& s : report.segments) {
    std::size_t flags = s.quality.spacing ? s.quality.spacing->flagged.size() : 0;
    json entry = {{"format_version", kFormatVersion},
                  {"timestamp", ts},
                  {"image_id", report.image.id},
                  {"segment_id", s.id},
                  {"stage", std::string(to_string(s.quality.stage))},
                  {"coverage", coverage_json(s.quality.coverage)},
                  {"tilt_violations", s.quality.tilt_violations.size()},
                  {"spacing_flags", flags},
                  {"non_uniform_spacing", s.quality.spacing && s.quality.spacing->non_uniform}};
    block += entry.dump() + "\n";
  }

  const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::IoError, "cannot open " + log_path.string() + ": " + std::strerror(errno));
  if (::flock(fd, LOCK_EX) != 0) {
    ::close(fd);
    throw Error(ErrorCode::IoError, "cannot lock " + log_path.string());
  }
  std::size_t done = 0;
  while (done < block.size()) {
    const ssize_t n = ::write(fd, block.data() + done, block.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::flock(fd, LOCK_UN);
      ::close(fd);
      throw Error(ErrorCode::IoError, "write failed for " + log_path.string());
    }
    done += static_cast<std::size_t>(n);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  return report.segments.size();
}

}  // namespace drywall
