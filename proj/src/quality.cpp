#include "drywall/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

namespace drywall {

namespace bg = boost::geometry;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Empty: return "empty";
    case Stage::Skeleton: return "skeleton";
    case Stage::Insulated: return "insulated";
    case Stage::Paneled: return "paneled";
    case Stage::Closed: return "closed";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view text) {
  for (Stage s : {Stage::Empty, Stage::Skeleton, Stage::Insulated, Stage::Paneled, Stage::Closed}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

void QualityConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(tilt_threshold) || !positive(spacing_cv_threshold) || !positive(spacing_rel_tol) ||
      (expected_spacing && !positive(*expected_spacing)) || !positive(stage_thresholds.closed_drywall) ||
      !positive(stage_thresholds.paneled) || !positive(stage_thresholds.insulated) ||
      stage_thresholds.skeleton_frames <= 0) {
    throw Error(ErrorCode::InvalidArgument, "quality thresholds must be > 0");
  }
}

std::vector<FrameMeasure> frame_orientations(const RectifiedSegment& seg) {
  std::vector<FrameMeasure> out;
  for (const auto& q : seg.rectified_quads) {
    if (q.label != ClassLabel::MetalFrame) continue;
    const auto& c = q.corners;
    const Point2 top = midpoint(c[0], c[1]);
    const Point2 bottom = midpoint(c[3], c[2]);
    const Point2 left = midpoint(c[0], c[3]);
    const Point2 right = midpoint(c[1], c[2]);
    const double lv = distance(top, bottom);
    const double lh = distance(left, right);
    FrameMeasure m;
    m.id = q.id;
    m.ambiguous_axis = std::abs(lv - lh) <= 1e-9 * std::max(lv, lh);
    Point2 axis = lv >= lh || m.ambiguous_axis ? top - bottom : right - left;
    // Point the axis upwards (negative y) so the angle lands in (-90, 90].
    if (axis.y > 0.0 || (axis.y == 0.0 && axis.x < 0.0)) axis = -1.0 * axis;
    m.axis_angle = std::atan2(axis.x, -axis.y) * 180.0 / std::numbers::pi;
    m.center_x = polygon_centroid(c).x;
    m.length = std::max(lv, lh);
    out.push_back(m);
  }
  return out;
}

std::vector<TiltViolation> tilt_check(std::span<const FrameMeasure> measures, const QualityConfig& cfg) {
  std::vector<TiltViolation> out;
  for (const auto& m : measures) {
    if (std::abs(m.axis_angle) > cfg.tilt_threshold) out.push_back({m.id, m.axis_angle});
  }
  return out;
}

SpacingReport spacing_check(std::span<const FrameMeasure> measures, const QualityConfig& cfg) {
  if (measures.size() < 2) throw Error(ErrorCode::InsufficientFrames, "spacing needs at least 2 frames");
  std::vector<double> centers;
  for (const auto& m : measures) centers.push_back(m.center_x);
  std::sort(centers.begin(), centers.end());
  SpacingReport r;
  for (std::size_t i = 1; i < centers.size(); ++i) r.gaps.push_back(centers[i] - centers[i - 1]);
  const double n = static_cast<double>(r.gaps.size());
  const double mean = std::accumulate(r.gaps.begin(), r.gaps.end(), 0.0) / n;
  double var = 0.0;
  for (double g : r.gaps) var += (g - mean) * (g - mean);
  var /= n;
  r.coefficient_of_variation = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  r.non_uniform = r.coefficient_of_variation > cfg.spacing_cv_threshold;
  if (cfg.expected_spacing) {
    for (std::size_t i = 0; i < r.gaps.size(); ++i) {
      const double dev = std::abs(r.gaps[i] - *cfg.expected_spacing) / *cfg.expected_spacing;
      r.deviations.push_back(dev);
      if (dev > cfg.spacing_rel_tol) r.flagged.push_back(i);
    }
  }
  return r;
}

namespace {

using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint>;
using BgMulti = bg::model::multi_polygon<BgPolygon>;

double snap(double v) { return std::round(v * 1e6) / 1e6; }

BgPolygon to_bg(std::span<const Point2> pts) {
  BgPolygon poly;
  for (const auto& p : pts) bg::append(poly.outer(), BgPoint(snap(p.x), snap(p.y)));
  bg::correct(poly);
  return poly;
}

}  // namespace

Coverage coverage_of_polygons(std::span<const std::pair<ClassLabel, std::vector<Point2>>> polygons, Size2 wall) {
  Coverage cov{};
  const double wall_area = wall.width * wall.height;
  if (!(wall_area > 0.0)) return cov;
  const std::array<Point2, 4> rect{Point2{0, 0}, {wall.width, 0}, {wall.width, wall.height}, {0, wall.height}};
  const BgPolygon wall_poly = to_bg(rect);
  for (ClassLabel label : kAllLabels) {
    BgMulti acc;
    for (const auto& [l, pts] : polygons) {
      if (l != label || pts.size() < 3) continue;
      bool finite = true;
      for (const auto& p : pts) finite = finite && std::isfinite(p.x) && std::isfinite(p.y);
      if (!finite) continue;
      try {
        BgMulti clipped;
        bg::intersection(to_bg(pts), wall_poly, clipped);
        BgMulti merged;
        bg::union_(acc, clipped, merged);
        acc = std::move(merged);
      } catch (const std::exception&) {
        // Invalid input geometry contributes nothing.
      }
    }
    const double a = bg::area(acc) / wall_area;
    cov[static_cast<std::size_t>(label)] = std::clamp(a, 0.0, 1.0);
  }
  return cov;
}

Coverage coverage_by_class(const RectifiedSegment& seg) {
  std::vector<std::pair<ClassLabel, std::vector<Point2>>> polys;
  for (const auto& q : seg.rectified_quads) polys.emplace_back(q.label, std::vector<Point2>(q.corners.begin(), q.corners.end()));
  return coverage_of_polygons(polys, seg.wall_size);
}

Stage estimate_stage(const Coverage& coverage, int frame_count, const StageThresholds& t) {
  const double drywall = coverage_of(coverage, ClassLabel::DrywallPanel);
  const double wood = coverage_of(coverage, ClassLabel::WoodPanel);
  if (drywall >= t.closed_drywall) return Stage::Closed;
  if (drywall + wood >= t.paneled) return Stage::Paneled;
  if (coverage_of(coverage, ClassLabel::Insulation) >= t.insulated) return Stage::Insulated;
  if (frame_count >= t.skeleton_frames) return Stage::Skeleton;
  return Stage::Empty;
}

QualityReport assess_segment(const RectifiedSegment& seg, const QualityConfig& cfg) {
  QualityReport r;
  r.segment_id = seg.segment_id;
  r.frames = frame_orientations(seg);
  for (const auto& f : r.frames) {
    if (f.ambiguous_axis) r.warnings.push_back("frame " + std::to_string(f.id) + " has no dominant axis");
  }
  r.tilt_violations = tilt_check(r.frames, cfg);
  try {
    r.spacing = spacing_check(r.frames, cfg);
  } catch (const Error& e) {
    r.warnings.push_back(std::string("spacing omitted: ") + e.what());
  }
  r.coverage = coverage_by_class(seg);
  r.stage = estimate_stage(r.coverage, static_cast<int>(r.frames.size()), cfg.stage_thresholds);
  return r;
}

}  // namespace drywall
