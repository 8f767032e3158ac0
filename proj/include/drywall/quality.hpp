#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drywall/rectify.hpp"
#include "drywall/refine.hpp"

namespace drywall {

enum class Stage { Empty, Skeleton, Insulated, Paneled, Closed };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

// Rule ladder thresholds, checked top to bottom.
struct StageThresholds {
  double closed_drywall = 0.9;
  double paneled = 0.5;  // drywall + wood panel coverage
  double insulated = 0.5;
  int skeleton_frames = 2;

  friend bool operator==(const StageThresholds&, const StageThresholds&) = default;
};

struct QualityConfig {
  double tilt_threshold = 1.0;  // degrees
  double spacing_cv_threshold = 0.05;
  std::optional<double> expected_spacing;  // wall units
  double spacing_rel_tol = 0.05;
  StageThresholds stage_thresholds;

  void validate() const;
};

struct FrameMeasure {
  std::int64_t id = 0;
  double axis_angle = 0.0;  // degrees from wall vertical, positive when the top leans right
  double center_x = 0.0;
  double length = 0.0;
  bool ambiguous_axis = false;

  friend bool operator==(const FrameMeasure&, const FrameMeasure&) = default;
};

struct TiltViolation {
  std::int64_t id = 0;
  double angle = 0.0;

  friend bool operator==(const TiltViolation&, const TiltViolation&) = default;
};

struct SpacingReport {
  std::vector<double> gaps;
  double coefficient_of_variation = 0.0;
  std::vector<double> deviations;    // relative to expected spacing, when configured
  std::vector<std::size_t> flagged;  // gap indices beyond spacing_rel_tol
  bool non_uniform = false;

  friend bool operator==(const SpacingReport&, const SpacingReport&) = default;
};

using Coverage = std::array<double, 4>;  // indexed by ClassLabel

inline double coverage_of(const Coverage& c, ClassLabel l) { return c[static_cast<std::size_t>(l)]; }

struct QualityReport {
  int segment_id = 0;
  std::vector<FrameMeasure> frames;
  std::vector<TiltViolation> tilt_violations;
  std::optional<SpacingReport> spacing;
  Coverage coverage{};
  Stage stage = Stage::Empty;
  std::vector<std::string> warnings;

  friend bool operator==(const QualityReport&, const QualityReport&) = default;
};

std::vector<FrameMeasure> frame_orientations(const RectifiedSegment& seg);
std::vector<TiltViolation> tilt_check(std::span<const FrameMeasure> measures, const QualityConfig& cfg);
SpacingReport spacing_check(std::span<const FrameMeasure> measures, const QualityConfig& cfg);

// Union area of each class's quads, clipped to the wall, over the wall area.
Coverage coverage_by_class(const RectifiedSegment& seg);
// Same computation for bare polygons inside a width x height rectangle.
Coverage coverage_of_polygons(std::span<const std::pair<ClassLabel, std::vector<Point2>>> polygons, Size2 wall);

Stage estimate_stage(const Coverage& coverage, int frame_count, const StageThresholds& thresholds = {});

QualityReport assess_segment(const RectifiedSegment& seg, const QualityConfig& cfg);

}  // namespace drywall
