#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drywall/geom.hpp"

namespace drywall {

enum class ClassLabel { WoodPanel, Insulation, DrywallPanel, MetalFrame };

inline constexpr std::array<ClassLabel, 4> kAllLabels = {
    ClassLabel::WoodPanel, ClassLabel::Insulation, ClassLabel::DrywallPanel, ClassLabel::MetalFrame};

std::string_view to_string(ClassLabel label);
// Returns nullopt for anything outside the closed label set.
std::optional<ClassLabel> parse_label(std::string_view text);

struct RawDetection {
  std::int64_t id = 0;
  ClassLabel label = ClassLabel::WoodPanel;
  double confidence = 1.0;
  std::vector<Point2> outline;

  friend bool operator==(const RawDetection&, const RawDetection&) = default;
};

enum class EdgeOrientation { Horizontal, Vertical };

// Corners run top-left, top-right, bottom-right, bottom-left, which is a
// positive shoelace area in y-down image coordinates. Edge k joins corner k
// to corner k+1, so edges 0/2 are top/bottom and 1/3 are right/left.
struct RefinedQuad {
  std::int64_t id = 0;
  ClassLabel label = ClassLabel::WoodPanel;
  std::array<Point2, 4> corners{};
  std::array<EdgeOrientation, 4> edge_class{EdgeOrientation::Horizontal, EdgeOrientation::Vertical,
                                            EdgeOrientation::Horizontal, EdgeOrientation::Vertical};
  // Set when group refinement produced an invalid quad and the pre-group
  // geometry was kept.
  bool unrefined = false;

  LineSegment2 edge(int k) const { return {corners[k & 3], corners[(k + 1) & 3]}; }
  double area() const;

  friend bool operator==(const RefinedQuad&, const RefinedQuad&) = default;
};

struct EdgeRef {
  std::int64_t quad_id = 0;
  int edge = 0;

  friend auto operator<=>(const EdgeRef&, const EdgeRef&) = default;
};

struct EdgeGroup {
  std::vector<EdgeRef> members;
  EdgeOrientation orientation = EdgeOrientation::Horizontal;
  HomogLine fitted_line;
};

struct RefineConfig {
  double residual_tol = 1.5;   // corner accretion, pixels
  double angle_tol = 2.0;      // edge grouping, degrees
  double dist_tol = 3.0;       // edge grouping, pixels
  RansacConfig side_ransac{1.0, 256, 2, 0};
  RansacConfig group_ransac{1.5, 256, 2, 0};
};

struct RefineFailure {
  std::int64_t id = 0;
  ErrorCode code = ErrorCode::NotQuadrilateral;
  std::string message;
};

struct GroupRefinement {
  std::vector<RefinedQuad> quads;
  std::vector<EdgeGroup> groups;
  std::vector<std::string> warnings;
};

struct RefineResult {
  std::vector<RefinedQuad> quads;
  std::vector<EdgeGroup> groups;
  std::vector<RefineFailure> failures;
  std::vector<std::string> warnings;
};

// Indices of the four corner vertices in ascending outline order.
std::array<std::size_t, 4> find_corner_candidates(std::span<const Point2> outline, double residual_tol);

RefinedQuad fit_quad(std::span<const Point2> outline, const std::array<std::size_t, 4>& corner_indices,
                     const RansacConfig& cfg);

// Per-edge classes for corners[k] -> corners[k+1].
std::array<EdgeOrientation, 4> classify_edges(const std::array<Point2, 4>& corners);

// Orders four convex corners as top-left, top-right, bottom-right,
// bottom-left. Throws NonConvexResult if they do not form a convex quad.
RefinedQuad make_quad(std::int64_t id, ClassLabel label, const std::array<Point2, 4>& corners);

std::vector<EdgeGroup> group_aligned_edges(std::span<const RefinedQuad> quads, double angle_tol,
                                           double dist_tol);

GroupRefinement refine_groups(std::span<const RefinedQuad> quads, std::span<const EdgeGroup> groups,
                              const RansacConfig& cfg);

// Whole-module driver: simplify every detection, then group-refine the
// survivors. Detections that cannot become quads are reported as failures.
RefineResult refine_detections(std::span<const RawDetection> detections, const RefineConfig& cfg);

}  // namespace drywall
