#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "drywall/cluster.hpp"
#include "drywall/geom.hpp"
#include "drywall/refine.hpp"

namespace drywall {

struct Size2 {
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const Size2&, const Size2&) = default;
};

struct RectifiedSegment {
  int segment_id = 0;
  std::array<Point2, 4> wall_corners_image{};
  Homography h_wall;  // image -> wall coordinates
  Size2 wall_size;
  std::vector<RefinedQuad> rectified_quads;
  std::vector<std::string> warnings;
};

struct ConsensusResult {
  std::array<Point2, 4> corners{};
  // Corners that fell back to the geometric median.
  std::array<bool, 4> fallback{};
};

struct RectifyConfig {
  RansacConfig consensus{5.0, 256, 2, 0};
};

// Maps the quad onto an origin-anchored rectangle sized by its mean
// opposite-edge lengths.
Homography element_homography(const RefinedQuad& quad);

std::array<Point2, 4> propose_wall_corners(std::span<const RefinedQuad> members, const RefinedQuad& via_quad);

ConsensusResult consensus_corners(std::span<const std::array<Point2, 4>> proposals, const RansacConfig& cfg);

RectifiedSegment rectify_segment(int segment_id, std::span<const RefinedQuad> members,
                                 const std::array<Point2, 4>& corners);

// All-element proposals, consensus, then the wall homography.
RectifiedSegment rectify_cluster(const WallSegmentCluster& segment, std::span<const RefinedQuad> quads,
                                 const RectifyConfig& cfg);

Point2 geometric_median(std::span<const Point2> points);

}  // namespace drywall
