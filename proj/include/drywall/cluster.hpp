#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drywall/geom.hpp"
#include "drywall/refine.hpp"

namespace drywall {

// Residuals against a vanishing point are measured at the edge: the largest
// distance of an endpoint from the line joining the edge midpoint to the VP.
// This stays in pixels for finite and ideal VPs alike.
struct ClusterConfig {
  int n_columns = 4;
  double scatter_tol = 1.0;       // pixels, length-weighted RMS edge residual
  double min_width = 50.0;        // pixels
  double consistency_tol = 1.5;   // pixels
  double parallel_tol_deg = 0.1;  // bundle treated as parallel below this spread
  RansacConfig vp_ransac{1.0, 512, 2, 0};
};

struct ClusterEdge {
  EdgeRef ref;
  LineSegment2 seg;

  friend bool operator==(const ClusterEdge&, const ClusterEdge&) = default;
};

struct VanishingPoint {
  HomogPoint point;
  double scatter = 0.0;
  int support = 0;

  friend bool operator==(const VanishingPoint&, const VanishingPoint&) = default;
};

struct Column {
  double x_min = 0.0;
  double x_max = 0.0;
  std::vector<ClusterEdge> edges;
  std::optional<VanishingPoint> vp;
  bool unresolved = false;
};

struct WallSegmentCluster {
  int id = 0;
  std::vector<std::int64_t> members;
  VanishingPoint vp;
  double x_min = 0.0;
  double x_max = 0.0;

  friend bool operator==(const WallSegmentCluster&, const WallSegmentCluster&) = default;
};

struct Assignment {
  std::vector<WallSegmentCluster> segments;
  std::vector<std::int64_t> unassigned;
};

struct Clustering {
  std::vector<Column> columns;
  std::vector<WallSegmentCluster> segments;
  std::vector<std::int64_t> unassigned;
  std::vector<std::string> warnings;
};

double edge_vp_residual(const LineSegment2& edge, const HomogPoint& vp);
// Median of residuals weighted by edge length.
double weighted_median_residual(std::span<const ClusterEdge> edges, const HomogPoint& vp);

// Horizontal edges of every quad, ordered by (quad id, edge index).
std::vector<ClusterEdge> horizontal_edges(std::span<const RefinedQuad> quads);

std::vector<Column> partition_columns(std::span<const RefinedQuad> quads, double image_width, int n_columns);

VanishingPoint estimate_vp(std::span<const LineSegment2> edges, const RansacConfig& cfg,
                           double parallel_tol_deg = 0.1);

std::vector<Column> subdivide_if_scattered(const Column& col, double scatter_tol, double min_width,
                                           const ClusterConfig& cfg);

std::vector<WallSegmentCluster> merge_columns(std::span<const Column> cols, double consistency_tol,
                                              const ClusterConfig& cfg);

Assignment assign_elements(std::span<const RefinedQuad> quads, std::span<const WallSegmentCluster> segments,
                           double consistency_tol);

// partition -> per-column VP -> subdivision -> merge -> assignment.
Clustering cluster_quads(std::span<const RefinedQuad> quads, double image_width, const ClusterConfig& cfg);

}  // namespace drywall
