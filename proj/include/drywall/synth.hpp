#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "drywall/geom.hpp"
#include "drywall/rectify.hpp"
#include "drywall/refine.hpp"

namespace drywall {

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  std::array<Point2, 4> corners() const { return {Point2{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Slot fill weights; together with `empty` they must sum to 1.
struct FillWeights {
  double wood_panel = 0.15;
  double insulation = 0.45;
  double drywall_panel = 0.15;
  double metal_frame = 0.0;
  double empty = 0.25;
};

struct StudTilt {
  std::size_t stud_index = 0;
  double degrees = 0.0;  // positive leans the top to the right

  friend bool operator==(const StudTilt&, const StudTilt&) = default;
};

struct LayoutParams {
  double wall_width = 2600.0;
  double wall_height = 2500.0;
  double spacing_min = 550.0;  // stud left edge to next stud left edge
  double spacing_max = 700.0;
  double stud_width = 60.0;
  FillWeights fill;
  double fill_scale_min = 0.7;  // fill side length as a fraction of its slot
  double fill_scale_max = 1.0;
  int rows_min = 1;
  int rows_max = 3;
  std::vector<StudTilt> tilted_studs;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SlotFill {
  Rect slot;
  Rect rect;
  ClassLabel label = ClassLabel::Insulation;

  friend bool operator==(const SlotFill&, const SlotFill&) = default;
};

struct WallLayout {
  double width = 0.0;
  double height = 0.0;
  std::vector<Rect> studs;
  std::vector<SlotFill> fills;
  std::vector<StudTilt> injected_defects;

  friend bool operator==(const WallLayout&, const WallLayout&) = default;
};

// One element of a layout in wall coordinates, defects applied.
struct LayoutElement {
  ClassLabel label = ClassLabel::MetalFrame;
  std::array<Point2, 4> corners{};
  double tilt_deg = 0.0;
};

struct CameraSpec {
  double yaw_deg = 0.0;  // wall rotation about its vertical axis
  double focal_length = 800.0;
  Point2 principal_point{400.0, 300.0};
  double distance = 4500.0;  // depth of the wall anchor, wall units
  Size2 image_size{800.0, 600.0};
  double roll_deg = 0.0;
  double lateral_offset = 0.0;  // image x offset of the anchor from the principal point, pixels

  void validate() const;
};

// For one wall the anchor is the wall's centre; for two walls it is the
// shared vertical joint (right edge of the first, left edge of the second).
struct WallPlacement {
  WallLayout layout;
  CameraSpec camera;
};

struct SceneTruth {
  struct Wall {
    Homography h_true;  // wall -> image
    HomogPoint vp;
    std::array<Point2, 4> corners_image{};
    Size2 size;
    double yaw_deg = 0.0;
  };
  struct Element {
    std::int64_t id = 0;
    ClassLabel label = ClassLabel::MetalFrame;
    int wall = 0;
    std::array<Point2, 4> image_quad{};
    std::array<Point2, 4> wall_quad{};
    double axis_angle = 0.0;
  };
  Size2 image_size;
  std::vector<Wall> walls;
  std::vector<Element> elements;
};

struct DegradeParams {
  double vertex_jitter_sigma = 0.5;
  int densify_per_edge = 12;
  double dropout_probability = 0.0;
  double outlier_fraction = 0.0;  // vertices pushed off their edge
  double outlier_offset = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

WallLayout generate_layout(const LayoutParams& p);
std::vector<LayoutElement> layout_elements(const WallLayout& layout);

SceneTruth project_scene(std::span<const WallPlacement> walls);

// Sets every placement's distance so the scene fills the image with the given pixel margin.
void frame_scene(std::span<WallPlacement> walls, double margin);

std::vector<RawDetection> degrade(const SceneTruth& truth, const DegradeParams& d);

// Resamples each edge of a quad into `per_edge` vertices starting at its corner.
std::vector<Point2> densify_quad(const std::array<Point2, 4>& quad, int per_edge);

// Two walls at +25/-25 degrees, four studs each at 625 spacing, 63% insulation,
// the third stud of the first wall tilted 2 degrees, seed 7.
std::vector<WallPlacement> standard_benchmark_placements();
SceneTruth standard_benchmark_scene();
DegradeParams standard_benchmark_degrade();

// Randomised two-wall corner scene for the clustering/rectification oracles.
std::vector<WallPlacement> random_corner_placements(std::uint64_t seed);

}  // namespace drywall
