#include "drywall/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "drywall/rng.hpp"

namespace drywall {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

void LayoutParams::validate() const {
  if (!(wall_width > 0.0) || !(wall_height > 0.0) || !(stud_width > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "wall and stud dimensions must be > 0");
  }
  if (!(spacing_min > 0.0) || spacing_min > spacing_max) {
    throw Error(ErrorCode::InvalidArgument, "stud spacing range must satisfy 0 < min <= max");
  }
  const double weights[] = {fill.wood_panel, fill.insulation, fill.drywall_panel, fill.metal_frame, fill.empty};
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error(ErrorCode::InvalidArgument, "fill weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "fill weights must sum to 1");
  if (!(fill_scale_min > 0.0) || fill_scale_min > fill_scale_max || fill_scale_max > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "fill scale range must lie in (0, 1]");
  }
  if (rows_min < 1 || rows_min > rows_max) throw Error(ErrorCode::InvalidArgument, "row range invalid");
}

void CameraSpec::validate() const {
  if (!(std::abs(yaw_deg) < 80.0)) throw Error(ErrorCode::InvalidArgument, "camera yaw must be within (-80, 80)");
  if (!(focal_length > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal length must be > 0");
  if (!(distance > 0.0)) throw Error(ErrorCode::InvalidArgument, "camera distance must be > 0");
  if (!(image_size.width > 0.0) || !(image_size.height > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "image size must be > 0");
  }
}

void DegradeParams::validate() const {
  if (!(vertex_jitter_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter sigma must be >= 0");
  if (densify_per_edge < 1) throw Error(ErrorCode::InvalidArgument, "densify_per_edge must be >= 1");
  if (!(dropout_probability >= 0.0 && dropout_probability < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dropout probability must lie in [0, 1)");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "outlier fraction must lie in [0, 1]");
  }
}

WallLayout generate_layout(const LayoutParams& p) {
  p.validate();
  if (p.wall_width < p.spacing_min + 2.0 * p.stud_width) {
    throw Error(ErrorCode::InfeasibleLayout, "wall too narrow for two studs at the minimum spacing");
  }
  CounterRng rng(p.seed);
  WallLayout layout;
  layout.width = p.wall_width;
  layout.height = p.wall_height;
  for (double x = 0.0; x + p.stud_width <= p.wall_width + 1e-9;) {
    layout.studs.push_back({x, 0.0, x + p.stud_width, p.wall_height});
    x += p.spacing_min == p.spacing_max ? p.spacing_min : rng.uniform(p.spacing_min, p.spacing_max);
  }
  // The wall ends at its last stud.
  layout.width = layout.studs.back().x1;

  const double weights[] = {p.fill.wood_panel, p.fill.insulation, p.fill.drywall_panel, p.fill.metal_frame};
  for (std::size_t s = 0; s + 1 < layout.studs.size(); ++s) {
    const double x0 = layout.studs[s].x1;
    const double x1 = layout.studs[s + 1].x0;
    if (x1 - x0 <= 0.0) continue;
    const int rows = p.rows_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.rows_max - p.rows_min + 1)));
    const double row_h = p.wall_height / rows;
    for (int r = 0; r < rows; ++r) {
      const Rect slot{x0, r * row_h, x1, (r + 1) * row_h};
      const double pick = rng.uniform01();
      const double scale = p.fill_scale_min == p.fill_scale_max ? p.fill_scale_min
                                                                : rng.uniform(p.fill_scale_min, p.fill_scale_max);
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        acc += weights[k];
        if (pick < acc) {
          const double w = scale * slot.width();
          const double h = scale * slot.height();
          const double cx = 0.5 * (slot.x0 + slot.x1);
          const double cy = 0.5 * (slot.y0 + slot.y1);
          layout.fills.push_back({slot, {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}, kAllLabels[k]});
          break;
        }
      }
    }
  }
  for (const auto& t : p.tilted_studs) {
    if (t.stud_index < layout.studs.size()) layout.injected_defects.push_back(t);
  }
  return layout;
}

std::vector<LayoutElement> layout_elements(const WallLayout& layout) {
  std::vector<LayoutElement> out;
  for (std::size_t i = 0; i < layout.studs.size(); ++i) {
    LayoutElement e;
    e.label = ClassLabel::MetalFrame;
    e.corners = layout.studs[i].corners();
    for (const auto& d : layout.injected_defects) {
      if (d.stud_index != i) continue;
      // Rotation about the centroid; in y-down coordinates a positive angle
      // moves the top edge to the right.
      const Point2 c{0.5 * (layout.studs[i].x0 + layout.studs[i].x1), 0.5 * (layout.studs[i].y0 + layout.studs[i].y1)};
      const double cs = std::cos(d.degrees * kDegToRad), sn = std::sin(d.degrees * kDegToRad);
      for (auto& p : e.corners) {
        const Point2 r = p - c;
        p = {c.x + cs * r.x - sn * r.y, c.y + sn * r.x + cs * r.y};
      }
      e.tilt_deg += d.degrees;
    }
    out.push_back(e);
  }
  for (const auto& f : layout.fills) out.push_back({f.label, f.rect.corners(), 0.0});
  return out;
}

namespace {

struct Pose {
  Eigen::Vector3d origin;  // 3D position of wall coordinate (0, 0)
  Eigen::Vector3d ex;      // 3D step per wall unit along x
  Eigen::Vector3d ey;      // 3D step per wall unit along y
};

std::vector<Pose> wall_poses(std::span<const WallPlacement> walls) {
  const auto& cam = walls.front().camera;
  const double d = cam.distance;
  const Eigen::Vector3d anchor(cam.lateral_offset * d / cam.focal_length, 0.0, d);
  auto ex_of = [](double yaw) { return Eigen::Vector3d(std::cos(yaw * kDegToRad), 0.0, std::sin(yaw * kDegToRad)); };
  const Eigen::Vector3d ey(0.0, 1.0, 0.0);
  std::vector<Pose> poses;
  if (walls.size() == 1) {
    const auto& l = walls[0].layout;
    const Eigen::Vector3d ex = ex_of(walls[0].camera.yaw_deg);
    poses.push_back({anchor - 0.5 * l.width * ex - 0.5 * l.height * ey, ex, ey});
  } else {
    const auto& la = walls[0].layout;
    const auto& lb = walls[1].layout;
    const Eigen::Vector3d exa = ex_of(walls[0].camera.yaw_deg);
    const Eigen::Vector3d exb = ex_of(walls[1].camera.yaw_deg);
    poses.push_back({anchor - la.width * exa - 0.5 * la.height * ey, exa, ey});
    poses.push_back({anchor - 0.5 * lb.height * ey, exb, ey});
  }
  return poses;
}

Eigen::Matrix3d intrinsics(const CameraSpec& cam) {
  const double r = cam.roll_deg * kDegToRad;
  Eigen::Matrix3d k;
  k << cam.focal_length, 0, cam.principal_point.x, 0, cam.focal_length, cam.principal_point.y, 0, 0, 1;
  Eigen::Matrix3d roll;
  roll << std::cos(r), -std::sin(r), 0, std::sin(r), std::cos(r), 0, 0, 0, 1;
  return k * roll;
}

void check_walls(std::span<const WallPlacement> walls) {
  if (walls.empty() || walls.size() > 2) throw Error(ErrorCode::InvalidArgument, "scenes hold one or two walls");
  for (const auto& w : walls) w.camera.validate();
  if (walls.size() == 2 && walls[0].camera.yaw_deg == walls[1].camera.yaw_deg) {
    throw Error(ErrorCode::InvalidArgument, "corner scenes need distinct wall yaws");
  }
}

}  // namespace

SceneTruth project_scene(std::span<const WallPlacement> walls) {
  check_walls(walls);
  const auto& cam = walls.front().camera;
  const Eigen::Matrix3d k = intrinsics(cam);
  const auto poses = wall_poses(walls);

  SceneTruth truth;
  truth.image_size = cam.image_size;
  std::int64_t next_id = 1;
  for (std::size_t w = 0; w < walls.size(); ++w) {
    const auto& layout = walls[w].layout;
    const Pose& pose = poses[w];
    for (const auto& c : Rect{0, 0, layout.width, layout.height}.corners()) {
      const Eigen::Vector3d p = pose.origin + c.x * pose.ex + c.y * pose.ey;
      if (!(p.z() > 1e-6)) throw Error(ErrorCode::BehindCamera, "wall corner lies behind the camera");
    }
    Eigen::Matrix3d m;
    m.col(0) = k * pose.ex;
    m.col(1) = k * pose.ey;
    m.col(2) = k * pose.origin;

    SceneTruth::Wall tw;
    tw.h_true = Homography(m);
    const Eigen::Vector3d vp = m.col(0);
    tw.vp = HomogPoint::normalized(vp.x(), vp.y(), std::abs(vp.z()) < 1e-12 * vp.norm() ? 0.0 : vp.z());
    const auto wc = Rect{0, 0, layout.width, layout.height}.corners();
    for (int i = 0; i < 4; ++i) tw.corners_image[i] = apply_homography(tw.h_true, wc[i]);
    tw.size = {layout.width, layout.height};
    tw.yaw_deg = walls[w].camera.yaw_deg;

    for (const auto& e : layout_elements(layout)) {
      SceneTruth::Element te;
      te.id = next_id++;
      te.label = e.label;
      te.wall = static_cast<int>(w);
      te.wall_quad = e.corners;
      for (int i = 0; i < 4; ++i) {
        const Eigen::Vector3d p = pose.origin + e.corners[i].x * pose.ex + e.corners[i].y * pose.ey;
        if (!(p.z() > 1e-6)) throw Error(ErrorCode::BehindCamera, "element corner lies behind the camera");
        te.image_quad[i] = apply_homography(tw.h_true, e.corners[i]);
      }
      te.axis_angle = e.tilt_deg;
      truth.elements.push_back(te);
    }
    truth.walls.push_back(std::move(tw));
  }
  return truth;
}

void frame_scene(std::span<WallPlacement> walls, double margin) {
  check_walls(walls);
  const auto fits = [&](double d) {
    for (auto& w : walls) w.camera.distance = d;
    try {
      const auto truth = project_scene(walls);
      for (const auto& wall : truth.walls) {
        for (const auto& c : wall.corners_image) {
          if (c.x < margin || c.y < margin || c.x > truth.image_size.width - margin ||
              c.y > truth.image_size.height - margin) {
            return false;
          }
        }
      }
      return true;
    } catch (const Error&) {
      return false;
    }
  };
  double hi = 1000.0;
  while (!fits(hi)) {
    hi *= 2.0;
    if (hi > 1e9) throw Error(ErrorCode::InvalidArgument, "scene cannot be framed in the image");
  }
  double lo = hi / 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fits(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  for (auto& w : walls) w.camera.distance = hi;
}

std::vector<Point2> densify_quad(const std::array<Point2, 4>& quad, int per_edge) {
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(4 * per_edge));
  for (int k = 0; k < 4; ++k) {
    const Point2 a = quad[k];
    const Point2 b = quad[(k + 1) & 3];
    for (int i = 0; i < per_edge; ++i) {
      const double t = static_cast<double>(i) / per_edge;
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

std::vector<RawDetection> degrade(const SceneTruth& truth, const DegradeParams& d) {
  d.validate();
  std::vector<RawDetection> out;
  for (const auto& e : truth.elements) {
    CounterRng rng(derive_seed(d.seed, static_cast<std::uint64_t>(e.id)));
    if (rng.uniform01() < d.dropout_probability) continue;
    const auto clean = densify_quad(e.image_quad, d.densify_per_edge);
    std::vector<Point2> outline;
    // Redraw the noise until the outline stays simple.
    for (int attempt = 0; attempt < 32; ++attempt) {
      outline = clean;
      for (std::size_t i = 0; i < outline.size(); ++i) {
        const double jx = rng.normal() * d.vertex_jitter_sigma;
        const double jy = rng.normal() * d.vertex_jitter_sigma;
        outline[i].x += jx;
        outline[i].y += jy;
        if (d.outlier_fraction > 0.0 && rng.uniform01() < d.outlier_fraction) {
          const std::size_t k = i / static_cast<std::size_t>(d.densify_per_edge);
          const Point2 dir = e.image_quad[(k + 1) & 3] - e.image_quad[k];
          const double len = std::hypot(dir.x, dir.y);
          const Point2 normal{-dir.y / len, dir.x / len};
          const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
          outline[i] = outline[i] + (sign * d.outlier_offset) * normal;
        }
      }
      if (d.vertex_jitter_sigma == 0.0 && d.outlier_fraction == 0.0) break;
      if (is_simple(outline)) break;
    }
    out.push_back({e.id, e.label, 1.0, std::move(outline)});
  }
  return out;
}

std::vector<WallPlacement> standard_benchmark_placements() {
  std::vector<WallPlacement> walls;
  for (int w = 0; w < 2; ++w) {
    LayoutParams p;
    p.wall_width = 1935.0;  // four 60-wide studs at 625 spacing
    p.wall_height = 2500.0;
    p.spacing_min = p.spacing_max = 625.0;
    p.stud_width = 60.0;
    p.fill = {0.0, 1.0, 0.0, 0.0, 0.0};
    const double slot_fraction = (p.wall_width - 4.0 * p.stud_width) / p.wall_width;
    p.fill_scale_min = p.fill_scale_max = std::sqrt(0.63 / slot_fraction);
    p.seed = derive_seed(7, static_cast<std::uint64_t>(w));
    if (w == 0) p.tilted_studs.push_back({2, 2.0});
    WallPlacement placement;
    placement.layout = generate_layout(p);
    placement.camera.yaw_deg = w == 0 ? 25.0 : -25.0;
    walls.push_back(std::move(placement));
  }
  frame_scene(walls, 20.0);
  return walls;
}

SceneTruth standard_benchmark_scene() { return project_scene(standard_benchmark_placements()); }

DegradeParams standard_benchmark_degrade() {
  DegradeParams d;
  d.vertex_jitter_sigma = 0.5;
  d.densify_per_edge = 12;
  d.seed = 7;
  return d;
}

std::vector<WallPlacement> random_corner_placements(std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, 0xC0));
  std::vector<WallPlacement> walls;
  for (int w = 0; w < 2; ++w) {
    for (int attempt = 0;; ++attempt) {
      LayoutParams p;
      p.wall_width = rng.uniform(1800.0, 2600.0);
      p.wall_height = 2500.0;
      p.spacing_min = 550.0;
      p.spacing_max = 700.0;
      p.seed = derive_seed(seed, static_cast<std::uint64_t>(16 * w + attempt));
      WallLayout layout = generate_layout(p);
      if (layout_elements(layout).size() >= 6 || attempt > 64) {
        WallPlacement placement;
        placement.layout = std::move(layout);
        const double yaw = rng.uniform(15.0, 40.0);
        placement.camera.yaw_deg = w == 0 ? yaw : -yaw;
        walls.push_back(std::move(placement));
        break;
      }
    }
  }
  const double offset = rng.uniform(-80.0, 80.0);
  for (auto& w : walls) w.camera.lateral_offset = offset;
  frame_scene(walls, 20.0);
  return walls;
}

}  // namespace drywall
