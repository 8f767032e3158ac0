#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "drywall/error.hpp"

namespace drywall {

// Points closer than this are treated as coincident.
inline constexpr double kMinSegmentLength = 2.0;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

double distance(Point2 a, Point2 b);
double dot(Point2 a, Point2 b);
double cross(Point2 a, Point2 b);
Point2 midpoint(Point2 a, Point2 b);

// Homogeneous point, scaled so that max(|u|, |v|, |w|) == 1. w == 0 is a
// direction (point at infinity).
struct HomogPoint {
  double u = 0.0;
  double v = 0.0;
  double w = 1.0;

  static HomogPoint from(Point2 p);
  static HomogPoint normalized(double u, double v, double w);

  bool is_ideal(double eps = 1e-12) const;
  // Finite point; throws PointAtInfinity for ideal points.
  Point2 to_point() const;
  // Unit direction of an ideal point (or of the ray towards a finite one).
  Point2 direction() const;

  friend bool operator==(const HomogPoint&, const HomogPoint&) = default;
};

// a*x + b*y + c = 0 with a^2 + b^2 == 1.
struct HomogLine {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;

  static HomogLine from_coefficients(double a, double b, double c);

  double signed_distance(Point2 p) const { return a * p.x + b * p.y + c; }
  double distance(Point2 p) const;
  // Unit direction along the line, (b, -a).
  Point2 direction() const { return {b, -a}; }
  // Undirected angle to the x-axis in degrees, in [0, 180).
  double angle_deg() const;

  friend bool operator==(const HomogLine&, const HomogLine&) = default;
};

struct LineSegment2 {
  Point2 p0;
  Point2 p1;

  double length() const { return distance(p0, p1); }
  Point2 mid() const { return midpoint(p0, p1); }

  friend bool operator==(const LineSegment2&, const LineSegment2&) = default;
};

class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) { normalize(); }
  // Normalizes and validates; throws DegenerateConfiguration when singular.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography from_row_major(std::span<const double, 9> values);

  const Eigen::Matrix3d& matrix() const { return m_; }
  std::array<double, 9> row_major() const;

  Homography inverse() const;
  // (this * other)(p) == this(other(p)).
  Homography operator*(const Homography& other) const;

  // Projective row scaled so that m(2,2) == 1, when m(2,2) is non-zero.
  Eigen::Matrix3d scaled_to_unit_corner() const;

  friend bool operator==(const Homography& a, const Homography& b) { return a.m_ == b.m_; }

 private:
  void normalize();
  Eigen::Matrix3d m_;
};

struct RansacConfig {
  double inlier_threshold = 1.0;
  int max_iterations = 256;
  int min_inliers = 2;
  std::uint64_t seed = 0;

  // Throws InvalidArgument when an invariant is broken. `minimal_sample` is
  // the model's minimal sample size.
  void validate(int minimal_sample) const;
};

struct LineFit {
  HomogLine line;
  double max_residual = 0.0;
  double sse = 0.0;
};

struct RansacLineResult {
  HomogLine line;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

HomogLine line_through(Point2 p, Point2 q);
HomogPoint intersect(const HomogLine& l1, const HomogLine& l2);
LineFit fit_line_tls(std::span<const Point2> points);
RansacLineResult ransac_line(std::span<const Point2> points, const RansacConfig& cfg);
Homography homography_dlt(std::span<const Point2> src, std::span<const Point2> dst);
Point2 apply_homography(const Homography& h, Point2 p);

// Polygon helpers shared by several modules.
double signed_area(std::span<const Point2> polygon);
bool is_convex(std::span<const Point2> polygon);
bool is_simple(std::span<const Point2> polygon);
Point2 polygon_centroid(std::span<const Point2> polygon);

}  // namespace drywall
