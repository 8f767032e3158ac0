#include "drywall/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "drywall/rng.hpp"

namespace drywall {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }
double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
Point2 midpoint(Point2 a, Point2 b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

// ---------------------------------------------------------------------------
// HomogPoint / HomogLine

HomogPoint HomogPoint::from(Point2 p) { return normalized(p.x, p.y, 1.0); }

HomogPoint HomogPoint::normalized(double u, double v, double w) {
  const double scale = std::max({std::abs(u), std::abs(v), std::abs(w)});
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::DegenerateInput, "homogeneous point with all-zero coordinates");
  }
  u /= scale;
  v /= scale;
  w /= scale;
  // Canonical sign: w > 0 for finite points, otherwise first non-zero of (u, v) positive.
  double sign_ref = w != 0.0 ? w : (u != 0.0 ? u : v);
  if (sign_ref < 0.0) {
    u = -u;
    v = -v;
    w = -w;
  }
  return {u + 0.0, v + 0.0, w + 0.0};
}

bool HomogPoint::is_ideal(double eps) const { return std::abs(w) <= eps; }

Point2 HomogPoint::to_point() const {
  if (is_ideal()) throw Error(ErrorCode::PointAtInfinity, "cannot dehomogenize an ideal point");
  return {u / w, v / w};
}

Point2 HomogPoint::direction() const {
  const double n = std::hypot(u, v);
  if (n == 0.0) return {0.0, 0.0};
  return {u / n, v / n};
}

HomogLine HomogLine::from_coefficients(double a, double b, double c) {
  const double n = std::hypot(a, b);
  if (!(n > 0.0) || !std::isfinite(n) || !std::isfinite(c)) {
    throw Error(ErrorCode::DegenerateInput, "line with zero normal");
  }
  a /= n;
  b /= n;
  c /= n;
  if (a < 0.0 || (a == 0.0 && b < 0.0)) {
    a = -a;
    b = -b;
    c = -c;
  }
  return {a + 0.0, b + 0.0, c + 0.0};
}

double HomogLine::distance(Point2 p) const { return std::abs(signed_distance(p)); }

double HomogLine::angle_deg() const {
  double deg = std::atan2(-a, b) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  return deg;
}

// ---------------------------------------------------------------------------
// Homography

Homography::Homography(const Eigen::Matrix3d& m) : m_(m) {
  if (!m_.allFinite()) throw Error(ErrorCode::DegenerateConfiguration, "non-finite homography");
  normalize();
}

void Homography::normalize() {
  const double n = m_.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "zero homography");
  // Already-normalized input (e.g. deserialized) is kept bit-exact.
  if (std::abs(n - 1.0) > 1e-15) m_ /= n;
  double sign_ref = m_(2, 2);
  if (std::abs(sign_ref) <= 1e-15) {
    sign_ref = 0.0;
    for (int i = 0; i < 9 && sign_ref == 0.0; ++i) {
      if (std::abs(m_(i / 3, i % 3)) > 1e-15) sign_ref = m_(i / 3, i % 3);
    }
  }
  if (sign_ref < 0.0) m_ = -m_;
  if (std::abs(m_.determinant()) <= 1e-12) {
    throw Error(ErrorCode::DegenerateConfiguration, "homography is not invertible");
  }
}

Homography Homography::from_row_major(std::span<const double, 9> values) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = values[static_cast<std::size_t>(i)];
  return Homography(m);
}

std::array<double, 9> Homography::row_major() const {
  std::array<double, 9> out{};
  for (int i = 0; i < 9; ++i) out[static_cast<std::size_t>(i)] = m_(i / 3, i % 3);
  return out;
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Homography Homography::operator*(const Homography& other) const {
  return Homography(m_ * other.m_);
}

Eigen::Matrix3d Homography::scaled_to_unit_corner() const {
  if (std::abs(m_(2, 2)) <= 1e-15) return m_;
  return m_ / m_(2, 2);
}

// ---------------------------------------------------------------------------
// RANSAC configuration

void RansacConfig::validate(int minimal_sample) const {
  if (!(inlier_threshold > 0.0) || !std::isfinite(inlier_threshold)) {
    throw Error(ErrorCode::InvalidArgument, "ransac inlier_threshold must be > 0");
  }
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "ransac max_iterations must be >= 1");
  if (min_inliers < minimal_sample) {
    throw Error(ErrorCode::InvalidArgument, "ransac min_inliers below minimal sample size");
  }
}

// ---------------------------------------------------------------------------
// Lines

HomogLine line_through(Point2 p, Point2 q) {
  if (distance(p, q) <= kMinSegmentLength) {
    throw Error(ErrorCode::DegenerateInput, "points closer than the minimum segment length");
  }
  // (p, 1) x (q, 1)
  return HomogLine::from_coefficients(p.y - q.y, q.x - p.x, p.x * q.y - q.x * p.y);
}

HomogPoint intersect(const HomogLine& l1, const HomogLine& l2) {
  const double u = l1.b * l2.c - l1.c * l2.b;
  const double v = l1.c * l2.a - l1.a * l2.c;
  double w = l1.a * l2.b - l1.b * l2.a;
  const double scale = std::max({1.0, std::abs(l1.c), std::abs(l2.c)});
  if (std::abs(w) <= 1e-12 && std::hypot(u, v) <= 1e-12 * scale) {
    throw Error(ErrorCode::IdenticalLines, "lines coincide");
  }
  if (std::abs(w) <= 1e-12) w = 0.0;
  return HomogPoint::normalized(u, v, w);
}

LineFit fit_line_tls(std::span<const Point2> points) {
  if (points.size() < 2) throw Error(ErrorCode::DegenerateInput, "line fit needs at least 2 points");
  const double n = static_cast<double>(points.size());
  Point2 c{};
  for (const auto& p : points) c = c + p;
  c = (1.0 / n) * c;
  double sxx = 0.0, syy = 0.0, sxy = 0.0, spread = 0.0;
  for (const auto& p : points) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    spread = std::max(spread, std::hypot(dx, dy));
  }
  if (spread <= 1e-9) throw Error(ErrorCode::DegenerateInput, "all points coincide");
  // Major axis of the second-moment matrix; the normal is perpendicular to it.
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double nx = -std::sin(theta);
  const double ny = std::cos(theta);
  LineFit fit;
  fit.line = HomogLine::from_coefficients(nx, ny, -(nx * c.x + ny * c.y));
  for (const auto& p : points) {
    const double r = fit.line.distance(p);
    fit.max_residual = std::max(fit.max_residual, r);
    fit.sse += r * r;
  }
  return fit;
}

namespace {

struct Hypothesis {
  std::size_t count = 0;
  double cost = std::numeric_limits<double>::infinity();
};

Hypothesis score_line(const HomogLine& line, std::span<const Point2> points, double thr) {
  Hypothesis h;
  h.cost = 0.0;
  for (const auto& p : points) {
    const double r = line.distance(p);
    if (r <= thr) {
      ++h.count;
      h.cost += r * r;
    } else {
      h.cost += thr * thr;
    }
  }
  return h;
}

bool better(const Hypothesis& a, const Hypothesis& b) {
  return a.count > b.count || (a.count == b.count && a.cost < b.cost);
}

std::vector<bool> inlier_mask(const HomogLine& line, std::span<const Point2> points, double thr,
                              std::size_t& count) {
  std::vector<bool> mask(points.size(), false);
  count = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (line.distance(points[i]) <= thr) {
      mask[i] = true;
      ++count;
    }
  }
  return mask;
}

}  // namespace

RansacLineResult ransac_line(std::span<const Point2> points, const RansacConfig& cfg) {
  cfg.validate(2);
  const std::size_t n = points.size();
  if (n < 2) throw Error(ErrorCode::DegenerateInput, "ransac_line needs at least 2 points");

  std::optional<HomogLine> best_line;
  Hypothesis best;
  auto consider = [&](std::size_t i, std::size_t j) {
    if (distance(points[i], points[j]) <= kMinSegmentLength) return;
    const HomogLine line = line_through(points[i], points[j]);
    const Hypothesis h = score_line(line, points, cfg.inlier_threshold);
    if (!best_line || better(h, best)) {
      best = h;
      best_line = line;
    }
  };

  const std::size_t pairs = n * (n - 1) / 2;
  if (pairs <= static_cast<std::size_t>(cfg.max_iterations)) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) consider(i, j);
    }
  } else {
    CounterRng rng(cfg.seed);
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const std::size_t i = rng.below(n);
      std::size_t j = rng.below(n - 1);
      if (j >= i) ++j;
      consider(std::min(i, j), std::max(i, j));
    }
  }
  if (!best_line) throw Error(ErrorCode::DegenerateInput, "no point pair spans the minimum segment length");

  RansacLineResult result;
  result.line = *best_line;
  result.inliers = inlier_mask(result.line, points, cfg.inlier_threshold, result.inlier_count);

  // Refit on the consensus set until it stops changing.
  for (int round = 0; round < 16; ++round) {
    std::vector<Point2> support;
    support.reserve(result.inlier_count);
    for (std::size_t i = 0; i < n; ++i) {
      if (result.inliers[i]) support.push_back(points[i]);
    }
    if (support.size() < 2) break;
    HomogLine refit;
    try {
      refit = fit_line_tls(support).line;
    } catch (const Error&) {
      break;
    }
    std::size_t count = 0;
    auto mask = inlier_mask(refit, points, cfg.inlier_threshold, count);
    if (count < result.inlier_count) break;
    const bool stable = mask == result.inliers;
    result.line = refit;
    result.inliers = std::move(mask);
    result.inlier_count = count;
    if (stable) break;
  }

  if (result.inlier_count < static_cast<std::size_t>(cfg.min_inliers)) {
    throw Error(ErrorCode::NoConsensus, "best line has " + std::to_string(result.inlier_count) +
                                            " inliers, need " + std::to_string(cfg.min_inliers));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Homographies

namespace {

Eigen::Matrix3d hartley_normalizer(std::span<const Point2> pts) {
  Point2 c{};
  for (const auto& p : pts) c = c + p;
  c = (1.0 / static_cast<double>(pts.size())) * c;
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += distance(p, c);
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 1e-12)) throw Error(ErrorCode::DegenerateConfiguration, "points coincide");
  const double s = std::numbers::sqrt2 / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x, 0, s, -s * c.y, 0, 0, 1;
  return t;
}

bool has_collinear_triple(std::span<const Point2> pts) {
  double scale = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) scale = std::max(scale, distance(pts[i], pts[j]));
  }
  if (scale <= 0.0) return true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const double area2 = std::abs(cross(pts[j] - pts[i], pts[k] - pts[i]));
        if (area2 <= 1e-9 * scale * scale) return true;
      }
    }
  }
  return false;
}

}  // namespace

Homography homography_dlt(std::span<const Point2> src, std::span<const Point2> dst) {
  if (src.size() != dst.size()) throw Error(ErrorCode::InvalidArgument, "correspondence count mismatch");
  if (src.size() < 4) throw Error(ErrorCode::InvalidArgument, "homography needs at least 4 correspondences");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!std::isfinite(src[i].x) || !std::isfinite(src[i].y) || !std::isfinite(dst[i].x) ||
        !std::isfinite(dst[i].y)) {
      throw Error(ErrorCode::DegenerateConfiguration, "non-finite correspondence");
    }
  }
  if (src.size() == 4 && (has_collinear_triple(src) || has_collinear_triple(dst))) {
    throw Error(ErrorCode::DegenerateConfiguration, "three of four points are collinear");
  }

  const Eigen::Matrix3d ts = hartley_normalizer(src);
  const Eigen::Matrix3d td = hartley_normalizer(dst);
  const Eigen::Index n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = src[static_cast<std::size_t>(i)];
    const auto& q = dst[static_cast<std::size_t>(i)];
    const Eigen::Vector3d s = ts * Eigen::Vector3d(p.x, p.y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(q.x, q.y, 1.0);
    const double x = s.x() / s.z(), y = s.y() / s.z();
    const double u = d.x() / d.z(), v = d.y() / d.z();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 8 || !(sv(7) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::DegenerateConfiguration, "design matrix is rank deficient");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d m = td.inverse() * hn * ts;
  return Homography(m);
}

Point2 apply_homography(const Homography& h, Point2 p) {
  const Eigen::Vector3d r = h.matrix() * Eigen::Vector3d(p.x, p.y, 1.0);
  if (std::abs(r.z()) <= 1e-12) throw Error(ErrorCode::PointAtInfinity, "point maps to infinity");
  return {r.x() / r.z(), r.y() / r.z()};
}

// ---------------------------------------------------------------------------
// Polygons

double signed_area(std::span<const Point2> polygon) {
  double acc = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) acc += cross(polygon[i], polygon[(i + 1) % n]);
  return 0.5 * acc;
}

bool is_convex(std::span<const Point2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  int sign = 0;
  double turning = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 e0 = polygon[(i + 1) % n] - polygon[i];
    const Point2 e1 = polygon[(i + 2) % n] - polygon[(i + 1) % n];
    const double c = cross(e0, e1);
    if (c == 0.0 || !std::isfinite(c)) return false;
    const int s = c > 0.0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
    turning += std::atan2(c, dot(e0, e1));
  }
  return std::abs(std::abs(turning) - 2.0 * std::numbers::pi) < 1e-6;
}

namespace {

int orient(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point2 a, Point2 b, Point2 c, Point2 d) {
  const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace

bool is_simple(std::span<const Point2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (const auto& p : polygon) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (polygon[i] == polygon[(i + 1) % n]) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = polygon[i], b = polygon[(i + 1) % n];
    // Adjacent edge folding back onto this one.
    const Point2 c = polygon[(i + 2) % n];
    if (orient(a, b, c) == 0 && dot(b - a, c - b) < 0.0) return false;
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_touch(a, b, polygon[j], polygon[(j + 1) % n])) return false;
    }
  }
  return std::abs(signed_area(polygon)) > 0.0;
}

Point2 polygon_centroid(std::span<const Point2> polygon) {
  const double area = signed_area(polygon);
  const std::size_t n = polygon.size();
  if (std::abs(area) <= 1e-12) {
    Point2 c{};
    for (const auto& p : polygon) c = c + p;
    return (1.0 / static_cast<double>(std::max<std::size_t>(n, 1))) * c;
  }
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = polygon[i], q = polygon[(i + 1) % n];
    const double f = cross(p, q);
    cx += (p.x + q.x) * f;
    cy += (p.y + q.y) * f;
  }
  return {cx / (6.0 * area), cy / (6.0 * area)};
}

}  // namespace drywall
