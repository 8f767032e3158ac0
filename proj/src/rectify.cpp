#include "drywall/rectify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "drywall/rng.hpp"

namespace drywall {

namespace {

Size2 mean_edge_size(const std::array<Point2, 4>& c) {
  return {0.5 * (distance(c[0], c[1]) + distance(c[3], c[2])), 0.5 * (distance(c[0], c[3]) + distance(c[1], c[2]))};
}

std::array<Point2, 4> rectangle(Size2 s) { return {Point2{0, 0}, {s.width, 0}, {s.width, s.height}, {0, s.height}}; }

}  // namespace

Homography element_homography(const RefinedQuad& quad) {
  const Size2 s = mean_edge_size(quad.corners);
  if (!(s.width > 0.0) || !(s.height > 0.0) || !(quad.area() > 1e-9)) {
    throw Error(ErrorCode::DegenerateConfiguration, "quad " + std::to_string(quad.id) + " has no area");
  }
  return homography_dlt(quad.corners, rectangle(s));
}

std::array<Point2, 4> propose_wall_corners(std::span<const RefinedQuad> members, const RefinedQuad& via_quad) {
  const Homography h = element_homography(via_quad);
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (const auto& q : members) {
    for (const auto& c : q.corners) {
      const Point2 p = apply_homography(h, c);
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  }
  if (members.empty()) {
    for (const auto& c : via_quad.corners) {
      const Point2 p = apply_homography(h, c);
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  }
  const Homography inv = h.inverse();
  return {apply_homography(inv, {x0, y0}), apply_homography(inv, {x1, y0}), apply_homography(inv, {x1, y1}),
          apply_homography(inv, {x0, y1})};
}

Point2 geometric_median(std::span<const Point2> points) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "geometric median of no points");
  Point2 m{};
  for (const auto& p : points) m = m + p;
  m = (1.0 / static_cast<double>(points.size())) * m;
  // Weiszfeld iterations.
  for (int it = 0; it < 200; ++it) {
    Point2 num{};
    double den = 0.0;
    for (const auto& p : points) {
      const double d = distance(p, m);
      if (d < 1e-12) return p;
      num = num + (1.0 / d) * p;
      den += 1.0 / d;
    }
    const Point2 next = (1.0 / den) * num;
    const double step = distance(next, m);
    m = next;
    if (step < 1e-10) break;
  }
  return m;
}

ConsensusResult consensus_corners(std::span<const std::array<Point2, 4>> proposals, const RansacConfig& cfg) {
  cfg.validate(1);
  if (proposals.empty()) throw Error(ErrorCode::InvalidArgument, "no corner proposals");
  ConsensusResult out;
  if (proposals.size() == 1) {
    out.corners = proposals.front();
    return out;
  }
  const std::size_t n = proposals.size();
  for (int k = 0; k < 4; ++k) {
    std::vector<Point2> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = proposals[i][static_cast<std::size_t>(k)];
    const double thr = cfg.inlier_threshold;

    auto inliers_of = [&](Point2 model, std::vector<bool>& mask, double& cost) {
      std::size_t count = 0;
      cost = 0.0;
      mask.assign(n, false);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = distance(pts[i], model);
        if (d <= thr) {
          mask[i] = true;
          ++count;
          cost += d * d;
        } else {
          cost += thr * thr;
        }
      }
      return count;
    };

    std::vector<std::size_t> candidates;
    if (n <= static_cast<std::size_t>(cfg.max_iterations)) {
      for (std::size_t i = 0; i < n; ++i) candidates.push_back(i);
    } else {
      CounterRng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
      for (int it = 0; it < cfg.max_iterations; ++it) candidates.push_back(rng.below(n));
    }
    std::vector<bool> best_mask;
    std::size_t best_count = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (auto c : candidates) {
      std::vector<bool> mask;
      double cost = 0.0;
      const std::size_t count = inliers_of(pts[c], mask, cost);
      if (count > best_count || (count == best_count && cost < best_cost)) {
        best_count = count;
        best_cost = cost;
        best_mask = std::move(mask);
      }
    }

    Point2 mean{};
    for (int round = 0; round < 16; ++round) {
      Point2 acc{};
      std::size_t m = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (best_mask[i]) {
          acc = acc + pts[i];
          ++m;
        }
      }
      mean = (1.0 / static_cast<double>(m)) * acc;
      std::vector<bool> mask;
      double cost = 0.0;
      const std::size_t count = inliers_of(mean, mask, cost);
      if (count < best_count || mask == best_mask) break;
      best_count = count;
      best_mask = std::move(mask);
    }

    if (best_count < static_cast<std::size_t>(cfg.min_inliers)) {
      out.corners[static_cast<std::size_t>(k)] = geometric_median(pts);
      out.fallback[static_cast<std::size_t>(k)] = true;
    } else {
      out.corners[static_cast<std::size_t>(k)] = mean;
    }
  }
  return out;
}

RectifiedSegment rectify_segment(int segment_id, std::span<const RefinedQuad> members,
                                 const std::array<Point2, 4>& corners) {
  if (!is_convex(corners) || signed_area(corners) <= 0.0) {
    throw Error(ErrorCode::PreconditionViolation,
                "wall corners must be convex and ordered top-left, top-right, bottom-right, bottom-left");
  }
  RectifiedSegment out;
  out.segment_id = segment_id;
  out.wall_corners_image = corners;
  out.wall_size = mean_edge_size(corners);
  out.h_wall = homography_dlt(corners, rectangle(out.wall_size));

  const double mx = 0.05 * out.wall_size.width;
  const double my = 0.05 * out.wall_size.height;
  for (const auto& q : members) {
    RefinedQuad r = q;
    try {
      for (auto& c : r.corners) c = apply_homography(out.h_wall, c);
    } catch (const Error& e) {
      out.warnings.push_back("quad " + std::to_string(q.id) + " not rectified: " + e.what());
      continue;
    }
    for (const auto& c : r.corners) {
      if (c.x < -mx || c.y < -my || c.x > out.wall_size.width + mx || c.y > out.wall_size.height + my) {
        out.warnings.push_back("quad " + std::to_string(q.id) + " extends beyond the wall rectangle");
        break;
      }
    }
    out.rectified_quads.push_back(r);
  }
  return out;
}

RectifiedSegment rectify_cluster(const WallSegmentCluster& segment, std::span<const RefinedQuad> quads,
                                 const RectifyConfig& cfg) {
  const std::set<std::int64_t> ids(segment.members.begin(), segment.members.end());
  std::vector<RefinedQuad> members;
  for (const auto& q : quads) {
    if (ids.count(q.id)) members.push_back(q);
  }
  std::sort(members.begin(), members.end(), [](const RefinedQuad& a, const RefinedQuad& b) { return a.id < b.id; });
  if (members.empty()) throw Error(ErrorCode::InvalidArgument, "segment has no member quads");

  std::vector<std::array<Point2, 4>> proposals;
  std::vector<std::string> warnings;
  for (const auto& via : members) {
    try {
      proposals.push_back(propose_wall_corners(members, via));
    } catch (const Error& e) {
      warnings.push_back("no corner proposal via quad " + std::to_string(via.id) + ": " + e.what());
    }
  }
  if (proposals.empty()) throw Error(ErrorCode::DegenerateConfiguration, "no element produced a corner proposal");
  RansacConfig rc = cfg.consensus;
  rc.seed = derive_seed(cfg.consensus.seed, static_cast<std::uint64_t>(segment.id));
  const auto consensus = consensus_corners(proposals, rc);
  for (int k = 0; k < 4; ++k) {
    if (consensus.fallback[static_cast<std::size_t>(k)]) {
      warnings.push_back("corner " + std::to_string(k) + " fell back to the geometric median");
    }
  }
  RectifiedSegment out = rectify_segment(segment.id, members, consensus.corners);
  out.warnings.insert(out.warnings.begin(), warnings.begin(), warnings.end());
  return out;
}

}  // namespace drywall
