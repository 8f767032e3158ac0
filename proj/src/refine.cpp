#include "drywall/refine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "drywall/rng.hpp"

namespace drywall {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::WoodPanel: return "wood_panel";
    case ClassLabel::Insulation: return "insulation";
    case ClassLabel::DrywallPanel: return "drywall_panel";
    case ClassLabel::MetalFrame: return "metal_frame";
  }
  return "unknown";
}

std::optional<ClassLabel> parse_label(std::string_view text) {
  for (ClassLabel l : kAllLabels) {
    if (to_string(l) == text) return l;
  }
  return std::nullopt;
}

double RefinedQuad::area() const { return std::abs(signed_area(corners)); }

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double turning_angle(Point2 prev, Point2 at, Point2 next) {
  const Point2 e0 = at - prev;
  const Point2 e1 = next - at;
  return std::abs(std::atan2(cross(e0, e1), dot(e0, e1)));
}

bool run_fits(std::span<const Point2> outline, const std::vector<std::size_t>& run, std::size_t extra,
              double tol) {
  std::vector<Point2> pts;
  pts.reserve(run.size() + 1);
  for (auto i : run) pts.push_back(outline[i]);
  pts.push_back(outline[extra]);
  try {
    return fit_line_tls(pts).max_residual <= tol;
  } catch (const Error&) {
    return true;  // coincident vertices fit any line
  }
}

// Walks the outline from `start`, growing each run while it stays straight.
std::vector<std::size_t> accrete(std::span<const Point2> outline, std::size_t start, double tol) {
  const std::size_t n = outline.size();
  std::vector<std::size_t> boundaries{start};
  std::vector<std::size_t> run{start};
  std::size_t i = start;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t next = (i + 1) % n;
    if (!run_fits(outline, run, next, tol)) {
      if (i != boundaries.back()) boundaries.push_back(i);
      run = {i};
    }
    if (next == start) break;
    run.push_back(next);
    i = next;
  }
  return boundaries;
}

// Area of the triangle a boundary forms with its neighbours. Spikes from
// outlier vertices have a short base and score low even when sharp.
double boundary_weight(std::span<const Point2> outline, const std::vector<std::size_t>& b, std::size_t k) {
  const std::size_t m = b.size();
  const Point2 prev = outline[b[(k + m - 1) % m]];
  const Point2 at = outline[b[k]];
  const Point2 next = outline[b[(k + 1) % m]];
  return 0.5 * std::abs(cross(at - prev, next - at));
}

// Perpendicular SSE of the cyclic vertex run [from, to], both ends included.
double run_sse(std::span<const Point2> outline, std::size_t from, std::size_t to) {
  const std::size_t n = outline.size();
  std::vector<Point2> pts;
  for (std::size_t i = from;; i = (i + 1) % n) {
    pts.push_back(outline[i]);
    if (i == to) break;
  }
  try {
    return fit_line_tls(pts).sse;
  } catch (const Error&) {
    return 0.0;
  }
}

// Moves each boundary within a small window to the split that minimises the
// SSE of its two adjacent runs.
void refine_boundaries(std::span<const Point2> outline, std::array<std::size_t, 4>& b) {
  const std::size_t n = outline.size();
  const std::size_t w = std::max<std::size_t>(2, n / 16);
  auto gap = [n](std::size_t a, std::size_t c) { return (c + n - a) % n; };
  for (int round = 0; round < 4; ++round) {
    bool moved = false;
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t prev = b[(k + 3) % 4], next = b[(k + 1) % 4];
      std::size_t best = b[k];
      double best_cost = run_sse(outline, prev, b[k]) + run_sse(outline, b[k], next);
      for (std::size_t d = 1; d <= w; ++d) {
        for (std::size_t c : {(b[k] + d) % n, (b[k] + n - d % n) % n}) {
          if (gap(prev, c) < 1 || gap(c, next) < 1 || gap(prev, c) >= gap(prev, next)) continue;
          const double cost = run_sse(outline, prev, c) + run_sse(outline, c, next);
          if (cost < best_cost - 1e-12) {
            best_cost = cost;
            best = c;
          }
        }
      }
      if (best != b[k]) {
        b[k] = best;
        moved = true;
      }
    }
    if (!moved) break;
  }
}

}  // namespace

std::array<std::size_t, 4> find_corner_candidates(std::span<const Point2> outline, double residual_tol) {
  if (!(residual_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "residual_tol must be > 0");
  const std::size_t n = outline.size();
  if (n < 4) throw Error(ErrorCode::NotQuadrilateral, "outline has fewer than 4 vertices");

  // Start at the sharpest vertex so a straight side is never split across the seam.
  const std::size_t span = std::max<std::size_t>(1, n / 16);
  std::size_t start = 0;
  double sharpest = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = turning_angle(outline[(i + n - span) % n], outline[i], outline[(i + span) % n]);
    if (t > sharpest + 1e-12) {
      sharpest = t;
      start = i;
    }
  }

  std::vector<std::size_t> boundaries;
  double tol = residual_tol;
  for (int attempt = 0; attempt < 7; ++attempt, tol *= 0.5) {
    boundaries = accrete(outline, start, tol);
    if (boundaries.size() >= 4) break;
  }
  if (boundaries.size() < 4) {
    throw Error(ErrorCode::NotQuadrilateral,
                "outline splits into " + std::to_string(boundaries.size()) + " straight runs");
  }

  // Too many runs: drop the least significant boundary until four remain.
  while (boundaries.size() > 4) {
    std::size_t flattest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < boundaries.size(); ++k) {
      const double t = boundary_weight(outline, boundaries, k);
      if (t < best) {
        best = t;
        flattest = k;
      }
    }
    boundaries.erase(boundaries.begin() + static_cast<std::ptrdiff_t>(flattest));
  }

  std::array<std::size_t, 4> out{};
  std::copy(boundaries.begin(), boundaries.end(), out.begin());
  std::sort(out.begin(), out.end());
  refine_boundaries(outline, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::array<EdgeOrientation, 4> classify_edges(const std::array<Point2, 4>& corners) {
  std::array<double, 4> angle{};
  std::array<EdgeOrientation, 4> cls{};
  for (int k = 0; k < 4; ++k) {
    const Point2 d = corners[(k + 1) & 3] - corners[k];
    angle[k] = std::atan2(std::abs(d.y), std::abs(d.x)) * kRadToDeg;
    cls[k] = angle[k] < 45.0 ? EdgeOrientation::Horizontal : EdgeOrientation::Vertical;
  }
  if (cls[0] == cls[2] && cls[1] == cls[3] && cls[0] != cls[1]) return cls;

  const double even_horizontal = angle[0] + angle[2] + (90.0 - angle[1]) + (90.0 - angle[3]);
  const double odd_horizontal = (90.0 - angle[0]) + (90.0 - angle[2]) + angle[1] + angle[3];
  const bool even_h = even_horizontal < odd_horizontal;
  const auto h = EdgeOrientation::Horizontal;
  const auto v = EdgeOrientation::Vertical;
  return even_h ? std::array{h, v, h, v} : std::array{v, h, v, h};
}

RefinedQuad make_quad(std::int64_t id, ClassLabel label, const std::array<Point2, 4>& corners) {
  for (const auto& c : corners) {
    if (!std::isfinite(c.x) || !std::isfinite(c.y)) {
      throw Error(ErrorCode::NonConvexResult, "non-finite corner");
    }
  }
  if (!is_convex(corners)) throw Error(ErrorCode::NonConvexResult, "corners do not form a convex quad");
  std::array<Point2, 4> c = corners;
  if (signed_area(c) < 0.0) std::reverse(c.begin(), c.end());
  const auto cls = classify_edges(c);
  // Pick the horizontal edge pair, then whichever of the two sits higher.
  int first = cls[0] == EdgeOrientation::Horizontal ? 0 : 1;
  const double y_first = c[first].y + c[(first + 1) & 3].y;
  const double y_opposite = c[(first + 2) & 3].y + c[(first + 3) & 3].y;
  if (y_opposite < y_first) first = (first + 2) & 3;
  RefinedQuad q;
  q.id = id;
  q.label = label;
  for (int k = 0; k < 4; ++k) q.corners[k] = c[(first + k) & 3];
  return q;
}

RefinedQuad fit_quad(std::span<const Point2> outline, const std::array<std::size_t, 4>& idx,
                     const RansacConfig& cfg) {
  const std::size_t n = outline.size();
  for (auto i : idx) {
    if (i >= n) throw Error(ErrorCode::InvalidArgument, "corner index out of range");
  }
  std::array<HomogLine, 4> sides{};
  for (int k = 0; k < 4; ++k) {
    const std::size_t from = idx[k];
    const std::size_t to = idx[(k + 1) & 3];
    std::vector<Point2> run;
    for (std::size_t i = from;; i = (i + 1) % n) {
      run.push_back(outline[i]);
      if (i == to || run.size() > n) break;
    }
    if (from == to || run.size() < 2) {
      throw Error(ErrorCode::NonConvexResult, "side " + std::to_string(k) + " has no extent");
    }
    RansacConfig side_cfg = cfg;
    side_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    try {
      sides[k] = ransac_line(run, side_cfg).line;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoConsensus) throw;
      throw Error(ErrorCode::NonConvexResult, std::string("side fit failed: ") + e.what());
    }
  }
  // Corner indices can be off by a vertex; hand every vertex to its nearest
  // side and refit until the assignment settles.
  for (int round = 0; round < 4; ++round) {
    std::array<std::vector<Point2>, 4> members;
    for (const auto& p : outline) {
      std::array<double, 4> d{};
      for (int k = 0; k < 4; ++k) d[k] = sides[k].distance(p);
      const double best = *std::min_element(d.begin(), d.end());
      for (int k = 0; k < 4; ++k) {
        if (d[k] <= cfg.inlier_threshold && d[k] <= best + 1e-9) members[k].push_back(p);
      }
    }
    bool changed = false;
    for (int k = 0; k < 4; ++k) {
      if (members[k].size() < 2) continue;
      try {
        const HomogLine refit = fit_line_tls(members[k]).line;
        changed = changed || !(refit == sides[k]);
        sides[k] = refit;
      } catch (const Error&) {
      }
    }
    if (!changed) break;
  }
  std::array<Point2, 4> corners{};
  for (int k = 0; k < 4; ++k) {
    try {
      corners[k] = intersect(sides[(k + 3) & 3], sides[k]).to_point();
    } catch (const Error& e) {
      throw Error(ErrorCode::NonConvexResult, std::string("adjacent sides do not meet: ") + e.what());
    }
  }
  return make_quad(0, ClassLabel::WoodPanel, corners);
}

// ---------------------------------------------------------------------------
// Edge grouping

namespace {

struct EdgeInfo {
  EdgeRef ref;
  LineSegment2 seg;
  EdgeOrientation orientation;
  std::optional<HomogLine> line;
};

std::optional<HomogLine> segment_line(const LineSegment2& s) {
  if (distance(s.p0, s.p1) <= 1e-9) return std::nullopt;
  return HomogLine::from_coefficients(s.p0.y - s.p1.y, s.p1.x - s.p0.x, cross(s.p0, s.p1));
}

double line_angle_diff(const HomogLine& a, const HomogLine& b) {
  double d = std::abs(a.angle_deg() - b.angle_deg());
  return std::min(d, 180.0 - d);
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<EdgeInfo> collect_edges(std::span<const RefinedQuad> quads) {
  std::vector<EdgeInfo> edges;
  edges.reserve(quads.size() * 4);
  for (const auto& q : quads) {
    for (int k = 0; k < 4; ++k) {
      const auto seg = q.edge(k);
      edges.push_back({{q.id, k}, seg, q.edge_class[k], segment_line(seg)});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const EdgeInfo& a, const EdgeInfo& b) { return a.ref < b.ref; });
  return edges;
}

HomogLine fit_endpoints(const std::vector<Point2>& pts, const HomogLine& fallback) {
  try {
    return fit_line_tls(pts).line;
  } catch (const Error&) {
    return fallback;
  }
}

}  // namespace

std::vector<EdgeGroup> group_aligned_edges(std::span<const RefinedQuad> quads, double angle_tol,
                                           double dist_tol) {
  if (!(angle_tol >= 0.0) || !(dist_tol >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grouping tolerances must be >= 0");
  }
  const auto edges = collect_edges(quads);
  DisjointSets sets(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (!e.line) continue;
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const auto& f = edges[j];
      if (!f.line || f.ref.quad_id == e.ref.quad_id || f.orientation != e.orientation) continue;
      if (line_angle_diff(*e.line, *f.line) > angle_tol) continue;
      if (e.line->distance(f.seg.p0) > dist_tol || e.line->distance(f.seg.p1) > dist_tol) continue;
      if (f.line->distance(e.seg.p0) > dist_tol || f.line->distance(e.seg.p1) > dist_tol) continue;
      sets.unite(i, j);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < edges.size(); ++i) by_root[sets.find(i)].push_back(i);

  std::vector<EdgeGroup> groups;
  groups.reserve(by_root.size());
  for (const auto& [root, members] : by_root) {
    EdgeGroup g;
    g.orientation = edges[members.front()].orientation;
    std::vector<Point2> pts;
    for (auto m : members) {
      g.members.push_back(edges[m].ref);
      pts.push_back(edges[m].seg.p0);
      pts.push_back(edges[m].seg.p1);
    }
    g.fitted_line = fit_endpoints(pts, edges[members.front()].line.value_or(HomogLine{}));
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(),
            [](const EdgeGroup& a, const EdgeGroup& b) { return a.members.front() < b.members.front(); });
  return groups;
}

GroupRefinement refine_groups(std::span<const RefinedQuad> quads, std::span<const EdgeGroup> groups,
                              const RansacConfig& cfg) {
  cfg.validate(2);
  GroupRefinement out;
  std::map<std::int64_t, std::size_t> index_of;
  for (std::size_t i = 0; i < quads.size(); ++i) index_of[quads[i].id] = i;

  // Replacement line per (quad, edge); absent means keep the edge's own line.
  std::map<EdgeRef, HomogLine> replaced;
  for (const auto& g : groups) {
    EdgeGroup updated = g;
    std::vector<Point2> pts;
    std::vector<EdgeRef> owners;
    std::vector<EdgeGroup> split;
    for (const auto& m : g.members) {
      auto it = index_of.find(m.quad_id);
      if (it == index_of.end() || m.edge < 0 || m.edge > 3) continue;
      const auto seg = quads[it->second].edge(m.edge);
      pts.push_back(seg.p0);
      pts.push_back(seg.p1);
      owners.push_back(m);
    }
    if (owners.size() >= 2) {
      RansacConfig group_cfg = cfg;
      group_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(owners.front().quad_id) * 4 +
                                                 static_cast<std::uint64_t>(owners.front().edge));
      try {
        const auto fit = ransac_line(pts, group_cfg);
        // Refit over edges whose both endpoints are inliers, so a stray
        // endpoint of a rejected edge does not pull the shared line.
        std::vector<Point2> kept;
        for (std::size_t k = 0; k < owners.size(); ++k) {
          if (fit.inliers[2 * k] && fit.inliers[2 * k + 1]) {
            kept.push_back(pts[2 * k]);
            kept.push_back(pts[2 * k + 1]);
          }
        }
        const HomogLine line = kept.empty() ? fit.line : fit_line_tls(kept).line;
        updated.fitted_line = line;
        updated.members.clear();
        for (std::size_t k = 0; k < owners.size(); ++k) {
          if (line.distance(pts[2 * k]) <= cfg.inlier_threshold && line.distance(pts[2 * k + 1]) <= cfg.inlier_threshold) {
            replaced[owners[k]] = line;
            updated.members.push_back(owners[k]);
            continue;
          }
          // Outlier edges leave the group and keep their own line.
          EdgeGroup single{{owners[k]}, g.orientation, line};
          if (auto l = segment_line(quads[index_of.at(owners[k].quad_id)].edge(owners[k].edge))) {
            single.fitted_line = *l;
          }
          split.push_back(std::move(single));
        }
      } catch (const Error& e) {
        out.warnings.push_back("edge group at quad " + std::to_string(owners.front().quad_id) +
                               " left unrefined: " + e.what());
      }
    }
    if (!updated.members.empty()) out.groups.push_back(std::move(updated));
    for (auto& single : split) out.groups.push_back(std::move(single));
  }

  out.quads.reserve(quads.size());
  for (const auto& q : quads) {
    std::array<HomogLine, 4> lines{};
    bool changed = false;
    bool usable = true;
    for (int k = 0; k < 4; ++k) {
      auto it = replaced.find({q.id, k});
      if (it != replaced.end()) {
        lines[k] = it->second;
        changed = true;
      } else if (auto l = segment_line(q.edge(k))) {
        lines[k] = *l;
      } else {
        usable = false;
      }
    }
    if (!changed || !usable) {
      out.quads.push_back(q);
      continue;
    }
    try {
      std::array<Point2, 4> corners{};
      for (int k = 0; k < 4; ++k) corners[k] = intersect(lines[(k + 3) & 3], lines[k]).to_point();
      RefinedQuad r = make_quad(q.id, q.label, corners);
      // The rebuilt quad must keep its corner labelling; anything else means
      // the replacement lines crossed over.
      double drift = 0.0;
      for (int k = 0; k < 4; ++k) drift = std::max(drift, distance(r.corners[k], corners[k]));
      if (drift > 0.0) throw Error(ErrorCode::NonConvexResult, "corner order changed");
      r.unrefined = q.unrefined;
      out.quads.push_back(r);
    } catch (const Error& e) {
      RefinedQuad kept = q;
      kept.unrefined = true;
      out.warnings.push_back("quad " + std::to_string(q.id) + " kept unrefined: " + e.what());
      out.quads.push_back(kept);
    }
  }
  return out;
}

RefineResult refine_detections(std::span<const RawDetection> detections, const RefineConfig& cfg) {
  RefineResult result;
  std::vector<RefinedQuad> simplified;
  for (const auto& d : detections) {
    try {
      const auto idx = find_corner_candidates(d.outline, cfg.residual_tol);
      RansacConfig side_cfg = cfg.side_ransac;
      side_cfg.seed = derive_seed(cfg.side_ransac.seed, static_cast<std::uint64_t>(d.id));
      RefinedQuad q = fit_quad(d.outline, idx, side_cfg);
      q.id = d.id;
      q.label = d.label;
      simplified.push_back(q);
    } catch (const Error& e) {
      result.failures.push_back({d.id, e.code(), e.what()});
    }
  }
  std::sort(simplified.begin(), simplified.end(),
            [](const RefinedQuad& a, const RefinedQuad& b) { return a.id < b.id; });
  // Regroup and refit until the corners settle.
  constexpr int kMaxPasses = 8;
  constexpr double kSettled = 1e-9;
  std::vector<RefinedQuad> current = std::move(simplified);
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    auto refined = refine_groups(current, group_aligned_edges(current, cfg.angle_tol, cfg.dist_tol), cfg.group_ransac);
    double moved = 0.0;
    for (std::size_t i = 0; i < current.size(); ++i) {
      for (int k = 0; k < 4; ++k) moved = std::max(moved, distance(current[i].corners[k], refined.quads[i].corners[k]));
    }
    current = std::move(refined.quads);
    result.groups = std::move(refined.groups);
    result.warnings = std::move(refined.warnings);
    if (moved < kSettled) break;
  }
  result.quads = std::move(current);
  return result;
}

}  // namespace drywall
