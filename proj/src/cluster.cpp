#include "drywall/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include <Eigen/Dense>

#include "drywall/rng.hpp"

namespace drywall {

namespace {

std::optional<HomogLine> segment_line(const LineSegment2& s) {
  if (distance(s.p0, s.p1) <= 1e-9) return std::nullopt;
  return HomogLine::from_coefficients(s.p0.y - s.p1.y, s.p1.x - s.p0.x, cross(s.p0, s.p1));
}

double angle_between_lines(const HomogLine& a, const HomogLine& b) {
  double d = std::abs(a.angle_deg() - b.angle_deg());
  return std::min(d, 180.0 - d);
}

bool overlaps(const LineSegment2& s, double x_min, double x_max) {
  const double lo = std::min(s.p0.x, s.p1.x);
  const double hi = std::max(s.p0.x, s.p1.x);
  return hi > x_min && lo < x_max;
}

double weighted_median(std::vector<std::pair<double, double>> value_weight) {
  if (value_weight.empty()) return 0.0;
  std::sort(value_weight.begin(), value_weight.end());
  double total = 0.0;
  for (const auto& [v, w] : value_weight) total += w;
  if (!(total > 0.0)) return value_weight[value_weight.size() / 2].first;
  double acc = 0.0;
  for (const auto& [v, w] : value_weight) {
    acc += w;
    if (acc >= 0.5 * total) return v;
  }
  return value_weight.back().first;
}

struct VpHypothesis {
  std::size_t count = 0;
  double cost = std::numeric_limits<double>::infinity();
};

VpHypothesis score_vp(const HomogPoint& vp, std::span<const LineSegment2> edges, double thr) {
  VpHypothesis h;
  h.cost = 0.0;
  for (const auto& e : edges) {
    const double r = edge_vp_residual(e, vp);
    if (r <= thr) {
      ++h.count;
      h.cost += r * r;
    } else {
      h.cost += thr * thr;
    }
  }
  return h;
}

// Minimizes sum w_i (a_i x + b_i y + c_i)^2; an ideal point when the normal
// equations are singular (parallel bundle).
HomogPoint least_squares_vp(std::span<const HomogLine> lines, std::span<const double> weights) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Eigen::Vector2d n(lines[i].a, lines[i].b);
    m += weights[i] * n * n.transpose();
    rhs -= weights[i] * lines[i].c * n;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m);
  const auto ev = eig.eigenvalues();
  if (!(ev(1) > 0.0) || ev(0) <= 1e-10 * ev(1)) {
    const Eigen::Vector2d d = eig.eigenvectors().col(0);
    return HomogPoint::normalized(d.x(), d.y(), 0.0);
  }
  const Eigen::Vector2d p = m.ldlt().solve(rhs);
  return HomogPoint::normalized(p.x(), p.y(), 1.0);
}

}  // namespace

double edge_vp_residual(const LineSegment2& edge, const HomogPoint& vp) {
  const Point2 m = edge.mid();
  Point2 d{};
  if (vp.is_ideal()) {
    d = vp.direction();
  } else {
    const Point2 v = vp.to_point();
    const double len = distance(v, m);
    if (len <= 1e-9) return 0.0;
    d = (1.0 / len) * (v - m);
  }
  return std::abs(cross(d, edge.p1 - m));
}

double weighted_median_residual(std::span<const ClusterEdge> edges, const HomogPoint& vp) {
  std::vector<std::pair<double, double>> vw;
  vw.reserve(edges.size());
  for (const auto& e : edges) vw.emplace_back(edge_vp_residual(e.seg, vp), e.seg.length());
  return weighted_median(std::move(vw));
}

std::vector<ClusterEdge> horizontal_edges(std::span<const RefinedQuad> quads) {
  std::vector<ClusterEdge> out;
  for (const auto& q : quads) {
    for (int k = 0; k < 4; ++k) {
      if (q.edge_class[k] == EdgeOrientation::Horizontal) out.push_back({{q.id, k}, q.edge(k)});
    }
  }
  std::sort(out.begin(), out.end(), [](const ClusterEdge& a, const ClusterEdge& b) { return a.ref < b.ref; });
  return out;
}

std::vector<Column> partition_columns(std::span<const RefinedQuad> quads, double image_width, int n_columns) {
  if (n_columns < 1) throw Error(ErrorCode::InvalidArgument, "n_columns must be >= 1");
  if (!(image_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "image_width must be > 0");
  const auto edges = horizontal_edges(quads);
  std::vector<Column> cols(static_cast<std::size_t>(n_columns));
  const double w = image_width / n_columns;
  for (int c = 0; c < n_columns; ++c) {
    auto& col = cols[static_cast<std::size_t>(c)];
    col.x_min = c * w;
    col.x_max = c + 1 == n_columns ? image_width : (c + 1) * w;
    for (const auto& e : edges) {
      if (overlaps(e.seg, col.x_min, col.x_max)) col.edges.push_back(e);
    }
  }
  return cols;
}

VanishingPoint estimate_vp(std::span<const LineSegment2> edges, const RansacConfig& cfg, double parallel_tol_deg) {
  cfg.validate(2);
  std::vector<LineSegment2> segs;
  std::vector<HomogLine> lines;
  for (const auto& e : edges) {
    if (auto l = segment_line(e)) {
      segs.push_back(e);
      lines.push_back(*l);
    }
  }
  if (segs.size() < 2) throw Error(ErrorCode::InsufficientEdges, "vanishing point needs at least 2 edges");
  const std::size_t n = segs.size();

  double spread = 0.0;
  for (std::size_t i = 1; i < n; ++i) spread = std::max(spread, angle_between_lines(lines[0], lines[i]));
  if (spread <= parallel_tol_deg) {
    Point2 acc{};
    const Point2 ref = lines[0].direction();
    for (std::size_t i = 0; i < n; ++i) {
      Point2 d = lines[i].direction();
      if (dot(d, ref) < 0.0) d = -1.0 * d;
      acc = acc + segs[i].length() * d;
    }
    return {HomogPoint::normalized(acc.x, acc.y, 0.0), 0.0, static_cast<int>(n)};
  }

  std::optional<HomogPoint> best_vp;
  VpHypothesis best;
  auto consider = [&](std::size_t i, std::size_t j) {
    HomogPoint p;
    try {
      p = intersect(lines[i], lines[j]);
    } catch (const Error&) {
      return;
    }
    const auto h = score_vp(p, segs, cfg.inlier_threshold);
    if (!best_vp || h.count > best.count || (h.count == best.count && h.cost < best.cost)) {
      best = h;
      best_vp = p;
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
  if (!best_vp) throw Error(ErrorCode::InsufficientEdges, "all edge lines coincide");

  // Re-solve on the consensus set until it settles.
  HomogPoint vp = *best_vp;
  std::vector<bool> inlier(n, false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    inlier[i] = edge_vp_residual(segs[i], vp) <= cfg.inlier_threshold;
    count += inlier[i];
  }
  for (int round = 0; round < 8 && count >= 2; ++round) {
    std::vector<HomogLine> sel;
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i) {
      if (!inlier[i]) continue;
      sel.push_back(lines[i]);
      w.push_back(segs[i].length() * segs[i].length());
    }
    const HomogPoint refit = least_squares_vp(sel, w);
    std::vector<bool> next(n, false);
    std::size_t next_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = edge_vp_residual(segs[i], refit) <= cfg.inlier_threshold;
      next_count += next[i];
    }
    if (next_count < count) break;
    vp = refit;
    const bool stable = next == inlier;
    inlier = std::move(next);
    count = next_count;
    if (stable) break;
  }

  double sum_w = 0.0, sum_r2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = edge_vp_residual(segs[i], vp);
    sum_w += segs[i].length();
    sum_r2 += segs[i].length() * r * r;
  }
  VanishingPoint out;
  out.point = vp;
  out.scatter = std::sqrt(sum_r2 / sum_w);
  out.support = static_cast<int>(std::max<std::size_t>(count, 2));
  return out;
}

namespace {

std::vector<LineSegment2> segments_of(std::span<const ClusterEdge> edges) {
  std::vector<LineSegment2> s;
  s.reserve(edges.size());
  for (const auto& e : edges) s.push_back(e.seg);
  return s;
}

void resolve_column(Column& col, const ClusterConfig& cfg) {
  col.vp.reset();
  col.unresolved = false;
  if (col.edges.size() < 2) {
    col.unresolved = true;
    return;
  }
  try {
    RansacConfig rc = cfg.vp_ransac;
    rc.seed = derive_seed(cfg.vp_ransac.seed, static_cast<std::uint64_t>(std::llround(col.x_min * 1024.0)));
    col.vp = estimate_vp(segments_of(col.edges), rc, cfg.parallel_tol_deg);
  } catch (const Error&) {
    col.unresolved = true;
  }
}

}  // namespace

std::vector<Column> subdivide_if_scattered(const Column& col, double scatter_tol, double min_width,
                                           const ClusterConfig& cfg) {
  Column c = col;
  if (!c.vp && !c.unresolved) resolve_column(c, cfg);
  if (!c.vp || c.vp->scatter <= scatter_tol) return {c};
  const double width = c.x_max - c.x_min;
  if (width / 2.0 < min_width) {
    c.unresolved = true;
    return {c};
  }
  const double mid = 0.5 * (c.x_min + c.x_max);
  std::vector<Column> out;
  for (const auto& [lo, hi] : {std::pair{c.x_min, mid}, std::pair{mid, c.x_max}}) {
    Column half;
    half.x_min = lo;
    half.x_max = hi;
    for (const auto& e : c.edges) {
      if (overlaps(e.seg, lo, hi)) half.edges.push_back(e);
    }
    resolve_column(half, cfg);
    if (half.vp) {
      auto sub = subdivide_if_scattered(half, scatter_tol, min_width, cfg);
      out.insert(out.end(), sub.begin(), sub.end());
    } else {
      out.push_back(std::move(half));
    }
  }
  return out;
}

namespace {

double quad_x(const std::vector<ClusterEdge>& edges) {
  double acc = 0.0;
  for (const auto& e : edges) acc += e.seg.mid().x;
  return acc / static_cast<double>(std::max<std::size_t>(edges.size(), 1));
}

}  // namespace

std::vector<WallSegmentCluster> merge_columns(std::span<const Column> cols, double consistency_tol,
                                              const ClusterConfig& cfg) {
  std::vector<std::size_t> resolved;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].vp && !cols[i].unresolved) resolved.push_back(i);
  }
  if (resolved.empty()) throw Error(ErrorCode::NoSegments, "no column has a vanishing point");

  // Runs of consistent neighbours, as indices into `resolved`. A column joins
  // the current run when one VP explains the pooled edges of both.
  std::vector<std::vector<std::size_t>> runs{{resolved[0]}};
  std::map<EdgeRef, LineSegment2> pooled;
  for (const auto& e : cols[resolved[0]].edges) pooled.emplace(e.ref, e.seg);
  for (std::size_t k = 1; k < resolved.size(); ++k) {
    const Column& cur = cols[resolved[k]];
    auto candidate = pooled;
    for (const auto& e : cur.edges) candidate.emplace(e.ref, e.seg);
    std::vector<LineSegment2> segs;
    for (const auto& [ref, seg] : candidate) segs.push_back(seg);
    RansacConfig rc = cfg.vp_ransac;
    rc.seed = derive_seed(cfg.vp_ransac.seed, 0x3e7 + k);
    bool joins = false;
    try {
      joins = estimate_vp(segs, rc, cfg.parallel_tol_deg).scatter <= consistency_tol;
    } catch (const Error&) {
    }
    if (joins) {
      runs.back().push_back(resolved[k]);
      pooled = std::move(candidate);
    } else {
      runs.push_back({resolved[k]});
      pooled.clear();
      for (const auto& e : cur.edges) pooled.emplace(e.ref, e.seg);
    }
  }

  // Unresolved columns with edges join the neighbouring run whose VP fits them best.
  std::vector<int> run_of(cols.size(), -1);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (auto c : runs[r]) run_of[c] = static_cast<int>(r);
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (run_of[i] >= 0 || cols[i].edges.empty()) continue;
    int left = -1, right = -1;
    for (std::size_t j = i; j-- > 0;) {
      if (run_of[j] >= 0 && cols[j].vp && !cols[j].unresolved) {
        left = run_of[j];
        break;
      }
    }
    for (std::size_t j = i + 1; j < cols.size(); ++j) {
      if (run_of[j] >= 0 && cols[j].vp && !cols[j].unresolved) {
        right = run_of[j];
        break;
      }
    }
    int chosen = left >= 0 ? left : right;
    if (left >= 0 && right >= 0 && left != right) {
      auto fit = [&](int r) {
        const Column& anchor = cols[r == left ? runs[static_cast<std::size_t>(r)].back()
                                               : runs[static_cast<std::size_t>(r)].front()];
        return weighted_median_residual(cols[i].edges, anchor.vp->point);
      };
      chosen = fit(right) < fit(left) ? right : left;
    }
    if (chosen >= 0) run_of[i] = chosen;
  }

  std::vector<WallSegmentCluster> segments(runs.size());
  std::vector<std::map<EdgeRef, ClusterEdge>> run_edges(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    segments[r].id = static_cast<int>(r);
    segments[r].x_min = std::numeric_limits<double>::infinity();
    segments[r].x_max = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (run_of[i] < 0) continue;
    auto& seg = segments[static_cast<std::size_t>(run_of[i])];
    seg.x_min = std::min(seg.x_min, cols[i].x_min);
    seg.x_max = std::max(seg.x_max, cols[i].x_max);
    for (const auto& e : cols[i].edges) run_edges[static_cast<std::size_t>(run_of[i])].emplace(e.ref, e);
  }
  // Runs tile the x-axis; stretch them so there are no gaps between neighbours.
  for (std::size_t r = 0; r + 1 < segments.size(); ++r) {
    const double cut = 0.5 * (segments[r].x_max + segments[r + 1].x_min);
    segments[r].x_max = cut;
    segments[r + 1].x_min = cut;
  }

  // Provisional membership: a quad goes to the run covering the mean x of its horizontal edges.
  std::map<std::int64_t, std::vector<ClusterEdge>> quad_edges;
  for (const auto& re : run_edges) {
    for (const auto& [ref, e] : re) {
      auto& v = quad_edges[ref.quad_id];
      if (std::none_of(v.begin(), v.end(), [&](const ClusterEdge& x) { return x.ref == ref; })) v.push_back(e);
    }
  }
  for (const auto& [id, edges] : quad_edges) {
    const double x = quad_x(edges);
    std::size_t best = 0;
    for (std::size_t r = 0; r < segments.size(); ++r) {
      if (x >= segments[r].x_min) best = r;
    }
    segments[best].members.push_back(id);
  }

  for (std::size_t r = 0; r < segments.size(); ++r) {
    std::vector<LineSegment2> segs;
    for (const auto& [ref, e] : run_edges[r]) segs.push_back(e.seg);
    RansacConfig rc = cfg.vp_ransac;
    rc.seed = derive_seed(cfg.vp_ransac.seed, 0x5e6 + r);
    try {
      segments[r].vp = estimate_vp(segs, rc, cfg.parallel_tol_deg);
    } catch (const Error&) {
      segments[r].vp = *cols[runs[r].front()].vp;
    }
  }
  return segments;
}

Assignment assign_elements(std::span<const RefinedQuad> quads, std::span<const WallSegmentCluster> segments,
                           double consistency_tol) {
  if (segments.empty()) throw Error(ErrorCode::NoSegments, "no segments to assign to");
  Assignment out;
  out.segments.assign(segments.begin(), segments.end());
  for (auto& s : out.segments) s.members.clear();

  std::vector<RefinedQuad> ordered(quads.begin(), quads.end());
  std::sort(ordered.begin(), ordered.end(), [](const RefinedQuad& a, const RefinedQuad& b) { return a.id < b.id; });
  for (const auto& q : ordered) {
    std::vector<LineSegment2> hedges;
    for (int k = 0; k < 4; ++k) {
      if (q.edge_class[k] == EdgeOrientation::Horizontal) hedges.push_back(q.edge(k));
    }
    std::size_t best = 0;
    double best_res = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < segments.size(); ++s) {
      double acc = 0.0;
      for (const auto& e : hedges) acc += edge_vp_residual(e, segments[s].vp.point);
      const double r = hedges.empty() ? std::numeric_limits<double>::infinity()
                                      : acc / static_cast<double>(hedges.size());
      if (r < best_res) {
        best_res = r;
        best = s;
      }
    }
    if (best_res <= consistency_tol) {
      out.segments[best].members.push_back(q.id);
    } else {
      out.unassigned.push_back(q.id);
    }
  }
  return out;
}

Clustering cluster_quads(std::span<const RefinedQuad> quads, double image_width, const ClusterConfig& cfg) {
  Clustering out;
  auto initial = partition_columns(quads, image_width, cfg.n_columns);
  for (auto& col : initial) {
    resolve_column(col, cfg);
    if (!col.vp) {
      out.columns.push_back(col);
      continue;
    }
    auto parts = subdivide_if_scattered(col, cfg.scatter_tol, cfg.min_width, cfg);
    out.columns.insert(out.columns.end(), parts.begin(), parts.end());
  }
  std::vector<WallSegmentCluster> merged;
  try {
    merged = merge_columns(out.columns, cfg.consistency_tol, cfg);
  } catch (const Error& e) {
    out.warnings.push_back(e.what());
    for (const auto& q : quads) out.unassigned.push_back(q.id);
    std::sort(out.unassigned.begin(), out.unassigned.end());
    return out;
  }
  auto assigned = assign_elements(quads, merged, cfg.consistency_tol);
  out.unassigned = std::move(assigned.unassigned);
  for (auto& s : assigned.segments) {
    if (s.members.empty()) {
      out.warnings.push_back("segment " + std::to_string(s.id) + " received no elements and was dropped");
      continue;
    }
    s.id = static_cast<int>(out.segments.size());
    out.segments.push_back(std::move(s));
  }
  return out;
}

}  // namespace drywall
