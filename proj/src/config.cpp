#include "drywall/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "drywall/annotations.hpp"
#include "drywall/rng.hpp"

namespace drywall {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::int64_t parse_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + ": expected an unsigned integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(ErrorCode::InvalidArgument, std::string(key) + ": expected true or false");
}

int as_int(std::string_view key, std::string_view v) {
  const auto x = parse_int(key, v);
  if (x < -1'000'000'000 || x > 1'000'000'000) throw Error(ErrorCode::InvalidArgument, std::string(key) + ": out of range");
  return static_cast<int>(x);
}

struct Field {
  std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
  std::function<std::optional<std::string>(const PipelineConfig&)> get;
};

template <typename Member>
Field number(Member member) {
  return {[member](PipelineConfig& c, std::string_view k, std::string_view v) { member(c) = parse_double(k, v); },
          [member](const PipelineConfig& c) -> std::optional<std::string> {
            PipelineConfig copy = c;
            return format_double(member(copy));
          }};
}

template <typename Member>
Field integer(Member member) {
  return {[member](PipelineConfig& c, std::string_view k, std::string_view v) { member(c) = as_int(k, v); },
          [member](const PipelineConfig& c) -> std::optional<std::string> {
            PipelineConfig copy = c;
            return std::to_string(member(copy));
          }};
}

template <typename Member>
Field path(Member member) {
  return {[member](PipelineConfig& c, std::string_view, std::string_view v) { member(c) = std::string(v); },
          [](const PipelineConfig&) -> std::optional<std::string> { return std::nullopt; }};
}

void add_ransac(std::map<std::string, Field>& f, const std::string& prefix,
                RansacConfig& (*get)(PipelineConfig&)) {
  f[prefix + ".inlier_threshold"] = number([get](PipelineConfig& c) -> double& { return get(c).inlier_threshold; });
  f[prefix + ".max_iterations"] = integer([get](PipelineConfig& c) -> int& { return get(c).max_iterations; });
  f[prefix + ".min_inliers"] = integer([get](PipelineConfig& c) -> int& { return get(c).min_inliers; });
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["refine.residual_tol"] = number([](PipelineConfig& c) -> double& { return c.refine.residual_tol; });
    f["refine.angle_tol"] = number([](PipelineConfig& c) -> double& { return c.refine.angle_tol; });
    f["refine.dist_tol"] = number([](PipelineConfig& c) -> double& { return c.refine.dist_tol; });
    add_ransac(f, "refine.side_ransac", [](PipelineConfig& c) -> RansacConfig& { return c.refine.side_ransac; });
    add_ransac(f, "refine.group_ransac", [](PipelineConfig& c) -> RansacConfig& { return c.refine.group_ransac; });

    f["cluster.n_columns"] = integer([](PipelineConfig& c) -> int& { return c.cluster.n_columns; });
    f["cluster.scatter_tol"] = number([](PipelineConfig& c) -> double& { return c.cluster.scatter_tol; });
    f["cluster.min_width"] = number([](PipelineConfig& c) -> double& { return c.cluster.min_width; });
    f["cluster.consistency_tol"] = number([](PipelineConfig& c) -> double& { return c.cluster.consistency_tol; });
    f["cluster.parallel_tol"] = number([](PipelineConfig& c) -> double& { return c.cluster.parallel_tol_deg; });
    add_ransac(f, "cluster.vp_ransac", [](PipelineConfig& c) -> RansacConfig& { return c.cluster.vp_ransac; });

    add_ransac(f, "rectify.consensus", [](PipelineConfig& c) -> RansacConfig& { return c.rectify.consensus; });

    f["quality.tilt_threshold"] = number([](PipelineConfig& c) -> double& { return c.quality.tilt_threshold; });
    f["quality.spacing_cv_threshold"] =
        number([](PipelineConfig& c) -> double& { return c.quality.spacing_cv_threshold; });
    f["quality.spacing_rel_tol"] = number([](PipelineConfig& c) -> double& { return c.quality.spacing_rel_tol; });
    f["quality.expected_spacing"] = {
        [](PipelineConfig& c, std::string_view k, std::string_view v) {
          if (v == "none") {
            c.quality.expected_spacing.reset();
          } else {
            c.quality.expected_spacing = parse_double(k, v);
          }
        },
        [](const PipelineConfig& c) -> std::optional<std::string> {
          return c.quality.expected_spacing ? format_double(*c.quality.expected_spacing) : "none";
        }};
    f["quality.stage.closed_drywall"] =
        number([](PipelineConfig& c) -> double& { return c.quality.stage_thresholds.closed_drywall; });
    f["quality.stage.paneled"] = number([](PipelineConfig& c) -> double& { return c.quality.stage_thresholds.paneled; });
    f["quality.stage.insulated"] =
        number([](PipelineConfig& c) -> double& { return c.quality.stage_thresholds.insulated; });
    f["quality.stage.skeleton_frames"] =
        integer([](PipelineConfig& c) -> int& { return c.quality.stage_thresholds.skeleton_frames; });

    f["pipeline.seed"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) { c.seed = parse_u64(k, v); },
                          [](const PipelineConfig& c) -> std::optional<std::string> { return std::to_string(c.seed); }};
    f["pipeline.skip_invalid_geometry"] = {
        [](PipelineConfig& c, std::string_view k, std::string_view v) { c.skip_invalid_geometry = parse_bool(k, v); },
        [](const PipelineConfig& c) -> std::optional<std::string> {
          return c.skip_invalid_geometry ? "true" : "false";
        }};

    f["io.input"] = path([](PipelineConfig& c) -> std::optional<std::string>& { return c.input; });
    f["io.output"] = path([](PipelineConfig& c) -> std::optional<std::string>& { return c.output; });
    f["io.overlay"] = path([](PipelineConfig& c) -> std::optional<std::string>& { return c.overlay; });
    f["io.log"] = path([](PipelineConfig& c) -> std::optional<std::string>& { return c.log; });
    f["output.overlay"] = {
        [](PipelineConfig& c, std::string_view k, std::string_view v) { c.overlay_enabled = parse_bool(k, v); },
        [](const PipelineConfig&) -> std::optional<std::string> { return std::nullopt; }};
    return f;
  }();
  return table;
}

void check_ransac(const RansacConfig& r, int minimal, const char* name) {
  try {
    r.validate(minimal);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + ": " + e.message());
  }
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  const auto it = fields().find(std::string(key));
  if (it == fields().end()) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + std::string(key) + "'");
  it->second.set(*this, key, value);
}

std::map<std::string, std::string> PipelineConfig::echo() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) {
    if (auto v = f.get(*this)) out.emplace(k, std::move(*v));
  }
  return out;
}

void PipelineConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(refine.residual_tol) || !positive(refine.angle_tol) || !positive(refine.dist_tol)) {
    throw Error(ErrorCode::InvalidArgument, "refine tolerances must be > 0");
  }
  check_ransac(refine.side_ransac, 2, "refine.side_ransac");
  check_ransac(refine.group_ransac, 2, "refine.group_ransac");
  if (cluster.n_columns < 1 || cluster.n_columns > 4096) {
    throw Error(ErrorCode::InvalidArgument, "cluster.n_columns must lie in [1, 4096]");
  }
  if (!positive(cluster.scatter_tol) || !positive(cluster.min_width) || !positive(cluster.consistency_tol) ||
      !positive(cluster.parallel_tol_deg)) {
    throw Error(ErrorCode::InvalidArgument, "cluster tolerances must be > 0");
  }
  check_ransac(cluster.vp_ransac, 2, "cluster.vp_ransac");
  check_ransac(rectify.consensus, 1, "rectify.consensus");
  quality.validate();
}

RefineConfig PipelineConfig::seeded_refine() const {
  RefineConfig r = refine;
  r.side_ransac.seed = derive_seed(seed, 1);
  r.group_ransac.seed = derive_seed(seed, 2);
  return r;
}

ClusterConfig PipelineConfig::seeded_cluster() const {
  ClusterConfig c = cluster;
  c.vp_ransac.seed = derive_seed(seed, 3);
  return c;
}

RectifyConfig PipelineConfig::seeded_rectify() const {
  RectifyConfig r = rectify;
  r.consensus.seed = derive_seed(seed, 4);
  return r;
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(line_no) + ": empty key or value");
    }
    try {
      base.set(key, value);
    } catch (const Error& e) {
      throw Error(e.code(), "config line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  base.validate();
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  return parse_config(read_text_file(path), std::move(base));
}

std::string format_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.echo()) out += k + " = " + v + "\n";
  return out;
}

}  // namespace drywall
