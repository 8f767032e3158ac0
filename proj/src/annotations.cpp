#include "drywall/annotations.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace drywall {

using nlohmann::json;

namespace {

std::string element_name(std::int64_t id) { return "element " + std::to_string(id); }

std::string element_name(const json& el, std::size_t index) {
  if (el.is_object() && el.contains("id") && el["id"].is_number_integer()) {
    return element_name(el["id"].get<std::int64_t>());
  }
  return "element #" + std::to_string(index);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::SchemaError, where + ": missing field '" + key + "'");
  }
  return obj[key];
}

void check_version(const json& j) {
  if (!j.contains("format_version")) return;
  const auto& v = j["format_version"];
  if (!v.is_number_integer() || v.get<std::int64_t>() != kFormatVersion) {
    throw Error(ErrorCode::SchemaError, "unsupported format_version " + v.dump());
  }
}

ImageInfo parse_image(const json& j) {
  const json& img = require(j, "image", "document");
  if (!img.is_object()) throw Error(ErrorCode::SchemaError, "image: expected an object");
  ImageInfo info;
  const json& id = require(img, "id", "image");
  const json& width = require(img, "width", "image");
  const json& height = require(img, "height", "image");
  if (!id.is_string()) throw Error(ErrorCode::SchemaError, "image.id: expected a string");
  if (!width.is_number_integer() || !height.is_number_integer()) {
    throw Error(ErrorCode::SchemaError, "image.width/height: expected integers");
  }
  info.id = id.get<std::string>();
  const auto w = width.get<std::int64_t>();
  const auto h = height.get<std::int64_t>();
  if (w <= 0 || h <= 0 || w > 1'000'000 || h > 1'000'000) {
    throw Error(ErrorCode::SchemaError, "image.width/height: out of range");
  }
  info.width = static_cast<int>(w);
  info.height = static_cast<int>(h);
  return info;
}

RawDetection parse_element(const json& el, std::size_t index) {
  const std::string where = element_name(el, index);
  if (!el.is_object()) throw Error(ErrorCode::SchemaError, where + ": expected an object");
  RawDetection d;
  const json& id = require(el, "id", where);
  if (!id.is_number_integer()) throw Error(ErrorCode::SchemaError, where + ": id must be an integer");
  d.id = id.get<std::int64_t>();

  const json& label = require(el, "label", where);
  if (!label.is_string()) throw Error(ErrorCode::SchemaError, where + ": label must be a string");
  const auto parsed = parse_label(label.get<std::string>());
  if (!parsed) throw Error(ErrorCode::SchemaError, where + ": unknown label '" + label.get<std::string>() + "'");
  d.label = *parsed;

  const json& conf = require(el, "confidence", where);
  if (!conf.is_number()) throw Error(ErrorCode::SchemaError, where + ": confidence must be a number");
  d.confidence = conf.get<double>();
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw Error(ErrorCode::SchemaError, where + ": confidence outside [0, 1]");
  }

  const json& poly = require(el, "polygon", where);
  if (!poly.is_array()) throw Error(ErrorCode::SchemaError, where + ": polygon must be an array");
  for (const auto& v : poly) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw Error(ErrorCode::SchemaError, where + ": polygon vertices must be [x, y] number pairs");
    }
    d.outline.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  return d;
}

}  // namespace

void validate_outline(const RawDetection& d) {
  const std::string where = element_name(d.id);
  if (d.outline.size() < 4) throw Error(ErrorCode::GeometryError, where + ": outline has fewer than 4 vertices");
  for (const auto& p : d.outline) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::GeometryError, where + ": non-finite vertex");
    }
  }
  if (!is_simple(d.outline)) throw Error(ErrorCode::GeometryError, where + ": outline is self-intersecting");
  if (!(std::abs(signed_area(d.outline)) > 0.0)) throw Error(ErrorCode::GeometryError, where + ": zero-area outline");
}

json annotations_to_json(const AnnotationDocument& doc) {
  json elements = json::array();
  for (const auto& d : doc.elements) {
    json poly = json::array();
    for (const auto& p : d.outline) poly.push_back({p.x, p.y});
    elements.push_back({{"id", d.id},
                        {"label", std::string(to_string(d.label))},
                        {"confidence", d.confidence},
                        {"polygon", std::move(poly)}});
  }
  return {{"format_version", kFormatVersion},
          {"image", {{"id", doc.image.id}, {"width", doc.image.width}, {"height", doc.image.height}}},
          {"elements", std::move(elements)}};
}

LoadResult annotations_from_json(const json& j, const LoadOptions& opts) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "document: expected an object");
  check_version(j);
  LoadResult out;
  out.document.image = parse_image(j);
  const json& elements = require(j, "elements", "document");
  if (!elements.is_array()) throw Error(ErrorCode::SchemaError, "elements: expected an array");
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    RawDetection d = parse_element(elements[i], i);
    if (!seen.insert(d.id).second) {
      throw Error(ErrorCode::SchemaError, element_name(d.id) + ": duplicate id");
    }
    try {
      validate_outline(d);
    } catch (const Error& e) {
      if (!opts.skip_invalid_geometry) throw;
      out.warnings.push_back(std::string(e.what()) + " (skipped)");
      continue;
    }
    out.document.elements.push_back(std::move(d));
  }
  return out;
}

LoadResult parse_annotations(std::string_view text, const LoadOptions& opts) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return annotations_from_json(j, opts);
}

LoadResult load_annotations(const std::filesystem::path& path, const LoadOptions& opts) {
  return parse_annotations(read_text_file(path), opts);
}

json ground_truth_to_json(const SceneTruth& truth) {
  auto quad_json = [](const std::array<Point2, 4>& q) {
    json a = json::array();
    for (const auto& p : q) a.push_back({p.x, p.y});
    return a;
  };
  json walls = json::array();
  for (std::size_t w = 0; w < truth.walls.size(); ++w) {
    const auto& wall = truth.walls[w];
    const auto h = wall.h_true.row_major();
    walls.push_back({{"id", w},
                     {"h_true", json(std::vector<double>(h.begin(), h.end()))},
                     {"vp", {wall.vp.u, wall.vp.v, wall.vp.w}},
                     {"corners", quad_json(wall.corners_image)},
                     {"size", {wall.size.width, wall.size.height}},
                     {"yaw_deg", wall.yaw_deg}});
  }
  json elements = json::array();
  for (const auto& e : truth.elements) {
    elements.push_back({{"id", e.id},
                        {"label", std::string(to_string(e.label))},
                        {"wall", e.wall},
                        {"image_quad", quad_json(e.image_quad)},
                        {"wall_quad", quad_json(e.wall_quad)},
                        {"axis_angle", e.axis_angle}});
  }
  return {{"format_version", kFormatVersion},
          {"image_size", {truth.image_size.width, truth.image_size.height}},
          {"walls", std::move(walls)},
          {"elements", std::move(elements)}};
}

EmittedAnnotations emit_annotations(const ImageInfo& image, const std::vector<RawDetection>& detections,
                                    const SceneTruth* truth) {
  EmittedAnnotations out;
  out.annotations = annotations_to_json({image, detections});
  if (truth) out.ground_truth = ground_truth_to_json(*truth);
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::IoError, "write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot replace " + path.string());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw Error(ErrorCode::IoError, "read failed for " + path.string());
  return ss.str();
}

}  // namespace drywall
