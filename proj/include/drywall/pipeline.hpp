#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drywall/annotations.hpp"
#include "drywall/config.hpp"

namespace drywall {

inline constexpr const char* kPipelineVersion = "1.0.0";

struct ElementRecord {
  std::int64_t id = 0;
  ClassLabel label = ClassLabel::WoodPanel;
  double confidence = 1.0;
  std::vector<Point2> raw;
  std::optional<std::array<Point2, 4>> refined;
  std::optional<std::array<Point2, 4>> rectified;
  bool unrefined = false;

  friend bool operator==(const ElementRecord&, const ElementRecord&) = default;
};

struct SegmentReport {
  int id = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  std::array<Point2, 4> corners{};  // wall corners in the image
  Homography h_wall;                // image -> wall
  Size2 wall_size;
  VanishingPoint vp;
  std::vector<ElementRecord> members;
  QualityReport quality;
  std::vector<std::string> warnings;

  friend bool operator==(const SegmentReport&, const SegmentReport&) = default;
};

struct AnalysisReport {
  int format_version = kFormatVersion;
  std::string pipeline_version = kPipelineVersion;
  ImageInfo image;
  std::vector<SegmentReport> segments;
  std::vector<ElementRecord> unassigned;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> config;

  friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

// refine -> cluster -> rectify -> quality. Failures of single elements or
// segments become warnings; only invalid configuration throws.
AnalysisReport run_pipeline(const AnnotationDocument& doc, const PipelineConfig& cfg);

nlohmann::json report_to_json(const AnalysisReport& report);
AnalysisReport report_from_json(const nlohmann::json& j);
std::string serialize_report(const AnalysisReport& report);
AnalysisReport parse_report(std::string_view text);
void write_report(const AnalysisReport& report, const std::filesystem::path& path);
AnalysisReport read_report(const std::filesystem::path& path);

// SVG with raw outlines, refined quads, segment boxes and rectified panels.
std::string render_overlay(const AnalysisReport& report);
void write_overlay(const AnalysisReport& report, const std::filesystem::path& path);

// ISO-8601 UTC, second resolution.
std::string utc_timestamp();

// One JSON line per segment, appended under an exclusive file lock.
// Returns the number of entries written.
std::size_t append_progress(const AnalysisReport& report, const std::filesystem::path& log_path,
                            const std::optional<std::string>& timestamp = std::nullopt);

}  // namespace drywall
