#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "drywall/refine.hpp"
#include "drywall/synth.hpp"

namespace drywall {

inline constexpr int kFormatVersion = 1;

struct ImageInfo {
  std::string id;
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct AnnotationDocument {
  ImageInfo image;
  std::vector<RawDetection> elements;

  friend bool operator==(const AnnotationDocument&, const AnnotationDocument&) = default;
};

struct LoadOptions {
  // Drop elements with broken outlines (reported in `warnings`) instead of failing.
  bool skip_invalid_geometry = false;
};

struct LoadResult {
  AnnotationDocument document;
  std::vector<std::string> warnings;
};

// Checks the RawDetection outline invariants; throws GeometryError naming the element.
void validate_outline(const RawDetection& d);

nlohmann::json annotations_to_json(const AnnotationDocument& doc);
LoadResult annotations_from_json(const nlohmann::json& j, const LoadOptions& opts = {});
LoadResult parse_annotations(std::string_view text, const LoadOptions& opts = {});
LoadResult load_annotations(const std::filesystem::path& path, const LoadOptions& opts = {});

nlohmann::json ground_truth_to_json(const SceneTruth& truth);

struct EmittedAnnotations {
  nlohmann::json annotations;
  std::optional<nlohmann::json> ground_truth;
};

EmittedAnnotations emit_annotations(const ImageInfo& image, const std::vector<RawDetection>& detections,
                                    const SceneTruth* truth = nullptr);

// Writes `text` to `path` through a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace drywall
