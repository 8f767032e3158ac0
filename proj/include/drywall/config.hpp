#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drywall/cluster.hpp"
#include "drywall/quality.hpp"
#include "drywall/rectify.hpp"
#include "drywall/refine.hpp"

namespace drywall {

struct PipelineConfig {
  RefineConfig refine;
  ClusterConfig cluster;
  RectifyConfig rectify;
  QualityConfig quality;
  // Mixed into every module's RANSAC seed.
  std::uint64_t seed = 0;
  bool skip_invalid_geometry = false;

  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> overlay;
  std::optional<std::string> log;
  bool overlay_enabled = false;

  // Throws InvalidArgument for out-of-range values.
  void validate() const;

  // Every key with its canonical value text; paths are left out.
  std::map<std::string, std::string> echo() const;

  // Applies one `key = value` assignment. Unknown keys and bad values throw.
  void set(std::string_view key, std::string_view value);

  // Module configs with seeds derived from `seed`.
  RefineConfig seeded_refine() const;
  ClusterConfig seeded_cluster() const;
  RectifyConfig seeded_rectify() const;
};

std::vector<std::string> config_keys();

// Flat text: one `dotted.key = value` per line, `#` starts a comment.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
std::string format_config(const PipelineConfig& cfg);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace drywall
