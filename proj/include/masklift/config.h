#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "masklift/correspondence.h"
#include "masklift/frontend.h"
#include "masklift/label_field.h"
#include "masklift/refine.h"
#include "masklift/scene.h"

namespace masklift {

// Flat `key = value` text with `[section]` headers; `#` starts a comment.
// Keys are addressed as `section.key`; a key may repeat (e.g. inline
// primitives), in which case every value is kept in order.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::vector<std::string>& all(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::vector<std::string> keys() const;

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

struct Thresholds {
  double tau_global = 0.25;
  double tau_local = 0.8;
  int tau_community = 2;
  double tau_area = 0.15;
  double tau_merge = 0.75;
  int min_frames = 2;
  double leiden_resolution = 0.0;
};

struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  int threads = 0;

  // Scene: exactly one of a file path, inline primitive lines, or a seeded
  // random layout.
  std::string scene_path;
  std::vector<std::string> scene_inline;
  int random_primitives = 0;
  double random_extent = 2.0;

  int width = 128;
  int height = 128;
  double fov_deg = 60.0;

  std::string trajectory = "orbit";
  int frames = 24;
  double orbit_radius = 3.5;
  double orbit_height = 1.5;
  double start_azimuth_deg = 0.0;
  double sweep_deg = 360.0;
  Vec3 line_start = Vec3::Zero();
  Vec3 line_end = Vec3::Zero();

  CorruptionParams corruption;
  CorruptionParams fast_frontend;

  MatchParams matching;
  int covisibility_stride = 2;

  Thresholds thresholds;

  std::vector<int> field_levels{16, 32, 64, 128};
  double field_padding = 0.1;
  double oracle_sigma = 50.0;

  TrainConfig train;
  bool resume = false;
  RenderConfig render;

  RedundancyParams redundancy;
  int refine_min_region_px = 16;
  bool merge_iterate = false;
  LocParams loc;

  // Stage seed derived from the master seed and a stage name.
  std::uint64_t stage_seed(const std::string& stage) const;
  void validate() const;
};

// Throws kConfigError naming the offending key.
PipelineConfig parse_pipeline_config(const std::string& text,
                                     const std::string& base_dir = ".");
PipelineConfig load_pipeline_config(const std::string& path);

// Every recognized key with its default and meaning, for --help.
std::string config_reference();

}  // namespace masklift
