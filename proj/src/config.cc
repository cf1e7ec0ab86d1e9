#include "masklift/config.h"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "masklift/error.h"
#include "masklift/io.h"
#include "masklift/rng.h"

namespace masklift {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  fail(ErrorCode::kConfigError, key + ": " + why);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad(key, "expected a number, got '" + v + "'");
  }
  if (pos != v.size()) bad(key, "expected a number, got '" + v + "'");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    bad(key, "expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    bad(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, "expected true/false, got '" + v + "'");
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  std::string a, b, c, extra;
  if (!(ss >> a >> b >> c) || (ss >> extra)) bad(key, "expected three numbers");
  return Vec3(to_double(key, a), to_double(key, b), to_double(key, c));
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  std::vector<int> out;
  std::string tok;
  while (ss >> tok) out.push_back(static_cast<int>(to_int(key, tok)));
  if (out.empty()) bad(key, "expected at least one integer");
  return out;
}

struct KeySpec {
  std::string key;
  std::string default_text;
  std::string doc;
  std::function<void(PipelineConfig&, const std::string& key, const std::string& value)> set;
};

using C = PipelineConfig;

#define ML_NUM(field) [](C& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }
#define ML_INT(field) [](C& c, const std::string& k, const std::string& v) { c.field = static_cast<int>(to_int(k, v)); }
#define ML_BOOL(field) [](C& c, const std::string& k, const std::string& v) { c.field = to_bool(k, v); }
#define ML_VEC(field) [](C& c, const std::string& k, const std::string& v) { c.field = to_vec3(k, v); }


const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"run.seed", "(required)", "master seed; every stage derives its own stream from it",
       [](C& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"run.out", "out", "output directory",
       [](C& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {"run.threads", "0", "worker threads, 0 = available cores", ML_INT(threads)},

      {"scene.path", "", "scene file (`sphere id cx cy cz r` / `box id x0 y0 z0 x1 y1 z1`)",
       [](C& c, const std::string&, const std::string& v) { c.scene_path = v; }},
      {"scene.primitive", "", "inline primitive line, repeatable",
       [](C& c, const std::string&, const std::string& v) { c.scene_inline.push_back(v); }},
      {"scene.random_count", "0", "seeded random layout with this many primitives",
       ML_INT(random_primitives)},
      {"scene.random_extent", "2.0", "side of the cube holding the random layout",
       ML_NUM(random_extent)},

      {"camera.width", "128", "image width in pixels", ML_INT(width)},
      {"camera.height", "128", "image height in pixels", ML_INT(height)},
      {"camera.fov_deg", "60", "horizontal field of view", ML_NUM(fov_deg)},

      {"trajectory.kind", "orbit", "orbit or line",
       [](C& c, const std::string&, const std::string& v) { c.trajectory = v; }},
      {"trajectory.frames", "24", "number of frames", ML_INT(frames)},
      {"trajectory.radius", "3.5", "orbit radius around the scene center", ML_NUM(orbit_radius)},
      {"trajectory.height", "1.5", "orbit height above the scene center", ML_NUM(orbit_height)},
      {"trajectory.start_azimuth_deg", "0", "orbit start azimuth", ML_NUM(start_azimuth_deg)},
      {"trajectory.sweep_deg", "360", "orbit sweep; step is sweep / frames", ML_NUM(sweep_deg)},
      {"trajectory.start", "0 0 0", "line start point", ML_VEC(line_start)},
      {"trajectory.end", "0 0 0", "line end point (cameras look at the scene center)",
       ML_VEC(line_end)},

      {"corruption.permute", "true", "randomly renumber regions per frame",
       ML_BOOL(corruption.permute)},
      {"corruption.split_prob", "0", "probability of a straight-line split per piece",
       ML_NUM(corruption.split_prob)},
      {"corruption.max_splits", "0", "split recursion depth", ML_INT(corruption.max_splits)},
      {"corruption.dropout_prob", "0", "probability a region is dropped",
       ML_NUM(corruption.dropout_prob)},
      {"corruption.erosion_radius", "0", "square erosion radius in pixels",
       ML_INT(corruption.erosion_radius)},
      {"corruption.min_region_px", "1", "pieces smaller than this are cleared",
       ML_INT(corruption.min_region_px)},

      {"fast_frontend.split_prob", "0", "split probability of the InstanceLoc frontend",
       ML_NUM(fast_frontend.split_prob)},
      {"fast_frontend.max_splits", "0", "split depth of the InstanceLoc frontend",
       ML_INT(fast_frontend.max_splits)},
      {"fast_frontend.dropout_prob", "0", "dropout of the InstanceLoc frontend",
       ML_NUM(fast_frontend.dropout_prob)},
      {"fast_frontend.erosion_radius", "0", "erosion of the InstanceLoc frontend",
       ML_INT(fast_frontend.erosion_radius)},
      {"fast_frontend.min_region_px", "1", "minimum piece of the InstanceLoc frontend",
       ML_INT(fast_frontend.min_region_px)},

      {"matching.keypoints", "2000", "keypoints sampled per frame pair",
       ML_INT(matching.n_keypoints)},
      {"matching.noise_sigma_px", "0", "gaussian noise on matched pixels",
       ML_NUM(matching.noise_sigma_px)},
      {"matching.outlier_rate", "0", "fraction of matches replaced by random pixels",
       ML_NUM(matching.outlier_rate)},
      {"matching.covisibility_stride", "2", "pixel stride of the covisibility score",
       ML_INT(covisibility_stride)},

      {"thresholds.tau_global", "0.25", "visual pair covisibility threshold",
       ML_NUM(thresholds.tau_global)},
      {"thresholds.tau_local", "0.8", "mask association matching score threshold",
       ML_NUM(thresholds.tau_local)},
      {"thresholds.tau_community", "2", "minimum community size in masks",
       ML_INT(thresholds.tau_community)},
      {"thresholds.tau_area", "0.15", "redundancy edge area fraction",
       ML_NUM(thresholds.tau_area)},
      {"thresholds.tau_merge", "0.75", "merge ratio threshold", ML_NUM(thresholds.tau_merge)},
      {"thresholds.min_frames", "2", "minimum distinct frames per community",
       ML_INT(thresholds.min_frames)},
      {"thresholds.leiden_resolution", "0", "CPM resolution of community detection",
       ML_NUM(thresholds.leiden_resolution)},

      {"field.levels", "16 32 64 128", "nodes along the longest axis, per level",
       [](C& c, const std::string& k, const std::string& v) { c.field_levels = to_int_list(k, v); }},
      {"field.padding", "0.1", "margin around the scene bounds", ML_NUM(field_padding)},

      {"train.mode", "oracle", "oracle (density painted from geometry) or depth",
       [](C& c, const std::string& k, const std::string& v) {
         if (v == "oracle") {
           c.train.density_mode = DensityMode::kOracle;
         } else if (v == "depth") {
           c.train.density_mode = DensityMode::kDepthSupervised;
         } else {
           bad(k, "expected oracle or depth");
         }
       }},
      {"train.iterations", "2000", "gradient steps", ML_INT(train.iterations)},
      {"train.rays", "512", "rays per batch", ML_INT(train.rays_per_batch)},
      {"train.lr_labels", "1000", "label grid step size", ML_NUM(train.lr_labels)},
      {"train.lr_density", "20", "density grid step size (depth mode)", ML_NUM(train.lr_density)},
      {"train.background_fraction", "0.1", "share of each batch drawn from background pixels",
       ML_NUM(train.background_fraction)},
      {"train.depth_weight", "0.1", "depth term weight (depth mode)", ML_NUM(train.depth_weight)},
      {"train.oracle_sigma", "50", "painted density inside objects (oracle mode)",
       ML_NUM(oracle_sigma)},
      {"train.resume", "false", "load field.lf from the output directory instead of training",
       ML_BOOL(resume)},

      {"render.samples", "64", "samples per ray", ML_INT(render.samples_per_ray)},
      {"render.near", "0.05", "near clip", ML_NUM(render.near)},
      {"render.far", "100", "far clip", ML_NUM(render.far)},
      {"render.stratified", "false", "jitter samples during training", ML_BOOL(render.stratified)},
      {"render.background_logit", "10", "background logit outside the field",
       ML_NUM(render.background_logit)},

      {"refine.views", "20", "random views K for the redundancy graph", ML_INT(redundancy.views)},
      {"refine.downsample", "2", "render downsample of the redundancy views",
       ML_INT(redundancy.downsample)},
      {"refine.jitter_translation", "0.05", "view jitter std-dev in meters",
       ML_NUM(redundancy.jitter_translation)},
      {"refine.jitter_rotation_deg", "2", "view jitter std-dev in degrees",
       ML_NUM(redundancy.jitter_rotation_deg)},
      {"refine.min_region_px", "16", "frontend pieces below this are ignored when counting overlaps",
       ML_INT(refine_min_region_px)},
      {"refine.merge_iterate", "false", "contract and repeat merging until stable",
       ML_BOOL(merge_iterate)},

      {"loc.samples_per_region", "48", "field renders per frontend region",
       ML_INT(loc.samples_per_region)},
      {"loc.exhaustive", "false", "render every region pixel", ML_BOOL(loc.exhaustive)},
  };
  return table;
}

#undef ML_NUM
#undef ML_INT
#undef ML_BOOL
#undef ML_VEC


void check_unit(const std::string& key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) bad(key, "must lie in [0, 1]");
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile out;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') bad(where, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) bad(where, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad(where, "expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) bad(where, "missing key");
    const std::string full = section.empty() ? key : section + "." + key;
    out.values_[full].push_back(trim(line.substr(eq + 1)));
  }
  return out;
}

const std::vector<std::string>& ConfigFile::all(const std::string& key) const {
  static const std::vector<std::string> empty;
  const auto it = values_.find(key);
  return it == values_.end() ? empty : it->second;
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
  const auto& v = all(key);
  if (v.empty()) return std::nullopt;
  return v.back();
}

std::vector<std::string> ConfigFile::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
  if (!seed) bad("run.seed", "missing (required)");
  return stream_key({*seed, fnv1a64(stage)});
}

void PipelineConfig::validate() const {
  if (!seed) bad("run.seed", "missing (required)");
  if (threads < 0) bad("run.threads", "must be >= 0");
  if (out_dir.empty()) bad("run.out", "empty output directory");
  const int sources = (!scene_path.empty()) + (!scene_inline.empty()) + (random_primitives > 0);
  if (sources == 0) bad("scene.path", "missing scene spec (path, primitive or random_count)");
  if (sources > 1) bad("scene.path", "give exactly one of path, primitive, random_count");
  if (random_primitives < 0) bad("scene.random_count", "must be >= 0");
  if (!(random_extent > 0.0)) bad("scene.random_extent", "must be positive");
  if (width < 2) bad("camera.width", "must be >= 2");
  if (height < 2) bad("camera.height", "must be >= 2");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) bad("camera.fov_deg", "must lie in (0, 180)");
  if (trajectory != "orbit" && trajectory != "line") bad("trajectory.kind", "expected orbit or line");
  if (frames < 2) bad("trajectory.frames", "must be >= 2");
  if (trajectory == "orbit" && !(orbit_radius > 0.0)) bad("trajectory.radius", "must be positive");
  if (trajectory == "line" && line_start == line_end) {
    bad("trajectory.start", "line start and end coincide");
  }

  auto check_corruption = [](const std::string& p, const CorruptionParams& c) {
    check_unit(p + ".split_prob", c.split_prob);
    check_unit(p + ".dropout_prob", c.dropout_prob);
    if (c.max_splits < 0) bad(p + ".max_splits", "must be >= 0");
    if (c.erosion_radius < 0) bad(p + ".erosion_radius", "must be >= 0");
    if (c.min_region_px < 1) bad(p + ".min_region_px", "must be >= 1");
  };
  check_corruption("corruption", corruption);
  check_corruption("fast_frontend", fast_frontend);

  if (matching.n_keypoints < 1) bad("matching.keypoints", "must be >= 1");
  if (!(matching.noise_sigma_px >= 0.0)) bad("matching.noise_sigma_px", "must be >= 0");
  check_unit("matching.outlier_rate", matching.outlier_rate);
  if (covisibility_stride < 1) bad("matching.covisibility_stride", "must be >= 1");

  check_unit("thresholds.tau_global", thresholds.tau_global);
  check_unit("thresholds.tau_local", thresholds.tau_local);
  if (thresholds.tau_community < 1) bad("thresholds.tau_community", "must be >= 1");
  check_unit("thresholds.tau_area", thresholds.tau_area);
  check_unit("thresholds.tau_merge", thresholds.tau_merge);
  if (thresholds.min_frames < 1) bad("thresholds.min_frames", "must be >= 1");
  if (!(thresholds.leiden_resolution >= 0.0)) bad("thresholds.leiden_resolution", "must be >= 0");

  if (field_levels.empty()) bad("field.levels", "needs at least one level");
  for (int n : field_levels) {
    if (n < 2 || n > 512) bad("field.levels", "each level must lie in [2, 512]");
  }
  if (!(field_padding >= 0.0)) bad("field.padding", "must be >= 0");
  if (!(oracle_sigma > 0.0)) bad("train.oracle_sigma", "must be positive");

  if (train.iterations < 0) bad("train.iterations", "must be >= 0");
  if (train.rays_per_batch < 1) bad("train.rays", "must be >= 1");
  if (!(train.lr_labels > 0.0)) bad("train.lr_labels", "must be positive");
  if (!(train.lr_density > 0.0)) bad("train.lr_density", "must be positive");
  check_unit("train.background_fraction", train.background_fraction);
  if (!(train.depth_weight >= 0.0)) bad("train.depth_weight", "must be >= 0");

  if (render.samples_per_ray < 1) bad("render.samples", "must be >= 1");
  if (!(render.near >= 0.0)) bad("render.near", "must be >= 0");
  if (!(render.far > render.near)) bad("render.far", "must exceed render.near");

  if (redundancy.views < 0) bad("refine.views", "must be >= 0");
  if (redundancy.downsample < 1) bad("refine.downsample", "must be >= 1");
  if (refine_min_region_px < 1) bad("refine.min_region_px", "must be >= 1");
  if (!(redundancy.jitter_translation >= 0.0)) bad("refine.jitter_translation", "must be >= 0");
  if (!(redundancy.jitter_rotation_deg >= 0.0)) bad("refine.jitter_rotation_deg", "must be >= 0");
  if (loc.samples_per_region < 1) bad("loc.samples_per_region", "must be >= 1");
}

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& base_dir) {
  const ConfigFile file = ConfigFile::parse(text);
  PipelineConfig cfg;
  const auto& table = key_table();
  for (const auto& key : file.keys()) {
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const KeySpec& s) { return s.key == key; });
    if (it == table.end()) bad(key, "unknown key");
    const auto& values = file.all(key);
    if (key != "scene.primitive" && values.size() > 1) bad(key, "given more than once");
    for (const auto& v : values) it->set(cfg, key, v);
  }
  if (!cfg.scene_path.empty() && std::filesystem::path(cfg.scene_path).is_relative()) {
    cfg.scene_path = (std::filesystem::path(base_dir) / cfg.scene_path).string();
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::kConfigError, "cannot read config " + path);
  }
  return parse_pipeline_config(text, std::filesystem::path(path).parent_path().string());
}

std::string config_reference() {
  std::ostringstream out;
  std::string section;
  for (const auto& s : key_table()) {
    const auto dot = s.key.find('.');
    const std::string sec = s.key.substr(0, dot);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << "  " << s.key.substr(dot + 1) << " = " << s.default_text << "\n      " << s.doc
        << '\n';
  }
  return out.str();
}

}  // namespace masklift
