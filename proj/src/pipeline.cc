#include "masklift/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "masklift/error.h"
#include "masklift/io.h"
#include "masklift/parallel.h"

namespace masklift {

namespace fs = std::filesystem;

namespace {

std::string frame_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu%s", i, ext);
  return buf;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Rethrows a stage failure with the stage name prefixed, keeping the code.
template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what());
  }
}

std::vector<LabelImage> gt_images(const SceneData& data) {
  std::vector<LabelImage> out;
  out.reserve(data.frames.size());
  for (const auto& f : data.frames) out.push_back(f.instance_image);
  return out;
}

std::vector<Camera> cameras_of(const SceneData& data) {
  std::vector<Camera> out;
  out.reserve(data.frames.size());
  for (const auto& f : data.frames) out.push_back(f.camera);
  return out;
}

std::string report_text(const PQReport& r) {
  std::ostringstream ss;
  write_report(ss, r);
  return ss.str();
}

void write_images(const std::string& dir, const std::vector<LabelImage>& images) {
  ensure_directory(dir);
  for (std::size_t i = 0; i < images.size(); ++i) write_pgm16(join(dir, frame_name(i, ".pgm")), images[i]);
}

std::vector<LabelImage> read_images(const std::string& dir, std::size_t count) {
  std::vector<LabelImage> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(read_pgm16(join(dir, frame_name(i, ".pgm"))));
  return out;
}

// `relative/path hash` per file under `dir`, sorted, skipping `skip` names.
void write_manifest(const std::string& dir, const std::string& name,
                    const std::vector<std::string>& skip) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == name || std::find(skip.begin(), skip.end(), rel) != skip.end()) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::ostringstream ss;
  for (const auto& f : files) ss << f << ' ' << hash_file_hex(join(dir, f)) << '\n';
  write_text_file(join(dir, name), ss.str());
}

void apply_threads(const PipelineConfig& cfg) {
  if (cfg.threads > 0) set_thread_count(cfg.threads);
}

CorruptionParams with_seed(CorruptionParams p, std::uint64_t seed) {
  p.seed = seed;
  return p;
}

}  // namespace

Scene resolve_scene(const PipelineConfig& cfg) {
  if (!cfg.scene_path.empty()) return read_scene_file(cfg.scene_path);
  if (!cfg.scene_inline.empty()) {
    std::ostringstream ss;
    for (const auto& line : cfg.scene_inline) ss << line << '\n';
    std::istringstream in(ss.str());
    return parse_scene(in);
  }
  if (cfg.random_primitives > 0) {
    return random_scene(cfg.stage_seed("scene"), cfg.random_primitives, cfg.random_extent);
  }
  fail(ErrorCode::kConfigError, "scene.path: missing scene spec");
}

std::vector<Camera> trajectory_cameras(const PipelineConfig& cfg, const Scene& scene) {
  const Intrinsics k = Intrinsics::from_fov(cfg.width, cfg.height, cfg.fov_deg);
  std::vector<Pose> poses;
  if (cfg.trajectory == "orbit") {
    OrbitParams p;
    p.center = scene.bounds.center();
    p.radius = cfg.orbit_radius;
    p.height = cfg.orbit_height;
    p.start_azimuth_deg = cfg.start_azimuth_deg;
    p.sweep_deg = cfg.sweep_deg;
    poses = generate_orbit(cfg.frames, p);
  } else {
    poses = generate_line(cfg.frames, LineParams{cfg.line_start, cfg.line_end, scene.bounds.center()});
  }
  std::vector<Camera> out;
  for (const auto& pose : poses) out.push_back(Camera{pose, k});
  return out;
}

SceneData synthesize(const PipelineConfig& cfg) {
  cfg.validate();
  SceneData data;
  data.scene = resolve_scene(cfg);
  const CorruptionParams corruption = with_seed(cfg.corruption, cfg.stage_seed("corruption"));
  for (const auto& cam : trajectory_cameras(cfg, data.scene)) {
    data.frames.push_back(ray_cast(data.scene, cam));
    data.masks.push_back(corrupt(data.frames.back(), corruption, data.frames.size() - 1));
  }
  return data;
}

CorrespondenceResult run_correspondence(const PipelineConfig& cfg,
                                        const std::vector<GroundTruthFrame>& frames) {
  CorrespondenceResult out;
  out.pairs = select_pairs(frames, cfg.thresholds.tau_global, cfg.covisibility_stride);
  MatchParams mp = cfg.matching;
  mp.seed = cfg.stage_seed("matches");
  for (const auto& pair : out.pairs) {
    try {
      out.match_sets.push_back(generate_matches(pair, frames, mp));
    } catch (const Error& e) {
      // A frame with no foreground has nothing to match.
      if (e.code() != ErrorCode::kNoForeground) throw;
    }
  }
  return out;
}

InstanceMapResult run_instance_map(const PipelineConfig& cfg,
                                   const std::vector<InstanceMask>& masks,
                                   const std::vector<MatchSet>& match_sets) {
  InstanceMapResult out;
  out.graph = build_association_graph(masks, match_sets, cfg.thresholds.tau_local);
  out.partition = community_partition(out.graph, cfg.thresholds.leiden_resolution,
                                      cfg.stage_seed("leiden"));
  out.assignment = assign_labels(out.graph, out.partition, cfg.thresholds.tau_community,
                                 cfg.thresholds.min_frames);
  out.order = rasterization_order(out.assignment);
  out.pseudolabels = render_pseudolabels(masks, out.assignment, out.order);
  return out;
}

LabelField make_field(const PipelineConfig& cfg, const Scene& scene, Label label_count) {
  const Aabb bounds = scene.bounds.padded(cfg.field_padding);
  const Vec3 e = bounds.extent();
  const double longest = e.maxCoeff();
  std::vector<Resolution> levels;
  for (int n : cfg.field_levels) {
    Resolution r;
    for (int a = 0; a < 3; ++a) {
      r[a] = std::max(2, static_cast<int>(std::ceil(n * e[a] / longest - 1e-9)));
    }
    levels.push_back(r);
  }
  return LabelField(bounds, std::move(levels), label_count);
}

std::vector<LossRecord> run_lift(const PipelineConfig& cfg, LabelField& field,
                                 const SceneData& data,
                                 const std::vector<LabelImage>& pseudolabels) {
  TrainConfig tc = cfg.train;
  tc.seed = cfg.stage_seed("lift");
  const bool depth_mode = tc.density_mode == DensityMode::kDepthSupervised;
  if (!depth_mode) {
    const auto& finest = field.resolution(field.level_count() - 1);
    paint_density_from_oracle(field, voxel_instance_oracle(data.scene, field.bounds(), finest),
                              cfg.oracle_sigma);
  }
  std::vector<TrainingView> views;
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    TrainingView v{data.frames[i].camera, pseudolabels[i], std::nullopt};
    if (depth_mode) v.depth = data.frames[i].depth_image;
    views.push_back(std::move(v));
  }
  return train(field, views, tc, cfg.render);
}

RedundancyGraph run_redundancy(const PipelineConfig& cfg, const LabelField& field,
                               const SceneData& data) {
  RedundancyParams rp = cfg.redundancy;
  rp.tau_area = cfg.thresholds.tau_area;
  rp.seed = cfg.stage_seed("merge_views");
  if (rp.views == 0 || data.frames.empty()) {
    RedundancyGraph g;
    for (Label l = 1; l <= field.label_count(); ++l) g.add_node(l);
    return g;
  }
  const Scene& scene = data.scene;
  // Tiny pieces hold a handful of boundary pixels and are poor overlap evidence.
  CorruptionParams frontend = with_seed(cfg.fast_frontend, cfg.stage_seed("merge_frontend"));
  frontend.min_region_px = std::max(frontend.min_region_px, cfg.refine_min_region_px);
  return build_redundancy_graph(
      field, cameras_of(data), rp, frontend,
      cfg.render, [&scene](const Camera& cam) { return ray_cast(scene, cam).instance_image; });
}

std::vector<LabelImage> render_frames(const PipelineConfig& cfg, const LabelField& field,
                                      const std::vector<Camera>& cameras) {
  std::vector<LabelImage> out;
  out.reserve(cameras.size());
  for (const auto& cam : cameras) out.push_back(render_view(field, cam, cfg.render).labels);
  return out;
}

RunResult run_pipeline(const PipelineConfig& cfg, const SceneData& data, const LabelField* field) {
  cfg.validate();
  apply_threads(cfg);
  RunResult r;
  using clock = std::chrono::steady_clock;

  auto t0 = clock::now();
  r.correspondence = staged("correspondence", [&] { return run_correspondence(cfg, data.frames); });
  r.timings.push_back({"correspondence", seconds_since(t0)});

  t0 = clock::now();
  r.instance_map = staged("instance_map", [&] {
    return run_instance_map(cfg, data.masks, r.correspondence.match_sets);
  });
  r.timings.push_back({"instance_map", seconds_since(t0)});

  t0 = clock::now();
  const Label L = r.instance_map.assignment.label_count();
  if (field) {
    if (field->label_count() != L) {
      fail(ErrorCode::kShapeMismatch, "lift-train: checkpoint has " +
                                          std::to_string(field->label_count()) +
                                          " labels, instance map produced " + std::to_string(L));
    }
    r.field = *field;
  } else {
    r.field = make_field(cfg, data.scene, L);
    r.loss_trace = staged("lift-train", [&] {
      return run_lift(cfg, r.field, data, r.instance_map.pseudolabels);
    });
  }
  r.timings.push_back({"lift-train", seconds_since(t0)});

  t0 = clock::now();
  r.redundancy = staged("merge", [&] { return run_redundancy(cfg, r.field, data); });
  r.merge = staged("merge", [&] {
    return merge_labels(r.redundancy, cfg.thresholds.tau_merge, cfg.merge_iterate);
  });
  r.timings.push_back({"merge", seconds_since(t0)});

  t0 = clock::now();
  staged("render", [&] {
    r.lifted = render_frames(cfg, r.field, cameras_of(data));
    for (const auto& img : r.lifted) r.final_labels.push_back(apply_merge(img, r.merge));
    return 0;
  });
  r.timings.push_back({"render", seconds_since(t0)});

  const auto gt = gt_images(data);
  r.pseudolabel_report = scene_pq(r.instance_map.pseudolabels, gt);
  r.lifted_report = scene_pq(r.lifted, gt);
  r.final_report = scene_pq(r.final_labels, gt);
  return r;
}

void cmd_synth(const PipelineConfig& cfg) {
  cfg.validate();
  apply_threads(cfg);
  const std::string& out = cfg.out_dir;
  ensure_directory(out);
  const SceneData data = synthesize(cfg);
  const CorrespondenceResult corr = run_correspondence(cfg, data.frames);

  std::ostringstream scene_text;
  write_scene(scene_text, data.scene);
  write_text_file(join(out, "scene.txt"), scene_text.str());
  write_cameras_file(join(out, "cameras.txt"), cameras_of(data));
  ensure_directory(join(out, "gt"));
  ensure_directory(join(out, "depth"));
  ensure_directory(join(out, "masks"));
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    write_pgm16(join(out, "gt/" + frame_name(i, ".pgm")), data.frames[i].instance_image);
    write_depth(join(out, "depth/" + frame_name(i, ".d32")), data.frames[i].depth_image);
    write_mask(join(out, "masks/" + frame_name(i, ".pgm")), data.masks[i]);
  }
  write_matches_file(join(out, "matches.txt"), corr.match_sets);
  write_manifest(out, "manifest.txt", {});
}

SceneData load_synth(const PipelineConfig& cfg) {
  const std::string& out = cfg.out_dir;
  SceneData data;
  data.scene = read_scene_file(join(out, "scene.txt"));
  const auto cameras = read_cameras_file(join(out, "cameras.txt"));
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    GroundTruthFrame f;
    f.camera = cameras[i];
    f.instance_image = read_pgm16(join(out, "gt/" + frame_name(i, ".pgm")));
    f.depth_image = read_depth(join(out, "depth/" + frame_name(i, ".d32")));
    const auto& k = f.camera.intrinsics;
    if (f.instance_image.width != k.width || f.instance_image.height != k.height ||
        !f.depth_image.same_shape(f.instance_image)) {
      fail(ErrorCode::kShapeMismatch, "frame " + std::to_string(i) + " differs from its camera");
    }
    data.frames.push_back(std::move(f));
    data.masks.push_back(read_mask(join(out, "masks/" + frame_name(i, ".pgm"))));
    if (data.masks.back().width() != k.width || data.masks.back().height() != k.height) {
      fail(ErrorCode::kShapeMismatch, "mask " + std::to_string(i) + " differs from its camera");
    }
  }
  return data;
}

RunResult cmd_run(const PipelineConfig& cfg) {
  cfg.validate();
  const std::string& out = cfg.out_dir;
  ensure_directory(out);
  if (!fs::exists(join(out, "manifest.txt"))) cmd_synth(cfg);
  const SceneData data = load_synth(cfg);

  std::optional<LabelField> resumed;
  if (cfg.resume) resumed = load_field(join(out, "field.lf"));
  RunResult r = run_pipeline(cfg, data, resumed ? &*resumed : nullptr);

  write_images(join(out, "pseudolabels"), r.instance_map.pseudolabels);
  {
    std::ostringstream g, a, m, l, red;
    write_graph(g, r.instance_map.graph);
    write_text_file(join(out, "graph.txt"), g.str());
    write_assignment(a, r.instance_map.assignment);
    write_text_file(join(out, "assignment.txt"), a.str());
    write_merge_map(m, r.merge);
    write_text_file(join(out, "merge_map.txt"), m.str());
    write_loss_trace(l, r.loss_trace);
    if (!cfg.resume) write_text_file(join(out, "loss.csv"), l.str());
    red << "# a b count\n";
    for (const auto& [key, count] : r.redundancy.edges()) {
      red << key.first << ' ' << key.second << ' ' << count << '\n';
    }
    write_text_file(join(out, "redundancy.txt"), red.str());
  }
  if (!cfg.resume) save_field(join(out, "field.lf"), r.field);
  write_images(join(out, "lifted"), r.lifted);
  write_images(join(out, "final"), r.final_labels);
  write_text_file(join(out, "metrics_pseudolabel.txt"), report_text(r.pseudolabel_report));
  write_text_file(join(out, "metrics_lifted.txt"), report_text(r.lifted_report));
  write_text_file(join(out, "metrics.txt"), report_text(r.final_report));

  std::ostringstream t;
  t << std::fixed << std::setprecision(3);
  double total = 0.0;
  for (const auto& s : r.timings) {
    t << s.stage << ' ' << s.seconds << '\n';
    total += s.seconds;
  }
  t << "total " << total << '\n';
  write_text_file(join(out, "timings.txt"), t.str());
  // Timings vary run to run; everything else is deterministic.
  write_manifest(out, "run_manifest.txt", {"timings.txt", "loc_report.txt"});
  return r;
}

void cmd_loc(const PipelineConfig& cfg, const std::string& checkpoint,
             const std::string& cameras_path) {
  cfg.validate();
  apply_threads(cfg);
  const std::string& out = cfg.out_dir;
  ensure_directory(out);
  const auto cameras = read_cameras_file(cameras_path);
  std::ostringstream report;
  if (cameras.empty()) {
    report << "views=0\n";
    write_text_file(join(out, "loc_report.txt"), report.str());
    return;
  }
  const LabelField field = load_field(checkpoint);
  MergeMap merge = MergeMap::identity(field.label_count());
  if (fs::exists(join(out, "merge_map.txt"))) {
    std::istringstream in(read_text_file(join(out, "merge_map.txt")));
    merge = read_merge_map(in);
  }
  const Scene scene = resolve_scene(cfg);
  LocParams lp = cfg.loc;
  lp.seed = cfg.stage_seed("loc");
  const CorruptionParams frontend = with_seed(cfg.fast_frontend, cfg.stage_seed("loc_frontend"));

  ensure_directory(join(out, "loc"));
  std::vector<LabelImage> localized, rendered, gt;
  report << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& cam = cameras[i];
    if (cam.intrinsics.width != cfg.width || cam.intrinsics.height != cfg.height) {
      fail(ErrorCode::kShapeMismatch, "camera " + std::to_string(i) + " is " +
                                          std::to_string(cam.intrinsics.width) + "x" +
                                          std::to_string(cam.intrinsics.height) +
                                          ", config image size is " + std::to_string(cfg.width) +
                                          "x" + std::to_string(cfg.height));
    }
    const GroundTruthFrame truth = ray_cast(scene, cam);
    const InstanceMask regions = fast_regions(truth.instance_image, frontend, i);
    const auto t0 = std::chrono::steady_clock::now();
    const LocResult loc = instance_loc(field, cam, regions, lp, cfg.render);
    const double ms = 1000.0 * seconds_since(t0);
    localized.push_back(apply_merge(loc.labels, merge));
    rendered.push_back(apply_merge(render_view(field, cam, cfg.render).labels, merge));
    gt.push_back(truth.instance_image);
    write_pgm16(join(out, "loc/" + frame_name(i, ".pgm")), localized.back());
    const auto mi_loc = matched_miou({localized.back()}, {gt.back()});
    const auto mi_render = matched_miou({rendered.back()}, {gt.back()});
    report << "view " << i << " ms=" << ms << " queries=" << loc.field_queries
           << " regions=" << regions.regions().size() << " miou_loc=" << mi_loc.miou_tp
           << " miou_render=" << mi_render.miou_tp << '\n';
  }
  const auto all_loc = matched_miou(localized, gt);
  const auto all_render = matched_miou(rendered, gt);
  report << "views=" << cameras.size() << '\n'
         << "miou_loc=" << all_loc.miou_tp << " tp=" << all_loc.tp
         << " total_reference=" << all_loc.total_reference << '\n'
         << "miou_render=" << all_render.miou_tp << " tp=" << all_render.tp << '\n';
  write_text_file(join(out, "loc_report.txt"), report.str());
}

void cmd_eval(const PipelineConfig& cfg) {
  const std::string& out = cfg.out_dir;
  const auto cameras = read_cameras_file(join(out, "cameras.txt"));
  const auto gt = read_images(join(out, "gt"), cameras.size());
  const std::pair<const char*, const char*> targets[] = {
      {"pseudolabels", "metrics_pseudolabel.txt"},
      {"lifted", "metrics_lifted.txt"},
      {"final", "metrics.txt"},
  };
  bool any = false;
  for (const auto& [dir, report] : targets) {
    if (!fs::is_directory(join(out, dir))) continue;
    any = true;
    write_text_file(join(out, report),
                    report_text(scene_pq(read_images(join(out, dir), cameras.size()), gt)));
  }
  if (!any) fail(ErrorCode::kIoError, "no prediction directories under " + out);
}

void cmd_render(const PipelineConfig& cfg, const std::string& checkpoint,
                const std::string& cameras_path) {
  apply_threads(cfg);
  const std::string& out = cfg.out_dir;
  const LabelField field = load_field(checkpoint);
  MergeMap merge = MergeMap::identity(field.label_count());
  if (fs::exists(join(out, "merge_map.txt"))) {
    std::istringstream in(read_text_file(join(out, "merge_map.txt")));
    merge = read_merge_map(in);
  }
  std::vector<LabelImage> images;
  for (const auto& cam : read_cameras_file(cameras_path)) {
    images.push_back(apply_merge(render_view(field, cam, cfg.render).labels, merge));
  }
  write_images(join(out, "renders"), images);
}

}  // namespace masklift
