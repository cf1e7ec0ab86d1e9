#pragma once

#include <string>
#include <utility>
#include <vector>

#include "masklift/config.h"
#include "masklift/instance_map.h"
#include "masklift/metrics.h"

namespace masklift {

struct SceneData {
  Scene scene;
  std::vector<GroundTruthFrame> frames;
  std::vector<InstanceMask> masks;
};

Scene resolve_scene(const PipelineConfig& cfg);
std::vector<Camera> trajectory_cameras(const PipelineConfig& cfg, const Scene& scene);
SceneData synthesize(const PipelineConfig& cfg);

struct CorrespondenceResult {
  std::vector<VisualPair> pairs;
  std::vector<MatchSet> match_sets;
};
CorrespondenceResult run_correspondence(const PipelineConfig& cfg,
                                        const std::vector<GroundTruthFrame>& frames);

struct InstanceMapResult {
  AssociationGraph graph;
  std::vector<std::size_t> partition;
  LabelAssignment assignment;
  std::vector<Label> order;
  std::vector<LabelImage> pseudolabels;
};
InstanceMapResult run_instance_map(const PipelineConfig& cfg,
                                   const std::vector<InstanceMask>& masks,
                                   const std::vector<MatchSet>& match_sets);

// Field over the padded scene bounds; level n spans the longest axis with n
// nodes, shorter axes proportionally.
LabelField make_field(const PipelineConfig& cfg, const Scene& scene, Label label_count);
std::vector<LossRecord> run_lift(const PipelineConfig& cfg, LabelField& field,
                                 const SceneData& data,
                                 const std::vector<LabelImage>& pseudolabels);
RedundancyGraph run_redundancy(const PipelineConfig& cfg, const LabelField& field,
                               const SceneData& data);
std::vector<LabelImage> render_frames(const PipelineConfig& cfg, const LabelField& field,
                                      const std::vector<Camera>& cameras);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunResult {
  CorrespondenceResult correspondence;
  InstanceMapResult instance_map;
  LabelField field;
  std::vector<LossRecord> loss_trace;
  RedundancyGraph redundancy;
  MergeMap merge;
  std::vector<LabelImage> lifted;  // field renders before merging
  std::vector<LabelImage> final_labels;
  PQReport pseudolabel_report;
  PQReport lifted_report;
  PQReport final_report;
  std::vector<StageTiming> timings;  // correspondence, instance_map, lift-train, merge, render
};

// Whole pipeline in memory. When `field` is given, training is skipped and
// that field is used instead.
RunResult run_pipeline(const PipelineConfig& cfg, const SceneData& data,
                       const LabelField* field = nullptr);

// On-disk subcommands. Each writes into cfg.out_dir.
void cmd_synth(const PipelineConfig& cfg);
RunResult cmd_run(const PipelineConfig& cfg);
void cmd_loc(const PipelineConfig& cfg, const std::string& checkpoint,
             const std::string& cameras_path);
void cmd_eval(const PipelineConfig& cfg);
void cmd_render(const PipelineConfig& cfg, const std::string& checkpoint,
                const std::string& cameras_path);

// Reads back the artifacts cmd_synth wrote.
SceneData load_synth(const PipelineConfig& cfg);

}  // namespace masklift
