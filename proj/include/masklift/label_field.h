#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "masklift/geometry.h"
#include "masklift/image.h"
#include "masklift/rng.h"
#include "masklift/scene.h"

namespace masklift {

using Resolution = std::array<int, 3>;

// Multiresolution dense voxel field. Every level stores one density value
// and L + 1 logits per node (channel 0 is background). Nodes are cell
// centered: node (i, j, k) of a level with resolution n sits at
// bounds.min + (idx + 0.5) * extent / n, x fastest. Samples are trilinear
// per level (clamped at the outer half cell) and summed over levels.
class LabelField {
 public:
  LabelField() = default;
  LabelField(const Aabb& bounds, std::vector<Resolution> resolutions, Label label_count);

  const Aabb& bounds() const { return bounds_; }
  std::size_t level_count() const { return resolutions_.size(); }
  const Resolution& resolution(std::size_t level) const { return resolutions_[level]; }
  Label label_count() const { return label_count_; }
  int channels() const { return static_cast<int>(label_count_) + 1; }
  std::size_t node_count(std::size_t level) const;

  std::vector<float>& density(std::size_t level) { return density_[level]; }
  const std::vector<float>& density(std::size_t level) const { return density_[level]; }
  // Node-major: logits(level)[node * channels() + c].
  std::vector<float>& logits(std::size_t level) { return logits_[level]; }
  const std::vector<float>& logits(std::size_t level) const { return logits_[level]; }

  std::size_t node_index(std::size_t level, int i, int j, int k) const;
  Vec3 node_position(std::size_t level, int i, int j, int k) const;

  struct Corner {
    std::size_t node = 0;
    double weight = 0.0;
  };
  // Trilinear stencil of an in-bounds point on one level.
  std::array<Corner, 8> stencil(std::size_t level, const Vec3& p) const;

  bool in_bounds(const Vec3& p) const { return bounds_.contains(p); }
  // Summed density, rectified at 0; zero outside bounds.
  double density_at(const Vec3& p) const;
  // Summed logits; outside bounds these are the background vector.
  void logits_at(const Vec3& p, std::span<double> out, double background_logit) const;

  bool operator==(const LabelField&) const = default;

 private:
  Aabb bounds_;
  std::vector<Resolution> resolutions_;
  Label label_count_ = 0;
  std::vector<std::vector<float>> density_;
  std::vector<std::vector<float>> logits_;
};

struct FieldSample {
  double sigma = 0.0;
  Eigen::VectorXd logits;
};

FieldSample sample_field(const LabelField& field, const Vec3& point,
                         double background_logit = 10.0);

struct RenderConfig {
  int samples_per_ray = 64;
  double near = 0.05;  // clamps the per-ray bounds interval
  double far = 100.0;
  bool stratified = false;
  double background_logit = 10.0;  // background vector = background_logit * e_0

  void validate() const;
};

// Per-sample compositing quantities along one ray.
struct CompositeTrace {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<double> sigma;
  std::vector<double> alpha;
  std::vector<double> transmittance;
  std::vector<double> weight;
};

// Sample positions in the ray's [near, far] window: midpoints of equal
// intervals, or jittered within each interval when rng is given.
CompositeTrace trace_ray(const LabelField& field, const Ray& ray, const RenderConfig& cfg,
                         CounterRng* jitter = nullptr);

struct RayRender {
  Eigen::VectorXd distribution;  // softmax over L + 1 classes
  double expected_depth = 0.0;   // along the ray parameter t
  double weight_sum = 0.0;
};

RayRender render_ray(const LabelField& field, const Ray& ray, const RenderConfig& cfg,
                     CounterRng* jitter = nullptr);

struct RenderedView {
  LabelImage labels;
  Image<float> max_probability;
};

// Argmax labels at (W / downsample) x (H / downsample), coarse pixel centers.
RenderedView render_view(const LabelField& field, const Camera& camera, const RenderConfig& cfg,
                         int downsample = 1);

// Paints the level whose resolution equals the oracle grid: foreground voxels
// get density `sigma`, +logit at the mapped label and -logit elsewhere; empty
// voxels stay all zero. Other levels are zeroed. Throws kUnmappedId /
// kShapeMismatch.
void paint_from_oracle(LabelField& field, const VoxelLabels& oracle,
                       const std::map<Label, Label>& label_map, double sigma = 50.0,
                       double logit = 10.0);

// Density only, same level rule as paint_from_oracle; logits are untouched.
void paint_density_from_oracle(LabelField& field, const VoxelLabels& oracle,
                               double sigma = 50.0);

enum class DensityMode { kOracle, kDepthSupervised };

struct TrainConfig {
  int iterations = 2000;
  int rays_per_batch = 512;
  double lr_density = 20.0;
  double lr_labels = 1000.0;
  double background_fraction = 0.1;
  DensityMode density_mode = DensityMode::kOracle;
  double depth_weight = 0.1;  // relative weight of the depth term in the density loss
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingView {
  Camera camera;
  LabelImage pseudolabels;
  std::optional<DepthImage> depth;  // camera-frame Z, required in depth mode
};

struct SupervisedRay {
  Ray ray;
  Label target = 0;
  std::optional<double> depth_t;  // hit distance along the ray; none = background
};

// Sparse gradient entry against a flat parameter array of one level.
struct GradEntry {
  std::uint32_t level = 0;
  std::size_t index = 0;
  double value = 0.0;
};

// Mean cross entropy of the rendered distributions. When gradient is given,
// appends d(loss)/d(logit parameter) entries with density held constant.
double label_loss(const LabelField& field, std::span<const SupervisedRay> rays,
                  const RenderConfig& cfg, std::vector<GradEntry>* gradient = nullptr,
                  std::span<const std::uint64_t> jitter_keys = {});

// Mean occupancy loss: (W - 1)^2 + depth_weight * ((D - d) / d)^2 on rays
// with a depth target, W^2 otherwise. Optional density gradient.
double density_loss(const LabelField& field, std::span<const SupervisedRay> rays,
                    const RenderConfig& cfg, double depth_weight,
                    std::vector<GradEntry>* gradient = nullptr,
                    std::span<const std::uint64_t> jitter_keys = {});

struct LossRecord {
  int iteration = 0;
  double ce_loss = 0.0;
  double density_loss = 0.0;
};

// Plain gradient descent on the label grids (and the density grids in
// depth-supervised mode). Density is projected to >= 0 after each step.
std::vector<LossRecord> train(LabelField& field, const std::vector<TrainingView>& views,
                              const TrainConfig& train_cfg, const RenderConfig& render_cfg);

// Checkpoint: `LF01`, bounds (6 x f64 LE), u32 level count, u32 x 3 per
// level, u32 L, then f32 LE density levels followed by logit levels.
void save_field(const std::string& path, const LabelField& field);
LabelField load_field(const std::string& path);

void write_loss_trace(std::ostream& out, const std::vector<LossRecord>& trace);

}  // namespace masklift
