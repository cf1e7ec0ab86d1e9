#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "masklift/frontend.h"
#include "masklift/instance_map.h"
#include "masklift/label_field.h"

namespace masklift {

class RedundancyGraph {
 public:
  void add_node(Label label);
  // One more edge between a and b (a != b).
  void add_edge(Label a, Label b, std::size_t count = 1);

  std::size_t edge_count(Label a, Label b) const;
  std::size_t degree(Label label) const;
  const std::set<Label>& nodes() const { return nodes_; }
  const std::map<std::pair<Label, Label>, std::size_t>& edges() const { return edges_; }

  bool operator==(const RedundancyGraph&) const = default;

 private:
  std::set<Label> nodes_;
  std::map<std::pair<Label, Label>, std::size_t> edges_;  // key ordered (min, max)
  std::map<Label, std::size_t> degree_;
};

// For every region of `regions`, the fraction of its pixels carrying each
// rendered label, then one edge per unordered label pair whose fractions both
// exceed tau_area. Background (0) never takes part.
void add_region_edges(RedundancyGraph& graph, const LabelImage& rendered,
                      const InstanceMask& regions, double tau_area);

struct RedundancyParams {
  int views = 20;                    // K
  double tau_area = 0.15;
  int downsample = 2;
  double jitter_translation = 0.05;  // meters, per axis std-dev
  double jitter_rotation_deg = 2.0;
  std::uint64_t seed = 0;
};

// Supplies the label raster the fast frontend segments for a camera.
using RegionSource = std::function<LabelImage(const Camera&)>;

RedundancyGraph build_redundancy_graph(const LabelField& field,
                                       const std::vector<Camera>& cameras,
                                       const RedundancyParams& params,
                                       const CorruptionParams& frontend,
                                       const RenderConfig& render_cfg,
                                       const RegionSource& source);

class MergeMap {
 public:
  MergeMap() = default;
  explicit MergeMap(std::map<Label, Label> mapping);
  static MergeMap identity(Label label_count);

  // Throws kUnknownLabel for labels outside the domain; 0 maps to 0.
  Label operator()(Label label) const;
  const std::map<Label, Label>& mapping() const { return mapping_; }
  bool operator==(const MergeMap&) const = default;

 private:
  std::map<Label, Label> mapping_;
};

// Single pass over the frozen graph: union every pair with
// 2|e_ab| / (deg a + deg b) > tau_merge; canonical label = smallest id.
// With iterate set, the graph is contracted and the pass repeated until no
// pair passes.
MergeMap merge_labels(const RedundancyGraph& graph, double tau_merge, bool iterate = false);

LabelImage apply_merge(const LabelImage& image, const MergeMap& merge);
LabelAssignment apply_merge(const LabelAssignment& assignment, const MergeMap& merge);

void write_merge_map(std::ostream& out, const MergeMap& merge);
MergeMap read_merge_map(std::istream& in);

struct LocParams {
  int samples_per_region = 48;
  bool exhaustive = false;
  std::uint64_t seed = 0;
};

struct LocResult {
  LabelImage labels;  // 3D labels per region, 0 where unlocalized
  std::size_t field_queries = 0;
  std::map<Label, Label> region_labels;  // frontend region -> 3D label
};

LocResult instance_loc(const LabelField& field, const Camera& camera, const InstanceMask& mask,
                       const LocParams& params, const RenderConfig& render_cfg);

}  // namespace masklift
