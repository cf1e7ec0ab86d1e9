#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "masklift/correspondence.h"
#include "masklift/frontend.h"
#include "masklift/leiden.h"

namespace masklift {

struct RegionKey {
  int frame = 0;
  Label region = 0;
  auto operator<=>(const RegionKey&) const = default;
};

struct RegionNode {
  RegionKey key;
  std::size_t pixel_count = 0;
  // pair index (into the match-set list) -> keypoints of this frame inside
  // the region for that pair
  std::map<std::size_t, std::size_t> keypoint_tally;
};

struct GraphEdge {
  std::size_t a = 0;  // node indices
  std::size_t b = 0;
  double weight = 0.0;
};

struct AssociationGraph {
  std::vector<RegionNode> nodes;  // sorted by (frame, region)
  std::vector<GraphEdge> edges;

  std::optional<std::size_t> find(RegionKey key) const;
  WeightedGraph weighted() const;
};

// Matching score min(m / |k_i(r_u)|, m / |k_j(r_v)|) for one region pair.
double matching_score(std::size_t matches, std::size_t keypoints_u, std::size_t keypoints_v);

AssociationGraph build_association_graph(const std::vector<InstanceMask>& masks,
                                         const std::vector<MatchSet>& match_sets,
                                         double tau_local);

// Leiden over the association graph's weighted view.
std::vector<std::size_t> community_partition(const AssociationGraph& graph,
                                             double resolution, std::uint64_t seed);

struct LabelAssignment {
  std::map<RegionKey, Label> mapping;  // regions absent here map to none
  std::map<Label, int> frames_per_label;
  std::map<Label, double> avg_area;

  Label label_count() const { return static_cast<Label>(frames_per_label.size()); }
  std::optional<Label> lookup(RegionKey key) const;
};

LabelAssignment assign_labels(const AssociationGraph& graph,
                              const std::vector<std::size_t>& partition,
                              int tau_community, int min_frames);

// Labels by decreasing average area, ties by ascending id.
std::vector<Label> rasterization_order(const LabelAssignment& assignment);

std::vector<LabelImage> render_pseudolabels(const std::vector<InstanceMask>& masks,
                                            const LabelAssignment& assignment,
                                            const std::vector<Label>& order);

// Text exports: `frame:region frame:region weight` and `frame region label`.
void write_graph(std::ostream& out, const AssociationGraph& graph);
void write_assignment(std::ostream& out, const LabelAssignment& assignment);
LabelAssignment read_assignment(std::istream& in, const std::vector<InstanceMask>& masks);

}  // namespace masklift
