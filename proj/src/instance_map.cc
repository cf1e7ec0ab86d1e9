#include "masklift/instance_map.h"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "masklift/error.h"

namespace masklift {
namespace {

Label label_at(const InstanceMask& mask, const PixelCoord& p) {
  if (!mask.labels().contains(p.v, p.u)) return 0;
  return mask.labels().at(p.v, p.u);
}

}  // namespace

std::optional<std::size_t> AssociationGraph::find(RegionKey key) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), key,
                                   [](const RegionNode& n, const RegionKey& k) { return n.key < k; });
  if (it == nodes.end() || it->key != key) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

WeightedGraph AssociationGraph::weighted() const {
  WeightedGraph g;
  g.node_count = nodes.size();
  for (const auto& e : edges) g.edges.push_back({e.a, e.b, e.weight});
  return g;
}

double matching_score(std::size_t matches, std::size_t keypoints_u, std::size_t keypoints_v) {
  if (matches == 0 || keypoints_u == 0 || keypoints_v == 0) return 0.0;
  return std::min(static_cast<double>(matches) / static_cast<double>(keypoints_u),
                  static_cast<double>(matches) / static_cast<double>(keypoints_v));
}

AssociationGraph build_association_graph(const std::vector<InstanceMask>& masks,
                                         const std::vector<MatchSet>& match_sets,
                                         double tau_local) {
  AssociationGraph graph;
  for (std::size_t f = 0; f < masks.size(); ++f) {
    for (const auto& [label, info] : masks[f].regions()) {
      RegionNode node;
      node.key = {static_cast<int>(f), label};
      node.pixel_count = info.pixel_count;
      graph.nodes.push_back(std::move(node));
    }
  }

  for (std::size_t p = 0; p < match_sets.size(); ++p) {
    const MatchSet& set = match_sets[p];
    const int fi = set.pair.i;
    const int fj = set.pair.j;
    if (fi < 0 || fj < 0 || static_cast<std::size_t>(fi) >= masks.size() ||
        static_cast<std::size_t>(fj) >= masks.size()) {
      fail(ErrorCode::kInconsistentInput, "match set references missing frame pair (" +
                                              std::to_string(fi) + ", " + std::to_string(fj) +
                                              ")");
    }
    set.validate();
    const auto& mi = masks[fi];
    const auto& mj = masks[fj];

    std::map<Label, std::size_t> count_i, count_j;
    for (const auto& kp : set.keypoints_i) {
      if (const Label l = label_at(mi, kp); l != 0) ++count_i[l];
    }
    for (const auto& kp : set.keypoints_j) {
      if (const Label l = label_at(mj, kp); l != 0) ++count_j[l];
    }
    for (const auto& [l, c] : count_i) graph.nodes[*graph.find({fi, l})].keypoint_tally[p] = c;
    for (const auto& [l, c] : count_j) graph.nodes[*graph.find({fj, l})].keypoint_tally[p] = c;

    std::map<Label, std::map<Label, std::size_t>> pair_matches;
    for (const auto& [a, b] : set.matches) {
      const Label lu = label_at(mi, set.keypoints_i[a]);
      const Label lv = label_at(mj, set.keypoints_j[b]);
      if (lu != 0 && lv != 0) ++pair_matches[lu][lv];
    }
    for (const auto& [lu, row] : pair_matches) {
      Label best = 0;
      double best_score = 0.0;
      for (const auto& [lv, m] : row) {  // ascending lv keeps the lower label on ties
        const double score = matching_score(m, count_i[lu], count_j[lv]);
        if (score > best_score) {
          best_score = score;
          best = lv;
        }
      }
      if (best != 0 && best_score > tau_local) {
        graph.edges.push_back({*graph.find({fi, lu}), *graph.find({fj, best}), best_score});
      }
    }
  }
  return graph;
}

std::vector<std::size_t> community_partition(const AssociationGraph& graph, double resolution,
                                             std::uint64_t seed) {
  LeidenParams params;
  params.resolution = resolution;
  params.seed = seed;
  return leiden_communities(graph.weighted(), params);
}

std::optional<Label> LabelAssignment::lookup(RegionKey key) const {
  const auto it = mapping.find(key);
  if (it == mapping.end()) return std::nullopt;
  return it->second;
}

LabelAssignment assign_labels(const AssociationGraph& graph,
                              const std::vector<std::size_t>& partition, int tau_community,
                              int min_frames) {
  if (partition.size() != graph.nodes.size()) {
    fail(ErrorCode::kInconsistentInput, "partition does not cover the graph nodes");
  }
  std::map<std::size_t, std::vector<std::size_t>> communities;
  for (std::size_t v = 0; v < partition.size(); ++v) communities[partition[v]].push_back(v);

  struct Kept {
    std::vector<std::size_t> members;  // ascending node index == ascending key
  };
  std::vector<Kept> kept;
  for (auto& [id, members] : communities) {
    if (static_cast<int>(members.size()) < tau_community) continue;
    std::set<int> frames;
    for (std::size_t v : members) frames.insert(graph.nodes[v].key.frame);
    if (static_cast<int>(frames.size()) < min_frames) continue;
    kept.push_back({std::move(members)});
  }
  std::sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.members.front() < b.members.front();
  });

  LabelAssignment out;
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const Label label = static_cast<Label>(c + 1);
    std::set<int> frames;
    double area = 0.0;
    for (std::size_t v : kept[c].members) {
      const auto& node = graph.nodes[v];
      out.mapping[node.key] = label;
      frames.insert(node.key.frame);
      area += static_cast<double>(node.pixel_count);
    }
    out.frames_per_label[label] = static_cast<int>(frames.size());
    out.avg_area[label] = area / static_cast<double>(frames.size());
  }
  return out;
}

std::vector<Label> rasterization_order(const LabelAssignment& assignment) {
  std::vector<Label> order;
  for (const auto& [label, area] : assignment.avg_area) order.push_back(label);
  std::stable_sort(order.begin(), order.end(), [&](Label a, Label b) {
    return assignment.avg_area.at(a) > assignment.avg_area.at(b);
  });
  return order;
}

std::vector<LabelImage> render_pseudolabels(const std::vector<InstanceMask>& masks,
                                            const LabelAssignment& assignment,
                                            const std::vector<Label>& order) {
  std::map<Label, std::size_t> rank;
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  for (const auto& [label, frames] : assignment.frames_per_label) {
    if (!rank.count(label)) {
      fail(ErrorCode::kInconsistentInput, "rasterization order misses label " +
                                              std::to_string(label));
    }
  }

  std::vector<LabelImage> out;
  out.reserve(masks.size());
  for (std::size_t f = 0; f < masks.size(); ++f) {
    const auto& mask = masks[f];
    // Painting in rank order: the last painted label at a pixel wins.
    std::vector<std::vector<Label>> layers(order.size());
    for (const auto& [region, info] : mask.regions()) {
      if (const auto l = assignment.lookup({static_cast<int>(f), region})) {
        layers[rank.at(*l)].push_back(region);
      }
    }
    LabelImage img(mask.width(), mask.height(), 0);
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (layers[r].empty()) continue;
      const std::set<Label> regions(layers[r].begin(), layers[r].end());
      for (std::size_t p = 0; p < img.size(); ++p) {
        if (regions.count(mask.labels().data[p])) img.data[p] = order[r];
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

void write_graph(std::ostream& out, const AssociationGraph& graph) {
  out << "# frame:region frame:region weight\n" << std::setprecision(17);
  for (const auto& e : graph.edges) {
    const auto& a = graph.nodes[e.a].key;
    const auto& b = graph.nodes[e.b].key;
    out << a.frame << ':' << a.region << ' ' << b.frame << ':' << b.region << ' ' << e.weight
        << '\n';
  }
}

void write_assignment(std::ostream& out, const LabelAssignment& assignment) {
  out << "# frame region label3d\n";
  for (const auto& [key, label] : assignment.mapping) {
    out << key.frame << ' ' << key.region << ' ' << label << '\n';
  }
}

LabelAssignment read_assignment(std::istream& in, const std::vector<InstanceMask>& masks) {
  LabelAssignment out;
  std::map<Label, std::map<int, double>> area_per_frame;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    long long frame = 0, region = 0, label = 0;
    if (!(ss >> frame)) continue;
    std::string extra;
    if (!(ss >> region >> label) || (ss >> extra)) {
      fail(ErrorCode::kParseError, "assignment line " + std::to_string(line_no));
    }
    if (frame < 0 || static_cast<std::size_t>(frame) >= masks.size() || label <= 0) {
      fail(ErrorCode::kInconsistentInput, "assignment line " + std::to_string(line_no));
    }
    const auto& regions = masks[frame].regions();
    const auto it = regions.find(static_cast<Label>(region));
    if (it == regions.end()) {
      fail(ErrorCode::kInconsistentInput, "assignment line " + std::to_string(line_no) +
                                              ": unknown region");
    }
    const RegionKey key{static_cast<int>(frame), static_cast<Label>(region)};
    out.mapping[key] = static_cast<Label>(label);
    area_per_frame[static_cast<Label>(label)][key.frame] +=
        static_cast<double>(it->second.pixel_count);
  }
  for (const auto& [label, frames] : area_per_frame) {
    double total = 0.0;
    for (const auto& [f, a] : frames) total += a;
    out.frames_per_label[label] = static_cast<int>(frames.size());
    out.avg_area[label] = total / static_cast<double>(frames.size());
  }
  return out;
}

}  // namespace masklift
